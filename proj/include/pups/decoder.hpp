#pragma once

#include "pups/common.hpp"
#include "pups/image.hpp"
#include "pups/upsampler.hpp"

#include <cstdint>
#include <vector>

namespace pups {

// Pixelwise MLP (1x1 convolutions): hidden layers with ReLU, linear 3-channel
// output. The output at a pixel depends only on the L dense-latent values there.
struct SynthesisNet {
  std::vector<Eigen::MatrixXd> weights;  // layer l: (out x in)
  std::vector<Eigen::VectorXd> biases;

  int input_width() const { return static_cast<int>(weights.front().cols()); }
  std::vector<int> hidden_widths() const;
};

SynthesisNet make_synthesis(int input_width, const std::vector<int>& hidden_widths,
                            std::uint64_t seed);

// Factorized zero-mean Laplace rate model, one scale per pyramid level.
// Scales are stored as log values so they stay positive under gradient steps.
struct RateModel {
  Eigen::VectorXd log_scale;
  double scale(int level) const;
};

RateModel make_rate_model(int levels);

// Bits for one integerized symbol: -log2(F(v+0.5) - F(v-0.5)), F the Laplace
// CDF with the given scale. Also returns derivatives for the backward pass.
struct LaplaceBits {
  double bits;
  double d_value;
  double d_log_scale;
};
LaplaceBits laplace_bits(double value, double scale);

// F(v+0.5) - F(v-0.5), evaluated in the log domain so deep tails stay finite.
double laplace_mass(double value, double scale);

// Total bits of a pyramid of (surrogate) values under the rate model.
double rate_bits(const LatentPyramid& values, const RateModel& rate);

enum class UpsamplerKind { kSeparable, kLegacy };

// Latent surrogate used by the forward pass. Training uses additive uniform
// noise first and straight-through rounding afterwards; evaluation rounds.
enum class LatentMode { kContinuous, kNoise, kRound };

struct DecoderModel {
  int width = 0;
  int height = 0;
  UpsamplerKind kind = UpsamplerKind::kSeparable;
  LatentPyramid pyramid;     // continuous during training, integers after
  UpsamplerParams upsampler; // kSeparable
  Kernel2D legacy_kernel;    // kLegacy
  SynthesisNet synthesis;
  RateModel rate;

  int levels() const { return pyramid.level_count(); }
};

DecoderModel make_decoder_model(int width, int height, int levels, int n_l, int k_l, int n_h,
                                int k_h, const std::vector<int>& hidden_widths, std::uint64_t seed);
DecoderModel make_legacy_model(int width, int height, int levels, int kernel_size,
                               const std::vector<int>& hidden_widths, std::uint64_t seed);

void validate_model(const DecoderModel& model);

// Free kernel taps carried by the model (half taps for symmetric kernels,
// K*K for the legacy kernel).
int kernel_parameter_count(const DecoderModel& model);

std::vector<Plane> synthesize_model_dense(const DecoderModel& model, const LatentPyramid& latents);

// pyramid -> (round if quantized) -> dense latents -> synthesis -> clamp [0,1].
RgbImage decode_forward(const DecoderModel& model, bool quantized);

struct LossBreakdown {
  double j = 0.0;
  double d_mse = 0.0;
  double rate_bpp = 0.0;
  double rate_bits_total = 0.0;
};

// J = D + lambda * R_bpp with D the MSE of the surrogate-mode reconstruction
// and R the rate of the surrogate latent values.
LossBreakdown loss(const DecoderModel& model, const RgbImage& target, double lambda,
                   LatentMode mode = LatentMode::kContinuous,
                   const LatentPyramid* noise = nullptr);

// Which parameter groups train (frozen groups report exactly zero gradients
// and are skipped by the optimizer).
struct TrainMask {
  bool latents = true;
  bool kernels = true;     // L kernels / legacy taps
  bool prefilters = true;  // H kernels
  bool synthesis = true;
  bool rate = true;
};

struct ModelGradients {
  std::vector<Plane> pyramid;
  std::vector<Eigen::VectorXd> l_half_taps;
  std::vector<Eigen::VectorXd> h_half_taps;
  Eigen::MatrixXd legacy_taps;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Eigen::VectorXd log_scale;
};

// Reverse-mode gradients of J for every free parameter. Rounding is handled
// by the straight-through estimator (identity gradient); noise is additive,
// so the same identity applies. Pass the noise draw used by the forward.
ModelGradients backward(const DecoderModel& model, const RgbImage& target, double lambda,
                        LatentMode mode, const LatentPyramid* noise, const TrainMask& mask,
                        LossBreakdown* loss_out = nullptr);

struct TrainConfig {
  double lambda = 1e-3;
  int iterations = 2000;
  double lr_latents = 1e-2;
  double lr_params = 1e-3;
  double lr_floor = 1e-5;
  double noise_fraction = 0.8;  // uniform-noise surrogate phase, then STE
  int checkpoint_interval = 0;  // 0 -> max(1, iterations/20)
  std::uint64_t seed = 0;
  TrainMask mask;
};

struct TraceRow {
  int iteration;
  double j;
  double d_mse;
  double rate_bpp;
  double psnr_db;
};

struct TrainResult {
  DecoderModel model;          // best checkpoint, pyramid rounded to integers
  std::vector<TraceRow> trace; // best-so-far objective at each checkpoint
  LossBreakdown final_loss;    // quantized-mode evaluation of the result
};

// Adam on J with cosine learning-rate decay; deterministic for a fixed seed.
// Checkpoints evaluate in quantized mode and retain the best model seen.
TrainResult train(DecoderModel model, const RgbImage& target, const TrainConfig& config);

void write_trace_csv(const std::vector<TraceRow>& trace, std::ostream& out);

// Uniform noise draw in (-0.5, 0.5) per latent, deterministic in the rng state.
LatentPyramid draw_noise(const LatentPyramid& shape, std::uint64_t& rng_state);

}  // namespace pups
