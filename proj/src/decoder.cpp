#include "pups/decoder.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace pups {

namespace {

constexpr double kLn2 = 0.6931471805599453;
constexpr double kLogScaleClamp = 13.8;  // exp(±13.8) ~ 1e±6

double uniform01(std::uint64_t& state) {
  return (splitmix64(state) >> 11) * 0x1.0p-53;
}

double psnr_from_mse(double m) {
  if (m <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / m));
}

double log_sinh(double x) {
  if (x < 1.0) return std::log(std::sinh(x));
  return x + std::log1p(-std::exp(-2.0 * x)) - kLn2;
}

}  // namespace

std::vector<int> SynthesisNet::hidden_widths() const {
  std::vector<int> widths;
  for (size_t l = 0; l + 1 < weights.size(); ++l) widths.push_back(static_cast<int>(weights[l].rows()));
  return widths;
}

SynthesisNet make_synthesis(int input_width, const std::vector<int>& hidden_widths,
                            std::uint64_t seed) {
  require(input_width >= 1, ErrorCode::kInvalidArgument, "synthesis input width must be positive");
  SynthesisNet net;
  std::uint64_t rng = seed;
  int fan_in = input_width;
  std::vector<int> outs(hidden_widths);
  outs.push_back(3);
  for (int fan_out : outs) {
    require(fan_out >= 1, ErrorCode::kInvalidArgument, "layer width must be positive");
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i) {
      for (int j = 0; j < fan_in; ++j) {
        w(i, j) = (2.0 * uniform01(rng) - 1.0) * limit;
      }
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    fan_in = fan_out;
  }
  return net;
}

double RateModel::scale(int level) const {
  const double t = std::min(kLogScaleClamp, std::max(-kLogScaleClamp, log_scale[level]));
  return std::exp(t);
}

RateModel make_rate_model(int levels) {
  return RateModel{Eigen::VectorXd::Zero(levels)};  // scale 1 per level
}

LaplaceBits laplace_bits(double value, double scale) {
  const double b = scale;
  const double a = std::abs(value);
  LaplaceBits out;
  if (a >= 0.5) {
    // mass = exp(-a/b) * sinh(0.5/b)
    const double x = 0.5 / b;
    out.bits = (a / b - log_sinh(x)) / kLn2;
    out.d_value = ((value > 0.0) ? 1.0 : -1.0) / (b * kLn2);
    out.d_log_scale = (0.5 / std::tanh(x) - a) / (b * kLn2);
  } else {
    // mass = 1 - 0.5*(e1 + e2) with both exponents nonpositive
    const double e1 = std::exp(-(0.5 - value) / b);
    const double e2 = std::exp(-(0.5 + value) / b);
    const double m = 1.0 - 0.5 * (e1 + e2);
    out.bits = -std::log1p(-0.5 * (e1 + e2)) / kLn2;
    out.d_value = 0.5 * (e1 - e2) / (b * m * kLn2);
    out.d_log_scale = 0.5 * (e1 * (0.5 - value) + e2 * (0.5 + value)) / (b * m * kLn2);
  }
  return out;
}

double laplace_mass(double value, double scale) {
  const double a = std::abs(value);
  if (a >= 0.5) {
    return std::exp(-a / scale + log_sinh(0.5 / scale));
  }
  const double e1 = std::exp(-(0.5 - value) / scale);
  const double e2 = std::exp(-(0.5 + value) / scale);
  return 1.0 - 0.5 * (e1 + e2);
}

double rate_bits(const LatentPyramid& values, const RateModel& rate) {
  require(rate.log_scale.size() == values.level_count(), ErrorCode::kDimensionMismatch,
          "rate model level count mismatch");
  double bits = 0.0;
  for (int n = 0; n < values.level_count(); ++n) {
    const double b = rate.scale(n);
    const Plane& plane = values.levels[n];
    for (Eigen::Index i = 0; i < plane.size(); ++i) {
      bits += laplace_bits(plane.data()[i], b).bits;
    }
  }
  return bits;
}

DecoderModel make_decoder_model(int width, int height, int levels, int n_l, int k_l, int n_h,
                                int k_h, const std::vector<int>& hidden_widths, std::uint64_t seed) {
  DecoderModel model;
  model.width = width;
  model.height = height;
  model.kind = UpsamplerKind::kSeparable;
  model.pyramid = zero_pyramid(width, height, levels);
  model.upsampler = make_upsampler_params(levels, n_l, k_l, n_h, k_h);
  model.synthesis = make_synthesis(levels, hidden_widths, seed);
  model.rate = make_rate_model(levels);
  return model;
}

DecoderModel make_legacy_model(int width, int height, int levels, int kernel_size,
                               const std::vector<int>& hidden_widths, std::uint64_t seed) {
  DecoderModel model;
  model.width = width;
  model.height = height;
  model.kind = UpsamplerKind::kLegacy;
  model.pyramid = zero_pyramid(width, height, levels);
  model.legacy_kernel =
      outer_product(kernel_size == 8 ? bicubic_init(8) : bilinear_init(kernel_size));
  model.synthesis = make_synthesis(levels, hidden_widths, seed);
  model.rate = make_rate_model(levels);
  return model;
}

void validate_model(const DecoderModel& model) {
  validate_pyramid(model.pyramid, model.width, model.height);
  if (model.kind == UpsamplerKind::kSeparable) {
    validate_upsampler_params(model.upsampler, model.levels());
  } else {
    require(model.legacy_kernel.size() >= 2 && model.legacy_kernel.size() % 2 == 0,
            ErrorCode::kInvalidArgument, "legacy kernel size must be even");
  }
  require(model.synthesis.input_width() == model.levels(), ErrorCode::kDimensionMismatch,
          "synthesis input width must equal the level count");
  require(model.rate.log_scale.size() == model.levels(), ErrorCode::kDimensionMismatch,
          "rate model level count mismatch");
}

int kernel_parameter_count(const DecoderModel& model) {
  if (model.kind == UpsamplerKind::kLegacy) {
    return model.legacy_kernel.size() * model.legacy_kernel.size();
  }
  int count = 0;
  for (const auto& k : model.upsampler.l_kernels) count += static_cast<int>(k.half_taps.size());
  for (const auto& k : model.upsampler.h_kernels) count += static_cast<int>(k.half_taps.size());
  return count;
}

std::vector<Plane> synthesize_model_dense(const DecoderModel& model, const LatentPyramid& latents) {
  if (model.kind == UpsamplerKind::kSeparable) {
    return synthesize_dense(latents, model.upsampler, model.width, model.height);
  }
  return synthesize_dense_legacy(latents, model.legacy_kernel, model.width, model.height);
}

namespace {

LatentPyramid apply_latent_mode(const LatentPyramid& pyramid, LatentMode mode,
                                const LatentPyramid* noise) {
  LatentPyramid out;
  out.levels.reserve(pyramid.levels.size());
  switch (mode) {
    case LatentMode::kContinuous:
      out = pyramid;
      break;
    case LatentMode::kNoise:
      require(noise != nullptr && noise->level_count() == pyramid.level_count(),
              ErrorCode::kInvalidArgument, "noise pyramid required for noise mode");
      for (int n = 0; n < pyramid.level_count(); ++n) {
        out.levels.push_back(pyramid.levels[n] + noise->levels[n]);
      }
      break;
    case LatentMode::kRound:
      for (const Plane& level : pyramid.levels) out.levels.push_back(level.round());
      break;
  }
  return out;
}

struct SynthForward {
  LatentPyramid surrogate;
  std::vector<Plane> dense;
  Eigen::MatrixXd x;                        // L x P
  std::vector<Eigen::MatrixXd> pre;         // per layer pre-activation
  std::vector<Eigen::MatrixXd> post;        // per layer after ReLU (last = linear out)
  RgbImage image;
};

SynthForward run_forward(const DecoderModel& model, LatentMode mode, const LatentPyramid* noise) {
  validate_model(model);
  SynthForward f;
  f.surrogate = apply_latent_mode(model.pyramid, mode, noise);
  f.dense = synthesize_model_dense(model, f.surrogate);

  const int p = model.width * model.height;
  const int l = model.levels();
  f.x.resize(l, p);
  for (int n = 0; n < l; ++n) {
    f.x.row(n) = Eigen::Map<const Eigen::RowVectorXd>(f.dense[n].data(), p);
  }

  const SynthesisNet& net = model.synthesis;
  Eigen::MatrixXd act = f.x;
  const size_t layers = net.weights.size();
  for (size_t li = 0; li < layers; ++li) {
    Eigen::MatrixXd z = (net.weights[li] * act).colwise() + net.biases[li];
    f.pre.push_back(z);
    if (li + 1 < layers) {
      act = z.cwiseMax(0.0);  // ReLU
    } else {
      act = z;  // linear output layer
    }
    f.post.push_back(act);
  }

  f.image = make_image(model.width, model.height);
  const Eigen::MatrixXd& out = f.post.back();
  Plane* planes[3] = {&f.image.r, &f.image.g, &f.image.b};
  for (int ch = 0; ch < 3; ++ch) {
    Eigen::Map<Eigen::RowVectorXd>(planes[ch]->data(), p) =
        out.row(ch).cwiseMax(0.0).cwiseMin(1.0);
  }
  return f;
}

Eigen::MatrixXd target_matrix(const RgbImage& target) {
  const int p = target.width() * target.height();
  Eigen::MatrixXd t(3, p);
  t.row(0) = Eigen::Map<const Eigen::RowVectorXd>(target.r.data(), p);
  t.row(1) = Eigen::Map<const Eigen::RowVectorXd>(target.g.data(), p);
  t.row(2) = Eigen::Map<const Eigen::RowVectorXd>(target.b.data(), p);
  return t;
}

LossBreakdown assemble_loss(const DecoderModel& model, const SynthForward& f, const RgbImage& target,
                            double lambda) {
  require(target.width() == model.width && target.height() == model.height,
          ErrorCode::kDimensionMismatch, "target dimensions differ from model");
  LossBreakdown out;
  out.d_mse = mse(f.image, target);
  out.rate_bits_total = rate_bits(f.surrogate, model.rate);
  out.rate_bpp = out.rate_bits_total / (static_cast<double>(model.width) * model.height);
  out.j = out.d_mse + lambda * out.rate_bpp;
  return out;
}

}  // namespace

RgbImage decode_forward(const DecoderModel& model, bool quantized) {
  return run_forward(model, quantized ? LatentMode::kRound : LatentMode::kContinuous, nullptr).image;
}

LossBreakdown loss(const DecoderModel& model, const RgbImage& target, double lambda, LatentMode mode,
                   const LatentPyramid* noise) {
  const SynthForward f = run_forward(model, mode, noise);
  return assemble_loss(model, f, target, lambda);
}

ModelGradients backward(const DecoderModel& model, const RgbImage& target, double lambda,
                        LatentMode mode, const LatentPyramid* noise, const TrainMask& mask,
                        LossBreakdown* loss_out) {
  const SynthForward f = run_forward(model, mode, noise);
  if (loss_out != nullptr) *loss_out = assemble_loss(model, f, target, lambda);

  const int p = model.width * model.height;
  const size_t layers = model.synthesis.weights.size();

  ModelGradients grads;
  grads.pyramid.reserve(model.pyramid.levels.size());
  for (const Plane& level : model.pyramid.levels) {
    grads.pyramid.push_back(Plane::Zero(level.rows(), level.cols()));
  }
  for (const auto& k : model.upsampler.l_kernels) {
    grads.l_half_taps.push_back(Eigen::VectorXd::Zero(k.half_taps.size()));
  }
  for (const auto& k : model.upsampler.h_kernels) {
    grads.h_half_taps.push_back(Eigen::VectorXd::Zero(k.half_taps.size()));
  }
  if (model.kind == UpsamplerKind::kLegacy) {
    grads.legacy_taps = Eigen::MatrixXd::Zero(model.legacy_kernel.size(), model.legacy_kernel.size());
  }
  for (size_t li = 0; li < layers; ++li) {
    grads.weights.push_back(Eigen::MatrixXd::Zero(model.synthesis.weights[li].rows(),
                                                  model.synthesis.weights[li].cols()));
    grads.biases.push_back(Eigen::VectorXd::Zero(model.synthesis.biases[li].size()));
  }
  grads.log_scale = Eigen::VectorXd::Zero(model.rate.log_scale.size());

  // Distortion: D = ||clamp(out) - t||^2 / (3P). The clamp passes gradient on
  // the closed interval so optimization can leave a saturated boundary.
  const Eigen::MatrixXd t = target_matrix(target);
  const Eigen::MatrixXd& out_pre = f.pre.back();
  Eigen::MatrixXd g = (2.0 / (3.0 * p)) *
                      (out_pre.cwiseMax(0.0).cwiseMin(1.0) - t)
                          .cwiseProduct(((out_pre.array() >= 0.0) && (out_pre.array() <= 1.0))
                                            .cast<double>()
                                            .matrix());

  for (size_t li = layers; li-- > 0;) {
    const Eigen::MatrixXd& input = (li == 0) ? f.x : f.post[li - 1];
    grads.weights[li] = g * input.transpose();
    grads.biases[li] = g.rowwise().sum();
    if (li == 0) {
      g = model.synthesis.weights[0].transpose() * g;
    } else {
      g = (model.synthesis.weights[li].transpose() * g)
              .cwiseProduct((f.pre[li - 1].array() > 0.0).cast<double>().matrix());
    }
  }

  // g is now dJ/d(dense latents), shape L x P; route through the upsampler.
  std::vector<Plane> grad_dense;
  grad_dense.reserve(model.levels());
  for (int n = 0; n < model.levels(); ++n) {
    Plane gp(model.height, model.width);
    Eigen::Map<Eigen::RowVectorXd>(gp.data(), p) = g.row(n);
    grad_dense.push_back(std::move(gp));
  }

  DenseGradients dense_grads =
      model.kind == UpsamplerKind::kSeparable
          ? synthesize_dense_backward(f.surrogate, model.upsampler, model.width, model.height,
                                      grad_dense)
          : synthesize_dense_legacy_backward(f.surrogate, model.legacy_kernel, model.width,
                                             model.height, grad_dense);

  // Latent gradients pass through the surrogate as identity (noise is
  // additive; rounding uses the straight-through estimator).
  for (int n = 0; n < model.levels(); ++n) grads.pyramid[n] = std::move(dense_grads.pyramid[n]);
  grads.l_half_taps = std::move(dense_grads.l_half_taps);
  grads.h_half_taps = std::move(dense_grads.h_half_taps);
  if (model.kind == UpsamplerKind::kLegacy) grads.legacy_taps = std::move(dense_grads.legacy_taps);

  // Rate term: J += lambda * bits / (W*H), derivatives at the surrogate values.
  const double rate_weight = lambda / p;
  for (int n = 0; n < model.levels(); ++n) {
    const double b = model.rate.scale(n);
    const Plane& values = f.surrogate.levels[n];
    Plane& gp = grads.pyramid[n];
    double g_scale = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      const LaplaceBits lb = laplace_bits(values.data()[i], b);
      gp.data()[i] += rate_weight * lb.d_value;
      g_scale += lb.d_log_scale;
    }
    grads.log_scale[n] = rate_weight * g_scale;
  }

  if (!mask.latents) {
    for (Plane& gp : grads.pyramid) gp.setZero();
  }
  if (!mask.kernels) {
    for (auto& gk : grads.l_half_taps) gk.setZero();
    grads.legacy_taps.setZero();
  }
  if (!mask.prefilters) {
    for (auto& gk : grads.h_half_taps) gk.setZero();
  }
  if (!mask.synthesis) {
    for (auto& gw : grads.weights) gw.setZero();
    for (auto& gb : grads.biases) gb.setZero();
  }
  if (!mask.rate) grads.log_scale.setZero();
  return grads;
}

LatentPyramid draw_noise(const LatentPyramid& shape, std::uint64_t& rng_state) {
  LatentPyramid noise;
  noise.levels.reserve(shape.levels.size());
  for (const Plane& level : shape.levels) {
    Plane n(level.rows(), level.cols());
    for (Eigen::Index i = 0; i < n.size(); ++i) n.data()[i] = uniform01(rng_state) - 0.5;
    noise.levels.push_back(std::move(n));
  }
  return noise;
}

namespace {

struct ParamView {
  double* value;
  const double* grad;
  Eigen::Index size;
  bool latent;
};

std::vector<ParamView> collect_views(DecoderModel& model, const ModelGradients& grads,
                                     const TrainMask& mask) {
  std::vector<ParamView> views;
  if (mask.latents) {
    for (size_t n = 0; n < model.pyramid.levels.size(); ++n) {
      views.push_back({model.pyramid.levels[n].data(), grads.pyramid[n].data(),
                       model.pyramid.levels[n].size(), true});
    }
  }
  if (mask.kernels) {
    if (model.kind == UpsamplerKind::kSeparable) {
      for (size_t i = 0; i < model.upsampler.l_kernels.size(); ++i) {
        views.push_back({model.upsampler.l_kernels[i].half_taps.data(), grads.l_half_taps[i].data(),
                         model.upsampler.l_kernels[i].half_taps.size(), false});
      }
    } else {
      views.push_back({model.legacy_kernel.taps.data(), grads.legacy_taps.data(),
                       model.legacy_kernel.taps.size(), false});
    }
  }
  if (mask.prefilters && model.kind == UpsamplerKind::kSeparable) {
    for (size_t i = 0; i < model.upsampler.h_kernels.size(); ++i) {
      views.push_back({model.upsampler.h_kernels[i].half_taps.data(), grads.h_half_taps[i].data(),
                       model.upsampler.h_kernels[i].half_taps.size(), false});
    }
  }
  if (mask.synthesis) {
    for (size_t li = 0; li < model.synthesis.weights.size(); ++li) {
      views.push_back({model.synthesis.weights[li].data(), grads.weights[li].data(),
                       model.synthesis.weights[li].size(), false});
      views.push_back({model.synthesis.biases[li].data(), grads.biases[li].data(),
                       model.synthesis.biases[li].size(), false});
    }
  }
  if (mask.rate) {
    views.push_back({model.rate.log_scale.data(), grads.log_scale.data(),
                     model.rate.log_scale.size(), false});
  }
  return views;
}

}  // namespace

TrainResult train(DecoderModel model, const RgbImage& target, const TrainConfig& config) {
  validate_model(model);
  require(config.iterations >= 0, ErrorCode::kInvalidArgument, "iterations must be nonnegative");
  require(config.lambda >= 0.0, ErrorCode::kInvalidArgument, "lambda must be nonnegative");

  const int interval = config.checkpoint_interval > 0 ? config.checkpoint_interval
                                                      : std::max(1, config.iterations / 20);
  std::uint64_t rng = config.seed ^ 0x5eedull;

  auto evaluate = [&](const DecoderModel& m) {
    return loss(m, target, config.lambda, LatentMode::kRound);
  };

  TrainResult result;
  LossBreakdown best_eval = evaluate(model);
  DecoderModel best = model;
  result.trace.push_back({0, best_eval.j, best_eval.d_mse, best_eval.rate_bpp,
                          psnr_from_mse(best_eval.d_mse)});

  // Adam moments, one pair per optimized coefficient.
  std::vector<Eigen::VectorXd> m1, m2;
  bool moments_ready = false;
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const int noise_iters = static_cast<int>(std::llround(config.noise_fraction * config.iterations));

  for (int it = 0; it < config.iterations; ++it) {
    const LatentMode mode = it < noise_iters ? LatentMode::kNoise : LatentMode::kRound;
    LatentPyramid noise;
    if (mode == LatentMode::kNoise) noise = draw_noise(model.pyramid, rng);

    LossBreakdown lb;
    ModelGradients grads = backward(model, target, config.lambda, mode,
                                    mode == LatentMode::kNoise ? &noise : nullptr, config.mask, &lb);
    if (!std::isfinite(lb.j)) {
      std::ostringstream msg;
      msg << "training diverged at iteration " << it << ": J=" << lb.j << " D=" << lb.d_mse
          << " R_bpp=" << lb.rate_bpp;
      fail(ErrorCode::kNonFinite, msg.str());
    }

    std::vector<ParamView> views = collect_views(model, grads, config.mask);
    if (!moments_ready) {
      m1.resize(views.size());
      m2.resize(views.size());
      for (size_t v = 0; v < views.size(); ++v) {
        m1[v] = Eigen::VectorXd::Zero(views[v].size);
        m2[v] = Eigen::VectorXd::Zero(views[v].size);
      }
      moments_ready = true;
    }

    const double progress = config.iterations > 1 ? static_cast<double>(it) / (config.iterations - 1) : 1.0;
    const double cosine = 0.5 * (1.0 + std::cos(M_PI * progress));
    const double step = it + 1.0;
    const double bias1 = 1.0 - std::pow(beta1, step);
    const double bias2 = 1.0 - std::pow(beta2, step);
    for (size_t v = 0; v < views.size(); ++v) {
      const double lr0 = views[v].latent ? config.lr_latents : config.lr_params;
      const double lr = config.lr_floor + (lr0 - config.lr_floor) * cosine;
      double* value = views[v].value;
      const double* grad = views[v].grad;
      for (Eigen::Index i = 0; i < views[v].size; ++i) {
        double& mm = m1[v][i];
        double& vv = m2[v][i];
        mm = beta1 * mm + (1.0 - beta1) * grad[i];
        vv = beta2 * vv + (1.0 - beta2) * grad[i] * grad[i];
        value[i] -= lr * (mm / bias1) / (std::sqrt(vv / bias2) + eps);
      }
    }

    if ((it + 1) % interval == 0 || it + 1 == config.iterations) {
      const LossBreakdown ev = evaluate(model);
      if (ev.j < best_eval.j) {
        best_eval = ev;
        best = model;
      }
      result.trace.push_back({it + 1, best_eval.j, best_eval.d_mse, best_eval.rate_bpp,
                              psnr_from_mse(best_eval.d_mse)});
    }
  }

  result.model = std::move(best);
  for (Plane& level : result.model.pyramid.levels) level = level.round();
  result.final_loss = evaluate(result.model);
  return result;
}

void write_trace_csv(const std::vector<TraceRow>& trace, std::ostream& out) {
  out << "iteration,j,d_mse,psnr_db,rate_bpp\n";
  char line[160];
  for (const TraceRow& row : trace) {
    std::snprintf(line, sizeof(line), "%d,%.12g,%.12g,%.6f,%.12g\n", row.iteration, row.j, row.d_mse,
                  row.psnr_db, row.rate_bpp);
    out << line;
  }
}

}  // namespace pups
