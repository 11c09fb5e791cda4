#pragma once

#include "pups/common.hpp"
#include "pups/kernels.hpp"

#include <vector>

namespace pups {

// Quantizable feature planes at dyadic resolutions; level n has dimensions
// (ceil(W/2^n), ceil(H/2^n)) and level 0 matches the image resolution.
struct LatentPyramid {
  std::vector<Plane> levels;
  int level_count() const { return static_cast<int>(levels.size()); }
};

constexpr int kMaxPyramidLevels = 7;

inline int level_dim(int full, int level) { return (full + (1 << level) - 1) >> level; }

LatentPyramid zero_pyramid(int width, int height, int levels);
void validate_pyramid(const LatentPyramid& pyramid, int width, int height);

// Per-level pre-filters H (odd length) and stride-2 interpolators L (even
// length) plus the level -> kernel assignment. An empty h_kernels array means
// the pre-filter branch is absent.
struct UpsamplerParams {
  std::vector<SymmetricKernel1D> l_kernels;
  std::vector<SymmetricKernel1D> h_kernels;
  std::vector<int> l_assign;  // one entry per pyramid level
  std::vector<int> h_assign;  // empty iff h_kernels is empty

  bool has_prefilter() const { return !h_kernels.empty(); }
};

// Default construction: n_l copies of the bilinear (K=4) or bicubic (K=8)
// init, n_h Dirac pre-filters (n_h == 0 disables the branch), and the
// canonical assignment level n -> kernel min(n, count-1).
UpsamplerParams make_upsampler_params(int levels, int n_l, int k_l, int n_h, int k_h);

void validate_upsampler_params(const UpsamplerParams& params, int levels);

// Separable 2-D convolution (horizontal then vertical with the same 1-D
// kernel), same output size, mirror boundary extension. h must have odd length.
Plane prefilter(const Plane& input, const SymmetricKernel1D& h);

// Stride-2 transpose convolution via polyphase branches (even/odd phase
// filters of length K/2 per axis). Output sample 2i aligns with the even
// branch; the target may crop the trailing row/column (odd target size).
// target dims must lie in {2*dim-1, 2*dim}. l must have even length.
Plane upsample2x(const Plane& input, const SymmetricKernel1D& l, int target_w, int target_h);

// Per level: pre-filter at native resolution with the assigned H kernel, then
// upsample n times with the assigned L kernel. Level 0 receives only its
// pre-filter. Output: L planes at image resolution.
std::vector<Plane> synthesize_dense(const LatentPyramid& pyramid, const UpsamplerParams& params,
                                    int width, int height);

// Legacy baseline: one dense K x K kernel shared by all levels, no pre-filter.
Plane upsample2x_legacy(const Plane& input, const Kernel2D& kernel, int target_w, int target_h);
std::vector<Plane> synthesize_dense_legacy(const LatentPyramid& pyramid, const Kernel2D& kernel,
                                           int width, int height);

// Multiply-accumulates actually executed by synthesize_dense, per decoded
// pixel. Pure accounting over shapes; cross-checks the closed-form figures
// without being forced to agree with them.
double count_macs(int width, int height, int levels, const UpsamplerParams& params);
double count_macs_legacy(int width, int height, int levels, int kernel_size);

// --- adjoints -------------------------------------------------------------
// Each backward accumulates into grad_input / grad_taps (taps gradients are
// w.r.t. the full materialized tap array; fold with fold_symmetric_gradient).

void prefilter_backward(const Plane& input, const SymmetricKernel1D& h, const Plane& grad_output,
                        Plane& grad_input, Eigen::VectorXd& grad_taps);

void upsample2x_backward(const Plane& input, const SymmetricKernel1D& l, const Plane& grad_output,
                         Plane& grad_input, Eigen::VectorXd& grad_taps);

void upsample2x_legacy_backward(const Plane& input, const Kernel2D& kernel, const Plane& grad_output,
                                Plane& grad_input, Eigen::MatrixXd& grad_taps);

struct DenseGradients {
  std::vector<Plane> pyramid;                 // per level
  std::vector<Eigen::VectorXd> l_half_taps;   // per L kernel
  std::vector<Eigen::VectorXd> h_half_taps;   // per H kernel
  Eigen::MatrixXd legacy_taps;                // legacy path only
};

DenseGradients synthesize_dense_backward(const LatentPyramid& pyramid, const UpsamplerParams& params,
                                         int width, int height,
                                         const std::vector<Plane>& grad_dense);

DenseGradients synthesize_dense_legacy_backward(const LatentPyramid& pyramid, const Kernel2D& kernel,
                                                int width, int height,
                                                const std::vector<Plane>& grad_dense);

}  // namespace pups
