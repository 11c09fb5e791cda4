#include "pups/upsampler.hpp"

namespace pups {

LatentPyramid zero_pyramid(int width, int height, int levels) {
  require(width >= 1 && height >= 1, ErrorCode::kInvalidArgument, "pyramid dimensions must be positive");
  require(levels >= 1 && levels <= kMaxPyramidLevels, ErrorCode::kInvalidArgument,
          "pyramid must have between 1 and 7 levels");
  LatentPyramid p;
  p.levels.reserve(levels);
  for (int n = 0; n < levels; ++n) {
    p.levels.push_back(Plane::Zero(level_dim(height, n), level_dim(width, n)));
  }
  return p;
}

void validate_pyramid(const LatentPyramid& pyramid, int width, int height) {
  const int levels = pyramid.level_count();
  require(levels >= 1 && levels <= kMaxPyramidLevels, ErrorCode::kInvalidArgument,
          "pyramid must have between 1 and 7 levels");
  for (int n = 0; n < levels; ++n) {
    require(pyramid.levels[n].rows() == level_dim(height, n) &&
                pyramid.levels[n].cols() == level_dim(width, n),
            ErrorCode::kDimensionMismatch, "pyramid level has wrong dimensions");
  }
}

UpsamplerParams make_upsampler_params(int levels, int n_l, int k_l, int n_h, int k_h) {
  require(levels >= 1 && levels <= kMaxPyramidLevels, ErrorCode::kInvalidArgument, "bad level count");
  require(n_l >= 1 && n_l <= levels, ErrorCode::kInvalidArgument, "n_l must be in [1, L]");
  require(n_h >= 0 && n_h <= levels, ErrorCode::kInvalidArgument, "n_h must be in [0, L]");
  UpsamplerParams params;
  for (int i = 0; i < n_l; ++i) {
    params.l_kernels.push_back(k_l == 8 ? bicubic_init(8) : bilinear_init(k_l));
  }
  for (int i = 0; i < n_h; ++i) {
    params.h_kernels.push_back(dirac_kernel(k_h));
  }
  params.l_assign.resize(levels);
  for (int n = 0; n < levels; ++n) params.l_assign[n] = std::min(n, n_l - 1);
  if (n_h > 0) {
    params.h_assign.resize(levels);
    for (int n = 0; n < levels; ++n) params.h_assign[n] = std::min(n, n_h - 1);
  }
  return params;
}

void validate_upsampler_params(const UpsamplerParams& params, int levels) {
  const int n_l = static_cast<int>(params.l_kernels.size());
  require(n_l >= 1 && n_l <= levels, ErrorCode::kInvalidArgument, "need 1..L upsampling kernels");
  require(static_cast<int>(params.l_assign.size()) == levels, ErrorCode::kInvalidArgument,
          "l_assign must cover every level");
  for (int idx : params.l_assign) {
    require(idx >= 0 && idx < n_l, ErrorCode::kInvalidArgument, "l_assign index out of range");
  }
  for (const auto& k : params.l_kernels) {
    require(k.length % 2 == 0 && k.length >= 2, ErrorCode::kInvalidArgument,
            "upsampling kernels need an even length");
  }
  if (params.has_prefilter()) {
    const int n_h = static_cast<int>(params.h_kernels.size());
    require(n_h <= levels, ErrorCode::kInvalidArgument, "need at most L pre-filters");
    require(static_cast<int>(params.h_assign.size()) == levels, ErrorCode::kInvalidArgument,
            "h_assign must cover every level");
    for (int idx : params.h_assign) {
      require(idx >= 0 && idx < n_h, ErrorCode::kInvalidArgument, "h_assign index out of range");
    }
    for (const auto& k : params.h_kernels) {
      require(k.length % 2 == 1, ErrorCode::kInvalidArgument, "pre-filters need an odd length");
    }
  } else {
    require(params.h_assign.empty(), ErrorCode::kInvalidArgument,
            "h_assign must be empty without pre-filters");
  }
}

namespace {

// Horizontal same-size convolution with mirror extension.
Plane conv_rows(const Plane& x, const Eigen::VectorXd& taps) {
  const int h = static_cast<int>(x.rows());
  const int w = static_cast<int>(x.cols());
  const int k = static_cast<int>(taps.size());
  const int center = (k - 1) / 2;
  Plane y(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) {
        acc += taps[t] * x(r, mirror_index(c + center - t, w));
      }
      y(r, c) = acc;
    }
  }
  return y;
}

// Vertical pass; accumulates whole rows so the inner loop stays contiguous.
Plane conv_cols(const Plane& x, const Eigen::VectorXd& taps) {
  const int h = static_cast<int>(x.rows());
  const int k = static_cast<int>(taps.size());
  const int center = (k - 1) / 2;
  Plane y = Plane::Zero(h, x.cols());
  for (int r = 0; r < h; ++r) {
    for (int t = 0; t < k; ++t) {
      y.row(r) += taps[t] * x.row(mirror_index(r + center - t, h));
    }
  }
  return y;
}

void conv_rows_backward(const Plane& x, const Eigen::VectorXd& taps, const Plane& g, Plane& gx,
                        Eigen::VectorXd& gt) {
  const int h = static_cast<int>(x.rows());
  const int w = static_cast<int>(x.cols());
  const int k = static_cast<int>(taps.size());
  const int center = (k - 1) / 2;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double go = g(r, c);
      for (int t = 0; t < k; ++t) {
        const int src = mirror_index(c + center - t, w);
        gx(r, src) += taps[t] * go;
        gt[t] += x(r, src) * go;
      }
    }
  }
}

void conv_cols_backward(const Plane& x, const Eigen::VectorXd& taps, const Plane& g, Plane& gx,
                        Eigen::VectorXd& gt) {
  const int h = static_cast<int>(x.rows());
  const int k = static_cast<int>(taps.size());
  const int center = (k - 1) / 2;
  for (int r = 0; r < h; ++r) {
    for (int t = 0; t < k; ++t) {
      const int src = mirror_index(r + center - t, h);
      gx.row(src) += taps[t] * g.row(r);
      gt[t] += (x.row(src) * g.row(r)).sum();
    }
  }
}

// Stride-2 transpose convolution along one axis:
//   y[m] = sum_i x[i] * t[m - 2i + phi],  phi = K/2 - 1,
// evaluated per output over the taps of matching parity.
Plane upsample_rows_pass(const Plane& x, const Eigen::VectorXd& taps, int target_w) {
  const int h = static_cast<int>(x.rows());
  const int w = static_cast<int>(x.cols());
  const int k = static_cast<int>(taps.size());
  const int phi = k / 2 - 1;
  Plane y(h, target_w);
  for (int r = 0; r < h; ++r) {
    for (int m = 0; m < target_w; ++m) {
      double acc = 0.0;
      for (int t = (m + phi) & 1; t < k; t += 2) {
        acc += taps[t] * x(r, mirror_index((m + phi - t) / 2, w));
      }
      y(r, m) = acc;
    }
  }
  return y;
}

Plane upsample_cols_pass(const Plane& x, const Eigen::VectorXd& taps, int target_h) {
  const int h = static_cast<int>(x.rows());
  const int k = static_cast<int>(taps.size());
  const int phi = k / 2 - 1;
  Plane y = Plane::Zero(target_h, x.cols());
  for (int m = 0; m < target_h; ++m) {
    for (int t = (m + phi) & 1; t < k; t += 2) {
      y.row(m) += taps[t] * x.row(mirror_index((m + phi - t) / 2, h));
    }
  }
  return y;
}

void upsample_rows_backward(const Plane& x, const Eigen::VectorXd& taps, const Plane& g, Plane& gx,
                            Eigen::VectorXd& gt) {
  const int h = static_cast<int>(x.rows());
  const int w = static_cast<int>(x.cols());
  const int k = static_cast<int>(taps.size());
  const int phi = k / 2 - 1;
  const int target_w = static_cast<int>(g.cols());
  for (int r = 0; r < h; ++r) {
    for (int m = 0; m < target_w; ++m) {
      const double go = g(r, m);
      for (int t = (m + phi) & 1; t < k; t += 2) {
        const int src = mirror_index((m + phi - t) / 2, w);
        gx(r, src) += taps[t] * go;
        gt[t] += x(r, src) * go;
      }
    }
  }
}

void upsample_cols_backward(const Plane& x, const Eigen::VectorXd& taps, const Plane& g, Plane& gx,
                            Eigen::VectorXd& gt) {
  const int h = static_cast<int>(x.rows());
  const int k = static_cast<int>(taps.size());
  const int phi = k / 2 - 1;
  const int target_h = static_cast<int>(g.rows());
  for (int m = 0; m < target_h; ++m) {
    for (int t = (m + phi) & 1; t < k; t += 2) {
      const int src = mirror_index((m + phi - t) / 2, h);
      gx.row(src) += taps[t] * g.row(m);
      gt[t] += (x.row(src) * g.row(m)).sum();
    }
  }
}

void check_target_dims(const Plane& input, int target_w, int target_h) {
  const int w = static_cast<int>(input.cols());
  const int h = static_cast<int>(input.rows());
  require(target_w == 2 * w || target_w == 2 * w - 1, ErrorCode::kInvalidArgument,
          "target width must be 2w or 2w-1");
  require(target_h == 2 * h || target_h == 2 * h - 1, ErrorCode::kInvalidArgument,
          "target height must be 2h or 2h-1");
}

}  // namespace

Plane prefilter(const Plane& input, const SymmetricKernel1D& h) {
  require(h.length % 2 == 1, ErrorCode::kInvalidArgument, "pre-filter length must be odd");
  const Eigen::VectorXd taps = materialize(h);
  return conv_cols(conv_rows(input, taps), taps);
}

void prefilter_backward(const Plane& input, const SymmetricKernel1D& h, const Plane& grad_output,
                        Plane& grad_input, Eigen::VectorXd& grad_taps) {
  const Eigen::VectorXd taps = materialize(h);
  const Plane mid = conv_rows(input, taps);
  Plane grad_mid = Plane::Zero(mid.rows(), mid.cols());
  conv_cols_backward(mid, taps, grad_output, grad_mid, grad_taps);
  conv_rows_backward(input, taps, grad_mid, grad_input, grad_taps);
}

Plane upsample2x(const Plane& input, const SymmetricKernel1D& l, int target_w, int target_h) {
  require(l.length % 2 == 0 && l.length >= 2, ErrorCode::kInvalidArgument,
          "upsampling kernel length must be even");
  check_target_dims(input, target_w, target_h);
  const Eigen::VectorXd taps = materialize(l);
  return upsample_cols_pass(upsample_rows_pass(input, taps, target_w), taps, target_h);
}

void upsample2x_backward(const Plane& input, const SymmetricKernel1D& l, const Plane& grad_output,
                         Plane& grad_input, Eigen::VectorXd& grad_taps) {
  const Eigen::VectorXd taps = materialize(l);
  const int target_w = static_cast<int>(grad_output.cols());
  const Plane mid = upsample_rows_pass(input, taps, target_w);
  Plane grad_mid = Plane::Zero(mid.rows(), mid.cols());
  upsample_cols_backward(mid, taps, grad_output, grad_mid, grad_taps);
  upsample_rows_backward(input, taps, grad_mid, grad_input, grad_taps);
}

std::vector<Plane> synthesize_dense(const LatentPyramid& pyramid, const UpsamplerParams& params,
                                    int width, int height) {
  validate_pyramid(pyramid, width, height);
  validate_upsampler_params(params, pyramid.level_count());
  std::vector<Plane> dense;
  dense.reserve(pyramid.levels.size());
  for (int n = 0; n < pyramid.level_count(); ++n) {
    Plane p = params.has_prefilter() ? prefilter(pyramid.levels[n], params.h_kernels[params.h_assign[n]])
                                     : pyramid.levels[n];
    for (int step = n; step >= 1; --step) {
      p = upsample2x(p, params.l_kernels[params.l_assign[n]], level_dim(width, step - 1),
                     level_dim(height, step - 1));
    }
    dense.push_back(std::move(p));
  }
  return dense;
}

Plane upsample2x_legacy(const Plane& input, const Kernel2D& kernel, int target_w, int target_h) {
  const int k = kernel.size();
  require(k % 2 == 0 && k >= 2, ErrorCode::kInvalidArgument, "legacy kernel size must be even");
  check_target_dims(input, target_w, target_h);
  const int h = static_cast<int>(input.rows());
  const int w = static_cast<int>(input.cols());
  const int phi = k / 2 - 1;
  Plane y(target_h, target_w);
  for (int m1 = 0; m1 < target_h; ++m1) {
    for (int m2 = 0; m2 < target_w; ++m2) {
      double acc = 0.0;
      for (int t1 = (m1 + phi) & 1; t1 < k; t1 += 2) {
        const int r = mirror_index((m1 + phi - t1) / 2, h);
        for (int t2 = (m2 + phi) & 1; t2 < k; t2 += 2) {
          acc += kernel.taps(t1, t2) * input(r, mirror_index((m2 + phi - t2) / 2, w));
        }
      }
      y(m1, m2) = acc;
    }
  }
  return y;
}

void upsample2x_legacy_backward(const Plane& input, const Kernel2D& kernel, const Plane& grad_output,
                                Plane& grad_input, Eigen::MatrixXd& grad_taps) {
  const int k = kernel.size();
  const int h = static_cast<int>(input.rows());
  const int w = static_cast<int>(input.cols());
  const int phi = k / 2 - 1;
  for (int m1 = 0; m1 < grad_output.rows(); ++m1) {
    for (int m2 = 0; m2 < grad_output.cols(); ++m2) {
      const double go = grad_output(m1, m2);
      for (int t1 = (m1 + phi) & 1; t1 < k; t1 += 2) {
        const int r = mirror_index((m1 + phi - t1) / 2, h);
        for (int t2 = (m2 + phi) & 1; t2 < k; t2 += 2) {
          const int c = mirror_index((m2 + phi - t2) / 2, w);
          grad_input(r, c) += kernel.taps(t1, t2) * go;
          grad_taps(t1, t2) += input(r, c) * go;
        }
      }
    }
  }
}

std::vector<Plane> synthesize_dense_legacy(const LatentPyramid& pyramid, const Kernel2D& kernel,
                                           int width, int height) {
  validate_pyramid(pyramid, width, height);
  std::vector<Plane> dense;
  dense.reserve(pyramid.levels.size());
  for (int n = 0; n < pyramid.level_count(); ++n) {
    Plane p = pyramid.levels[n];
    for (int step = n; step >= 1; --step) {
      p = upsample2x_legacy(p, kernel, level_dim(width, step - 1), level_dim(height, step - 1));
    }
    dense.push_back(std::move(p));
  }
  return dense;
}

double count_macs(int width, int height, int levels, const UpsamplerParams& params) {
  require(width >= 1 && height >= 1 && levels >= 1, ErrorCode::kInvalidArgument, "bad shape");
  double total = 0.0;
  for (int n = 0; n < levels; ++n) {
    const double wn = level_dim(width, n);
    const double hn = level_dim(height, n);
    if (params.has_prefilter()) {
      total += 2.0 * params.h_kernels[params.h_assign[n]].length * wn * hn;
    }
    const int k = params.l_kernels[params.l_assign[n]].length;
    for (int step = n; step >= 1; --step) {
      const double tw = level_dim(width, step - 1);
      const double th = level_dim(height, step - 1);
      total += (k / 2) * (level_dim(height, step) * tw);  // horizontal pass
      total += (k / 2) * (tw * th);                       // vertical pass
    }
  }
  return total / (static_cast<double>(width) * height);
}

double count_macs_legacy(int width, int height, int levels, int kernel_size) {
  require(width >= 1 && height >= 1 && levels >= 1, ErrorCode::kInvalidArgument, "bad shape");
  const double taps_per_output = (kernel_size / 2) * (kernel_size / 2);
  double total = 0.0;
  for (int n = 0; n < levels; ++n) {
    for (int step = n; step >= 1; --step) {
      total += taps_per_output * (level_dim(width, step - 1) * static_cast<double>(level_dim(height, step - 1)));
    }
  }
  return total / (static_cast<double>(width) * height);
}

namespace {

DenseGradients init_gradients(const LatentPyramid& pyramid, const UpsamplerParams* params,
                              const Kernel2D* legacy) {
  DenseGradients g;
  g.pyramid.reserve(pyramid.levels.size());
  for (const Plane& level : pyramid.levels) {
    g.pyramid.push_back(Plane::Zero(level.rows(), level.cols()));
  }
  if (params != nullptr) {
    for (const auto& k : params->l_kernels) g.l_half_taps.push_back(Eigen::VectorXd::Zero(k.half_taps.size()));
    for (const auto& k : params->h_kernels) g.h_half_taps.push_back(Eigen::VectorXd::Zero(k.half_taps.size()));
  }
  if (legacy != nullptr) {
    g.legacy_taps = Eigen::MatrixXd::Zero(legacy->size(), legacy->size());
  }
  return g;
}

}  // namespace

DenseGradients synthesize_dense_backward(const LatentPyramid& pyramid, const UpsamplerParams& params,
                                         int width, int height,
                                         const std::vector<Plane>& grad_dense) {
  validate_pyramid(pyramid, width, height);
  validate_upsampler_params(params, pyramid.level_count());
  require(static_cast<int>(grad_dense.size()) == pyramid.level_count(), ErrorCode::kDimensionMismatch,
          "gradient plane count mismatch");
  DenseGradients grads = init_gradients(pyramid, &params, nullptr);

  for (int n = 0; n < pyramid.level_count(); ++n) {
    // Recompute the per-level chain of intermediates.
    std::vector<Plane> chain;
    Plane p = params.has_prefilter() ? prefilter(pyramid.levels[n], params.h_kernels[params.h_assign[n]])
                                     : pyramid.levels[n];
    chain.push_back(p);
    for (int step = n; step >= 1; --step) {
      p = upsample2x(p, params.l_kernels[params.l_assign[n]], level_dim(width, step - 1),
                     level_dim(height, step - 1));
      chain.push_back(p);
    }

    const SymmetricKernel1D& l = params.l_kernels[params.l_assign[n]];
    Eigen::VectorXd l_grad_full = Eigen::VectorXd::Zero(l.length);
    Plane g = grad_dense[n];
    for (int step = 1; step <= n; ++step) {
      const Plane& src = chain[n - step];
      Plane gx = Plane::Zero(src.rows(), src.cols());
      upsample2x_backward(src, l, g, gx, l_grad_full);
      g = std::move(gx);
    }
    if (n >= 1) {
      grads.l_half_taps[params.l_assign[n]] += fold_symmetric_gradient(l_grad_full);
    }
    if (params.has_prefilter()) {
      const SymmetricKernel1D& hk = params.h_kernels[params.h_assign[n]];
      Eigen::VectorXd h_grad_full = Eigen::VectorXd::Zero(hk.length);
      Plane gx = Plane::Zero(pyramid.levels[n].rows(), pyramid.levels[n].cols());
      prefilter_backward(pyramid.levels[n], hk, g, gx, h_grad_full);
      grads.pyramid[n] += gx;
      grads.h_half_taps[params.h_assign[n]] += fold_symmetric_gradient(h_grad_full);
    } else {
      grads.pyramid[n] += g;
    }
  }
  return grads;
}

DenseGradients synthesize_dense_legacy_backward(const LatentPyramid& pyramid, const Kernel2D& kernel,
                                                int width, int height,
                                                const std::vector<Plane>& grad_dense) {
  validate_pyramid(pyramid, width, height);
  require(static_cast<int>(grad_dense.size()) == pyramid.level_count(), ErrorCode::kDimensionMismatch,
          "gradient plane count mismatch");
  DenseGradients grads = init_gradients(pyramid, nullptr, &kernel);

  for (int n = 0; n < pyramid.level_count(); ++n) {
    std::vector<Plane> chain;
    Plane p = pyramid.levels[n];
    chain.push_back(p);
    for (int step = n; step >= 1; --step) {
      p = upsample2x_legacy(p, kernel, level_dim(width, step - 1), level_dim(height, step - 1));
      chain.push_back(p);
    }
    Plane g = grad_dense[n];
    for (int step = 1; step <= n; ++step) {
      const Plane& src = chain[n - step];
      Plane gx = Plane::Zero(src.rows(), src.cols());
      upsample2x_legacy_backward(src, kernel, g, gx, grads.legacy_taps);
      g = std::move(gx);
    }
    grads.pyramid[n] += g;
  }
  return grads;
}

}  // namespace pups
