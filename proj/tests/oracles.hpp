// Test-side reference implementations, kept independent of the library's
// computation paths on purpose: brute-force convolutions, zero-insertion
// transpose convolution, direct DFTs, dense grid searches, finite differences.
#pragma once

#include "pups/common.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

// Deterministic, platform-independent test RNG.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  double uniform() { return (pups::splitmix64(state_) >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(pups::splitmix64(state_) % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::uint64_t state_;
};

inline pups::Plane random_plane(Rng& rng, int h, int w, double lo = -1.0, double hi = 1.0) {
  pups::Plane p(h, w);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform(lo, hi);
  return p;
}

// Same-size 2-D convolution with an arbitrary dense kernel and mirror
// extension; double loop over every tap.
inline pups::Plane conv2d_same(const pups::Plane& x, const Eigen::MatrixXd& kernel) {
  const int h = static_cast<int>(x.rows());
  const int w = static_cast<int>(x.cols());
  const int k = static_cast<int>(kernel.rows());
  const int c = (k - 1) / 2;
  pups::Plane y(h, w);
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
          acc += kernel(i, j) * x(pups::mirror_index(r + c - i, h), pups::mirror_index(col + c - j, w));
        }
      }
      y(r, col) = acc;
    }
  }
  return y;
}

// Stride-2 transpose convolution along one axis by literal zero insertion
// followed by a full convolution. Phase: y[m] = sum_i x_ext[i] t[m - 2i + phi],
// phi = K/2 - 1, x extended by mirroring.
inline std::vector<double> zero_insertion_upsample_1d(const std::vector<double>& x,
                                                      const Eigen::VectorXd& taps, int target) {
  const int n = static_cast<int>(x.size());
  const int k = static_cast<int>(taps.size());
  const int phi = k / 2 - 1;
  const int margin = k;  // enough mirrored context for every output
  std::vector<double> z(2 * (n + 2 * margin), 0.0);
  for (int i = -margin; i < n + margin; ++i) {
    z[2 * (i + margin)] = x[pups::mirror_index(i, n)];
  }
  std::vector<double> y(target, 0.0);
  for (int m = 0; m < target; ++m) {
    double acc = 0.0;
    for (int j = 0; j < static_cast<int>(z.size()); ++j) {
      const int t = m + 2 * margin + phi - j;
      if (t >= 0 && t < k) acc += z[j] * taps[t];
    }
    y[m] = acc;
  }
  return y;
}

// Separable 2-D version of the zero-insertion oracle (rows then columns).
inline pups::Plane zero_insertion_upsample_2d(const pups::Plane& x, const Eigen::VectorXd& taps,
                                              int target_w, int target_h) {
  const int h = static_cast<int>(x.rows());
  pups::Plane mid(h, target_w);
  for (int r = 0; r < h; ++r) {
    std::vector<double> row(x.cols());
    for (int c = 0; c < x.cols(); ++c) row[c] = x(r, c);
    const std::vector<double> up = zero_insertion_upsample_1d(row, taps, target_w);
    for (int c = 0; c < target_w; ++c) mid(r, c) = up[c];
  }
  pups::Plane y(target_h, target_w);
  for (int c = 0; c < target_w; ++c) {
    std::vector<double> col(mid.rows());
    for (int r = 0; r < mid.rows(); ++r) col[r] = mid(r, c);
    const std::vector<double> up = zero_insertion_upsample_1d(col, taps, target_h);
    for (int r = 0; r < target_h; ++r) y(r, c) = up[r];
  }
  return y;
}

// |sum_{k1,k2} T(k1,k2) e^{-j 2 pi (f1 k1 + f2 k2)}|, direct double loop.
inline double dft2d_magnitude(const Eigen::MatrixXd& kernel, double f1, double f2) {
  double re = 0.0, im = 0.0;
  for (int i = 0; i < kernel.rows(); ++i) {
    for (int j = 0; j < kernel.cols(); ++j) {
      const double phase = -2.0 * M_PI * (f1 * i + f2 * j);
      re += kernel(i, j) * std::cos(phase);
      im += kernel(i, j) * std::sin(phase);
    }
  }
  return std::hypot(re, im);
}

inline double dft1d_magnitude(const Eigen::VectorXd& taps, double f) {
  double re = 0.0, im = 0.0;
  for (int k = 0; k < taps.size(); ++k) {
    re += taps[k] * std::cos(-2.0 * M_PI * f * k);
    im += taps[k] * std::sin(-2.0 * M_PI * f * k);
  }
  return std::hypot(re, im);
}

// First crossing of the relative attenuation below level_db on a dense grid.
inline double dense_grid_cutoff(const Eigen::VectorXd& taps, double level_db, int points) {
  const double dc = std::abs(taps.sum());
  const double threshold = dc * std::pow(10.0, level_db / 20.0);
  for (int i = 1; i <= points; ++i) {
    const double f = 0.5 * i / points;
    if (dft1d_magnitude(taps, f) <= threshold) return f;
  }
  return 0.5;
}

// Central finite difference of a scalar function of one coordinate.
inline double central_difference(const std::function<double()>& eval, double* coordinate,
                                 double step = 1e-4) {
  const double saved = *coordinate;
  *coordinate = saved + step;
  const double plus = eval();
  *coordinate = saved - step;
  const double minus = eval();
  *coordinate = saved;
  return (plus - minus) / (2.0 * step);
}

// Laplace interval mass straight from the CDF, no log-domain rearrangement.
inline double laplace_mass_direct(double q, double b) {
  auto cdf = [b](double x) { return x < 0.0 ? 0.5 * std::exp(x / b) : 1.0 - 0.5 * std::exp(-x / b); };
  return cdf(q + 0.5) - cdf(q - 0.5);
}

inline double trapezoid(const std::function<double(double)>& f, double a, double b, int n) {
  double sum = 0.5 * (f(a) + f(b));
  for (int i = 1; i < n; ++i) sum += f(a + (b - a) * i / n);
  return sum * (b - a) / n;
}

}  // namespace oracles
