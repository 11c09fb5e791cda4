#include "pups/kernels.hpp"

#include <cmath>
#include <cstdio>

namespace pups {

SymmetricKernel1D make_symmetric_kernel(int length, Eigen::VectorXd half_taps) {
  require(length >= 1, ErrorCode::kInvalidArgument, "kernel length must be positive");
  require(half_taps.size() == half_tap_count(length), ErrorCode::kInvalidArgument,
          "expected ceil(K/2) half taps");
  return SymmetricKernel1D{length, std::move(half_taps)};
}

Eigen::VectorXd materialize(const SymmetricKernel1D& kernel) {
  const int k = kernel.length;
  require(kernel.half_taps.size() == half_tap_count(k), ErrorCode::kInvalidArgument,
          "kernel has wrong half-tap count");
  Eigen::VectorXd taps(k);
  for (int i = 0; i < half_tap_count(k); ++i) {
    taps[i] = kernel.half_taps[i];
    taps[k - 1 - i] = kernel.half_taps[i];
  }
  return taps;
}

Eigen::VectorXd fold_symmetric_gradient(const Eigen::VectorXd& full_grad) {
  const int k = static_cast<int>(full_grad.size());
  Eigen::VectorXd half(half_tap_count(k));
  for (int i = 0; i < half_tap_count(k); ++i) {
    half[i] = (i == k - 1 - i) ? full_grad[i] : full_grad[i] + full_grad[k - 1 - i];
  }
  return half;
}

SymmetricKernel1D dirac_kernel(int length) {
  require(length >= 1 && length % 2 == 1, ErrorCode::kInvalidArgument,
          "dirac kernel needs an odd length");
  Eigen::VectorXd half = Eigen::VectorXd::Zero(half_tap_count(length));
  half[half.size() - 1] = 1.0;
  return SymmetricKernel1D{length, std::move(half)};
}

SymmetricKernel1D bilinear_init(int length) {
  require(length == 4, ErrorCode::kInvalidArgument, "bilinear init is defined for K=4");
  Eigen::VectorXd half(2);
  half << 0.25, 0.75;
  return SymmetricKernel1D{4, std::move(half)};
}

namespace {

// Keys cubic convolution, a = -0.5.
double keys_cubic(double d) {
  const double x = std::abs(d);
  if (x <= 1.0) return (1.5 * x - 2.5) * x * x + 1.0;
  if (x < 2.0) return ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0;
  return 0.0;
}

}  // namespace

SymmetricKernel1D bicubic_init(int length) {
  require(length == 8, ErrorCode::kInvalidArgument, "bicubic init is defined for K=8");
  Eigen::VectorXd taps(8);
  for (int k = 0; k < 8; ++k) taps[k] = keys_cubic(0.5 * k - 1.75);
  // Normalize each polyphase branch to unit sum (exact already for these
  // dyadic offsets, kept as a guard for the DC-gain contract).
  double even = 0.0, odd = 0.0;
  for (int k = 0; k < 8; k += 2) even += taps[k];
  for (int k = 1; k < 8; k += 2) odd += taps[k];
  for (int k = 0; k < 8; k += 2) taps[k] /= even;
  for (int k = 1; k < 8; k += 2) taps[k] /= odd;
  Eigen::VectorXd half(4);
  for (int i = 0; i < 4; ++i) half[i] = taps[i];
  return SymmetricKernel1D{8, std::move(half)};
}

Kernel2D outer_product(const SymmetricKernel1D& kernel) {
  const Eigen::VectorXd t = materialize(kernel);
  return Kernel2D{t * t.transpose()};
}

double magnitude_1d(const Eigen::VectorXd& taps, double freq) {
  double re = 0.0, im = 0.0;
  for (int k = 0; k < taps.size(); ++k) {
    const double phase = -2.0 * M_PI * freq * k;
    re += taps[k] * std::cos(phase);
    im += taps[k] * std::sin(phase);
  }
  return std::hypot(re, im);
}

FrequencyResponse frequency_response(const SymmetricKernel1D& kernel, int grid_size) {
  require(grid_size >= 2, ErrorCode::kInvalidArgument, "frequency grid needs at least 2 points");
  const Eigen::VectorXd taps = materialize(kernel);
  FrequencyResponse fr;
  fr.freqs.resize(grid_size);
  Eigen::VectorXd mag(grid_size);
  for (int i = 0; i < grid_size; ++i) {
    fr.freqs[i] = 0.5 * i / (grid_size - 1);
    mag[i] = magnitude_1d(taps, fr.freqs[i]);
  }
  fr.magnitudes = mag * mag.transpose();
  return fr;
}

double cutoff_frequency(const SymmetricKernel1D& kernel, double level_db) {
  require(level_db < 0.0, ErrorCode::kInvalidArgument, "cutoff level must be below 0 dB");
  const Eigen::VectorXd taps = materialize(kernel);
  const double dc = std::abs(taps.sum());
  require(dc > 0.0, ErrorCode::kZeroDcGain, "cutoff undefined for zero DC gain");
  const double threshold = dc * std::pow(10.0, level_db / 20.0);

  // Learned responses need not be monotone; scan for the first crossing.
  const int kScan = 1024;
  double lo = 0.0, hi = -1.0;
  double prev = dc;
  for (int i = 1; i <= kScan; ++i) {
    const double f = 0.5 * i / kScan;
    const double m = magnitude_1d(taps, f);
    if (prev > threshold && m <= threshold) {
      lo = 0.5 * (i - 1) / kScan;
      hi = f;
      break;
    }
    prev = m;
  }
  if (hi < 0.0) return 0.5;
  for (int it = 0; it < 60 && hi - lo > 1e-9; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (magnitude_1d(taps, mid) <= threshold) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

long macs_nonseparable(int taps) {
  require(taps >= 1, ErrorCode::kInvalidArgument, "tap count must be positive");
  return std::lround(static_cast<double>(taps) * taps * kDyadicChainWeight);
}

long macs_separable(int taps) {
  require(taps >= 1, ErrorCode::kInvalidArgument, "tap count must be positive");
  return std::lround(3.0 * taps * kDyadicChainWeight);
}

void write_frequency_csv(const FrequencyResponse& response, std::ostream& out) {
  const int n = static_cast<int>(response.freqs.size());
  const double dc = response.magnitudes(0, 0);
  out << "f1,f2,mag_db\n";
  char line[128];
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double mag = response.magnitudes(i, j);
      double db;
      if (dc > 0.0) {
        db = mag > 0.0 ? 20.0 * std::log10(mag / dc) : -999.0;
      } else {
        db = mag > 0.0 ? 20.0 * std::log10(mag) : -999.0;
      }
      std::snprintf(line, sizeof(line), "%.6f,%.6f,%.6f\n", response.freqs[i], response.freqs[j], db);
      out << line;
    }
  }
}

}  // namespace pups
