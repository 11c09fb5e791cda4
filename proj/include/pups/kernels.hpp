#pragma once

#include "pups/common.hpp"

#include <ostream>

namespace pups {

// 1-D FIR filter with mirror-equal taps. Only the first ceil(K/2) taps are
// free parameters; materialize() reflects them into the full length-K array.
struct SymmetricKernel1D {
  int length = 0;
  Eigen::VectorXd half_taps;
};

inline int half_tap_count(int length) { return (length + 1) / 2; }

SymmetricKernel1D make_symmetric_kernel(int length, Eigen::VectorXd half_taps);

// Full tap array t with t[i] == t[K-1-i].
Eigen::VectorXd materialize(const SymmetricKernel1D& kernel);

// Folds a gradient w.r.t. full taps back onto the free half taps
// (mirror positions accumulate; an odd-length center contributes once).
Eigen::VectorXd fold_symmetric_gradient(const Eigen::VectorXd& full_grad);

// Identity filter of odd length: single 1 at the center.
SymmetricKernel1D dirac_kernel(int length);

// Stride-2 linear interpolator on the half-sample-offset grid; requires K=4.
// Taps [0.25, 0.75, 0.75, 0.25]; each polyphase branch sums to 1 (DC gain 2).
SymmetricKernel1D bilinear_init(int length);

// Keys cubic convolution kernel (a = -0.5) sampled at the stride-2 phase
// offsets {±0.25, ±0.75, ±1.25, ±1.75}, each branch normalized to sum 1;
// requires K=8.
SymmetricKernel1D bicubic_init(int length);

// Dense non-separable kernel; kept as the legacy baseline and as the
// materialization target (outer product) of separable kernels.
struct Kernel2D {
  Eigen::MatrixXd taps;  // K x K
  int size() const { return static_cast<int>(taps.rows()); }
};

Kernel2D outer_product(const SymmetricKernel1D& kernel);

// |l(f)| with l(f) = sum_k t[k] * exp(-j 2 pi f k).
double magnitude_1d(const Eigen::VectorXd& taps, double freq);

// Separable magnitude response |L(f1,f2)| = |l(f1)| * |l(f2)| on an N x N grid
// of normalized frequencies sampled uniformly over [0, 0.5].
struct FrequencyResponse {
  Eigen::VectorXd freqs;       // N grid frequencies
  Eigen::MatrixXd magnitudes;  // (f1 index, f2 index)
};

FrequencyResponse frequency_response(const SymmetricKernel1D& kernel, int grid_size);

// Smallest f in [0, 0.5] where 20*log10(|l(f)|/|l(0)|) first crosses level_db
// (coarse 1024-point scan, then bisection to 1e-6); 0.5 if never crossed.
double cutoff_frequency(const SymmetricKernel1D& kernel, double level_db);

// Weight of upsampled outputs per decoded pixel over the six-stage dyadic
// chain, fixed so the 4/8-tap figures come out to 30/121 and 23/45.
constexpr double kDyadicChainWeight = 1.890625;

// MAC per decoded pixel for a K x K non-separable upsampler (rounded).
long macs_nonseparable(int taps);

// MAC per decoded pixel for a length-K separable upsampler (rounded).
long macs_separable(int taps);

// CSV rows "f1,f2,mag_db" (attenuation relative to DC when DC gain is
// nonzero, raw dB otherwise).
void write_frequency_csv(const FrequencyResponse& response, std::ostream& out);

}  // namespace pups
