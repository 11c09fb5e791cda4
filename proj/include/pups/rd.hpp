#pragma once

#include "pups/common.hpp"

#include <vector>

namespace pups {

struct RdPoint {
  double bpp = 0.0;
  double psnr = 0.0;
};

// At least 4 points, positive strictly increasing rates, finite PSNRs.
using RdCurve = std::vector<RdPoint>;

void validate_curve(const RdCurve& curve);

// Natural cubic spline; exposed so tests can integrate the same interpolant
// numerically.
class CubicSpline {
 public:
  CubicSpline(std::vector<double> x, std::vector<double> y);
  double operator()(double t) const;
  double integral(double a, double b) const;
  double x_front() const { return x_.front(); }
  double x_back() const { return x_.back(); }

 private:
  std::vector<double> x_, y_, m_;  // m_: second derivatives (natural ends)
};

// Bjontegaard delta-rate: natural cubic spline of log10(rate) as a function
// of PSNR, averaged log-rate difference over the common PSNR interval,
// returned as (10^delta - 1) * 100. Negative means the test curve saves bits.
double bd_rate_percent(const RdCurve& anchor, const RdCurve& test);

}  // namespace pups
