#include "pups/rd.hpp"

#include <algorithm>
#include <cmath>

namespace pups {

void validate_curve(const RdCurve& curve) {
  require(curve.size() >= 4, ErrorCode::kInvalidArgument, "RD curve needs at least 4 points");
  for (size_t i = 0; i < curve.size(); ++i) {
    require(curve[i].bpp > 0.0 && std::isfinite(curve[i].bpp), ErrorCode::kInvalidArgument,
            "RD rates must be positive");
    require(std::isfinite(curve[i].psnr), ErrorCode::kInvalidArgument, "RD PSNR must be finite");
    if (i > 0) {
      require(curve[i].bpp > curve[i - 1].bpp, ErrorCode::kInvalidArgument,
              "RD rates must be strictly increasing");
    }
  }
}

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  const int n = static_cast<int>(x_.size());
  require(n >= 2 && y_.size() == x_.size(), ErrorCode::kInvalidArgument, "spline needs >= 2 points");
  for (int i = 1; i < n; ++i) {
    require(x_[i] > x_[i - 1], ErrorCode::kInvalidArgument, "spline abscissae must increase");
  }
  m_.assign(n, 0.0);
  if (n > 2) {
    // Thomas solve of the natural-spline tridiagonal system for M_1..M_{n-2}.
    const int k = n - 2;
    std::vector<double> diag(k), rhs(k), upper(k);
    for (int i = 0; i < k; ++i) {
      const double h0 = x_[i + 1] - x_[i];
      const double h1 = x_[i + 2] - x_[i + 1];
      diag[i] = 2.0 * (h0 + h1);
      upper[i] = h1;
      rhs[i] = 6.0 * ((y_[i + 2] - y_[i + 1]) / h1 - (y_[i + 1] - y_[i]) / h0);
    }
    for (int i = 1; i < k; ++i) {
      const double lower = x_[i + 1] - x_[i];
      const double w = lower / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    m_[k] = rhs[k - 1] / diag[k - 1];
    for (int i = k - 1; i >= 1; --i) {
      m_[i] = (rhs[i - 1] - upper[i - 1] * m_[i + 1]) / diag[i - 1];
    }
  }
}

double CubicSpline::operator()(double t) const {
  const int n = static_cast<int>(x_.size());
  int i = static_cast<int>(std::upper_bound(x_.begin(), x_.end(), t) - x_.begin()) - 1;
  i = std::max(0, std::min(n - 2, i));
  const double h = x_[i + 1] - x_[i];
  const double a = x_[i + 1] - t;
  const double b = t - x_[i];
  return m_[i] * a * a * a / (6.0 * h) + m_[i + 1] * b * b * b / (6.0 * h) +
         (y_[i] / h - m_[i] * h / 6.0) * a + (y_[i + 1] / h - m_[i + 1] * h / 6.0) * b;
}

double CubicSpline::integral(double a, double b) const {
  const int n = static_cast<int>(x_.size());
  require(a >= x_.front() - 1e-12 && b <= x_.back() + 1e-12 && a <= b, ErrorCode::kInvalidArgument,
          "integration bounds outside spline support");
  // Exact antiderivative of the piecewise cubic, segment by segment.
  auto segment_integral = [&](int i, double lo, double hi) {
    const double h = x_[i + 1] - x_[i];
    const double c0 = y_[i] / h - m_[i] * h / 6.0;
    const double c1 = y_[i + 1] / h - m_[i + 1] * h / 6.0;
    auto anti = [&](double t) {
      const double u = x_[i + 1] - t;
      const double v = t - x_[i];
      return -m_[i] * u * u * u * u / (24.0 * h) + m_[i + 1] * v * v * v * v / (24.0 * h) -
             c0 * u * u / 2.0 + c1 * v * v / 2.0;
    };
    return anti(hi) - anti(lo);
  };
  double total = 0.0;
  for (int i = 0; i < n - 1; ++i) {
    const double lo = std::max(a, x_[i]);
    const double hi = std::min(b, x_[i + 1]);
    if (hi > lo) total += segment_integral(i, lo, hi);
  }
  return total;
}

double bd_rate_percent(const RdCurve& anchor, const RdCurve& test) {
  validate_curve(anchor);
  validate_curve(test);
  auto to_spline = [](RdCurve curve) {
    std::sort(curve.begin(), curve.end(), [](const RdPoint& p, const RdPoint& q) { return p.psnr < q.psnr; });
    std::vector<double> x, y;
    for (const RdPoint& p : curve) {
      require(x.empty() || p.psnr > x.back(), ErrorCode::kInvalidArgument,
              "RD PSNRs must be distinct for interpolation");
      x.push_back(p.psnr);
      y.push_back(std::log10(p.bpp));
    }
    return CubicSpline(std::move(x), std::move(y));
  };
  const CubicSpline sa = to_spline(anchor);
  const CubicSpline st = to_spline(test);
  const double lo = std::max(sa.x_front(), st.x_front());
  const double hi = std::min(sa.x_back(), st.x_back());
  require(hi > lo, ErrorCode::kNoOverlap, "RD curves share no PSNR interval");
  const double delta = (st.integral(lo, hi) - sa.integral(lo, hi)) / (hi - lo);
  return (std::pow(10.0, delta) - 1.0) * 100.0;
}

}  // namespace pups
