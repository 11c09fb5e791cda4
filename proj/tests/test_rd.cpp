#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pups/experiment.hpp"
#include "pups/image.hpp"
#include "pups/rd.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

using namespace pups;

namespace {

RdCurve sample_curve() {
  return {{0.10, 30.0}, {0.28, 33.1}, {0.55, 35.9}, {0.95, 38.6}};
}

}  // namespace

TEST_CASE("bd_rate: self comparison is exactly zero") {
  const RdCurve c = sample_curve();
  CHECK(bd_rate_percent(c, c) == 0.0);
}

TEST_CASE("bd_rate: constant rate scaling gives the exact percentage") {
  const RdCurve anchor = sample_curve();
  RdCurve test = anchor;
  for (RdPoint& p : test) p.bpp *= 1.10;
  CHECK(bd_rate_percent(anchor, test) == doctest::Approx(10.0).epsilon(1e-6 / 10.0));

  RdCurve cheaper = anchor;
  for (RdPoint& p : cheaper) p.bpp *= 0.8;
  CHECK(bd_rate_percent(anchor, cheaper) < 0.0);  // bits saved, negative sign
}

TEST_CASE("bd_rate matches a dense numeric integration of the same interpolant") {
  const RdCurve anchor = sample_curve();
  const RdCurve test = {{0.09, 29.2}, {0.26, 33.4}, {0.51, 36.2}, {0.90, 39.1}};
  const double got = bd_rate_percent(anchor, test);

  auto spline_of = [](const RdCurve& curve) {
    std::vector<double> x, y;
    for (const RdPoint& p : curve) {
      x.push_back(p.psnr);
      y.push_back(std::log10(p.bpp));
    }
    return CubicSpline(x, y);
  };
  const CubicSpline sa = spline_of(anchor);
  const CubicSpline st = spline_of(test);
  const double lo = std::max(sa.x_front(), st.x_front());
  const double hi = std::min(sa.x_back(), st.x_back());
  const double ia = oracles::trapezoid([&](double t) { return sa(t); }, lo, hi, 100000);
  const double it = oracles::trapezoid([&](double t) { return st(t); }, lo, hi, 100000);
  const double oracle = (std::pow(10.0, (it - ia) / (hi - lo)) - 1.0) * 100.0;
  CHECK(std::abs(got - oracle) <= 0.01);
}

TEST_CASE("bd_rate input validation") {
  const RdCurve c = sample_curve();
  RdCurve three(c.begin(), c.begin() + 3);
  CHECK_THROWS_AS(bd_rate_percent(three, c), Error);

  RdCurve nonmono = c;
  std::swap(nonmono[1].bpp, nonmono[2].bpp);
  CHECK_THROWS_AS(bd_rate_percent(nonmono, c), Error);

  RdCurve negative = c;
  negative[0].bpp = -0.1;
  CHECK_THROWS_AS(bd_rate_percent(negative, c), Error);

  RdCurve far = c;
  for (RdPoint& p : far) p.psnr += 100.0;
  try {
    bd_rate_percent(c, far);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoOverlap);
  }
}

TEST_CASE("natural spline interpolates the knots") {
  const std::vector<double> x = {0.0, 1.0, 2.5, 4.0};
  const std::vector<double> y = {1.0, -0.5, 2.0, 0.25};
  const CubicSpline s(x, y);
  for (size_t i = 0; i < x.size(); ++i) CHECK(s(x[i]) == doctest::Approx(y[i]).epsilon(1e-12));
  // exact antiderivative equals dense numeric integration
  const double dense = oracles::trapezoid([&](double t) { return s(t); }, 0.0, 4.0, 200000);
  CHECK(s.integral(0.0, 4.0) == doctest::Approx(dense).epsilon(1e-8));
}

TEST_CASE("experiment presets form a duplicate-free grid") {
  std::set<std::tuple<bool, int, int, int, int>> seen;
  for (const std::string& name : preset_names()) {
    const ExperimentConfig c = preset(name);
    CHECK(seen.insert({c.legacy, c.n_l, c.k_l, c.n_h, c.k_h}).second);
  }
  const ExperimentConfig exp3b = preset("exp3b");
  CHECK(exp3b.n_l == 6);
  CHECK(exp3b.k_l == 8);
  CHECK(exp3b.n_h == 6);
  CHECK(exp3b.k_h == 7);
  CHECK_FALSE(exp3b.legacy);
  CHECK(preset("legacy4").legacy);
  CHECK_THROWS_AS(preset("exp9z"), Error);
}

TEST_CASE("experiment with too few lambdas reports an insufficient-points marker") {
  // iters=0 keeps this instant; a single lambda cannot form a 4-point curve.
  const std::string image_path = "/tmp/pups_rd_tiny.ppm";
  RgbImage img = make_image(8, 8);
  img.r.setConstant(0.5);
  img.g.setConstant(0.25);
  img.b.setConstant(0.75);
  write_ppm(img, image_path);

  ExperimentRunSpec spec;
  spec.images = {image_path};
  spec.lambdas = {0.004};
  spec.iterations = 0;
  spec.levels = 3;
  spec.jobs = 1;
  const ExperimentResult result = run_experiment(spec);
  REQUIRE(result.rows.size() == 2);
  CHECK_FALSE(result.partial);
  bool found_marker = false;
  for (const BdRow& row : result.bd_rows) {
    if (row.image == image_path) {
      CHECK_FALSE(row.valid);
      CHECK(row.note == "insufficient points");
      found_marker = true;
    }
  }
  CHECK(found_marker);

  std::ostringstream a, b;
  write_experiment_csv(result, a);
  write_experiment_csv(result, b);
  CHECK(a.str() == b.str());
  CHECK(a.str().find("insufficient points") != std::string::npos);
  CHECK(a.str().find("summary,,,,,,,,,,complete") != std::string::npos);
}

TEST_CASE("failed jobs are reported and mark the table partial") {
  const std::string image_path = "/tmp/pups_rd_tiny2.ppm";
  RgbImage img = make_image(8, 8);
  img.g.setConstant(0.5);
  write_ppm(img, image_path);

  ExperimentRunSpec spec;
  spec.images = {image_path};
  spec.lambdas = {0.004, -1.0};  // negative lambda makes that job throw
  spec.iterations = 1;
  spec.levels = 2;
  spec.jobs = 1;
  const ExperimentResult result = run_experiment(spec);
  CHECK(result.partial);
  int failed = 0;
  for (const JobResult& row : result.rows) failed += row.failed ? 1 : 0;
  CHECK(failed == 2);  // one per configuration

  std::ostringstream out;
  write_experiment_csv(result, out);
  CHECK(out.str().find("failed:") != std::string::npos);
  CHECK(out.str().find("summary,,,,,,,,,,partial") != std::string::npos);
}
