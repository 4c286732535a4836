#include <doctest.h>

#include <cmath>
#include <limits>

#include "stablab/covlab.hpp"
#include "stablab/error.hpp"
#include "stablab/ratelab.hpp"

using namespace stablab;

namespace {

std::vector<CurvePoint> power_law(double c, double e, double s0, int n, double ratio = 2.0) {
  std::vector<CurvePoint> out;
  double s = s0;
  for (int i = 0; i < n; ++i, s *= ratio) out.push_back({s, c * std::pow(s, e), 0.0});
  return out;
}

std::vector<CurvePoint> exact_gap_curve(int d) {
  std::vector<CurvePoint> out;
  for (int k = 8; k <= 18; ++k) {
    const double s = std::ldexp(1.0, k);
    const RggExact e = rgg_cov_exact(d, 1.0, s);
    out.push_back({s, e.gap, e.error_bound});
  }
  return out;
}

}  // namespace

TEST_CASE("pure power laws are fitted exactly") {
  const RateFit f = fit_rate(power_law(3.0, -0.5, 100.0, 6));
  CHECK(std::abs(f.exponent + 0.5) < 1e-12);
  CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(f.r_squared == doctest::Approx(1.0));
  CHECK(f.s_grid.size() == 6);
  CHECK(f.excluded_s.empty());
  for (double r : f.residuals) CHECK(std::abs(r) < 1e-12);
}

TEST_CASE("fits with a correction term approach the leading exponent") {
  auto curve = [](double s0) {
    std::vector<CurvePoint> c;
    for (double s = s0; c.size() < 6; s *= 4)
      c.push_back({s, 2.0 * std::cbrt(1 / s) * (1 + std::cbrt(1 / s)), 0.0});
    return c;
  };
  const double e1 = fit_rate(curve(8.0)).exponent;
  const double e2 = fit_rate(curve(8.0 * 4096)).exponent;
  CHECK(e1 > -0.5);
  CHECK(e1 < -1.0 / 3);
  CHECK(e2 > e1);
  CHECK(std::abs(e2 + 1.0 / 3) < std::abs(e1 + 1.0 / 3));
}

TEST_CASE("scaling values or standard errors leaves the exponent unchanged") {
  std::vector<CurvePoint> c = power_law(1.0, -0.4, 10.0, 6);
  const double noise[] = {0.03, -0.02, 0.01, 0.04, -0.03, 0.0};
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i].value *= std::exp(noise[i]);
    c[i].se = 0.05 * c[i].value;
  }
  const RateFit base = fit_rate(c);
  auto scaled = c;
  for (auto& p : scaled) {
    p.value *= 7.0;
    p.se *= 7.0;
  }
  CHECK(fit_rate(scaled).exponent == doctest::Approx(base.exponent).epsilon(1e-12));
  auto doubled = c;
  for (auto& p : doubled) p.se *= 2.0;
  CHECK(fit_rate(doubled).exponent == doctest::Approx(base.exponent).epsilon(1e-12));
  CHECK(base.se > 0.0);
}

TEST_CASE("noise-floor guard and input errors") {
  auto c = power_law(1.0, -0.5, 10.0, 6);
  for (auto& p : c) p.se = 0.01 * p.value;
  c[5].se = c[5].value;  // value < 2 se
  const RateFit f = fit_rate(c);
  CHECK(f.excluded_s == std::vector<double>{c[5].s});
  CHECK(f.s_grid.size() == 5);

  auto neg = power_law(1.0, -0.5, 10.0, 5);
  neg[2].value = -1e-3;
  CHECK_THROWS_AS(fit_rate(neg), NumericError);
  CHECK_THROWS_AS(fit_rate(power_law(1.0, -0.5, 10.0, 3)), NumericError);
  CHECK_THROWS_AS(fit_rate(power_law(1.0, -0.5, 10.0, 6, 1.5)), NumericError);
  auto floor = power_law(1.0, -0.5, 10.0, 5);
  for (auto& p : floor) p.se = p.value;
  CHECK_THROWS_AS(fit_rate(floor), NumericError);
}

TEST_CASE("exact RGG gap curves decay at the dimension rate") {
  const RateFit d2 = fit_rate(exact_gap_curve(2));
  CHECK(std::abs(d2.exponent + 0.5) < 0.05);
  const RateFit d3 = fit_rate(exact_gap_curve(3));
  CHECK(std::abs(d3.exponent + 1.0 / 3) < 0.05);
}

TEST_CASE("rate report") {
  RateFit half;
  half.exponent = -0.5;
  half.se = 0.01;
  RateFit off;
  off.exponent = -0.49;
  off.se = 0.02;
  const std::vector<RateFit> fits{half, off};
  const std::vector<double> targets{-0.5, -1.0 / 3};
  const std::vector<std::string> ids{"gap", "dk"};
  const auto rows = rate_report(fits, targets, 0.1, ids);
  CHECK(rows[0].pass);
  CHECK(rows[0].z == 0.0);
  CHECK(rows[0].id == "gap");
  CHECK_FALSE(rows[1].pass);
  CHECK(rows[1].z == doctest::Approx((-0.49 + 1.0 / 3) / 0.02));

  RateFit exact;
  exact.exponent = -0.4;
  const std::vector<RateFit> one{exact};
  const std::vector<double> t{-0.5};
  CHECK(rate_report(one, t, 0.2)[0].z == std::numeric_limits<double>::infinity());
  CHECK(rate_report(one, t, 0.2)[0].id == "fit0");
  CHECK_THROWS_AS(rate_report(one, targets, 0.1), ConfigError);
}
