#include "stablab/ratelab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stablab/error.hpp"

namespace stablab {

RateFit fit_rate(std::span<const CurvePoint> curve) {
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (!(curve[i].s > 0.0)) throw NumericError("rate fit: s must be positive");
    if (!(curve[i].value > 0.0))
      throw NumericError("rate fit: non-positive value at s = " + std::to_string(curve[i].s) +
                         " (curve at the noise floor; raise the replication count)");
    if (i > 0 && !(curve[i].s >= 2.0 * curve[i - 1].s))
      throw NumericError("rate fit: s grid must increase by a factor of at least 2");
  }
  RateFit fit;
  std::vector<CurvePoint> used;
  for (const auto& p : curve) {
    if (p.value < 2.0 * p.se)
      fit.excluded_s.push_back(p.s);
    else
      used.push_back(p);
  }
  const std::size_t n = used.size();
  if (n < 4) throw NumericError("rate fit needs at least 4 points above the noise floor");

  const bool uniform =
      std::any_of(used.begin(), used.end(), [](const CurvePoint& p) { return p.se == 0.0; });
  std::vector<double> x(n), y(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::log(used[i].s);
    y[i] = std::log(used[i].value);
    w[i] = uniform ? 1.0 : (used[i].value / used[i].se) * (used[i].value / used[i].se);
    fit.s_grid.push_back(used[i].s);
  }
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
    syy += w[i] * (y[i] - my) * (y[i] - my);
  }
  fit.exponent = sxy / sxx;
  fit.intercept = my - fit.exponent * mx;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.exponent * x[i]);
    fit.residuals.push_back(r);
    chi2 += w[i] * r * r;
  }
  const double dof = static_cast<double>(n) - 2.0;
  // Inverse-variance weights: inflate by the reduced chi^2 when it exceeds 1.
  const double scale = uniform ? chi2 / dof : std::max(1.0, chi2 / dof);
  fit.se = std::sqrt(scale / sxx);
  fit.r_squared = syy > 0.0 ? 1.0 - chi2 / syy : 1.0;
  return fit;
}

std::vector<RateRow> rate_report(std::span<const RateFit> fits, std::span<const double> targets,
                                 double tolerance, std::span<const std::string> ids) {
  if (fits.size() != targets.size()) throw ConfigError("rate report: one target per fit");
  if (!ids.empty() && ids.size() != fits.size()) throw ConfigError("rate report: one id per fit");
  std::vector<RateRow> rows;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    RateRow r;
    r.id = ids.empty() ? "fit" + std::to_string(i) : ids[i];
    r.target = targets[i];
    r.exponent = fits[i].exponent;
    r.se = fits[i].se;
    const double diff = r.exponent - r.target;
    if (r.se > 0.0)
      r.z = diff / r.se;
    else
      r.z = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    r.pass = std::abs(diff) <= tolerance;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace stablab
