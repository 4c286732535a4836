#pragma once

// Power-law exponent fits for convergence curves.

#include <span>
#include <string>
#include <vector>

namespace stablab {

struct CurvePoint {
  double s = 0.0;
  double value = 0.0;
  double se = 0.0;
};

struct RateFit {
  double exponent = 0.0;
  double intercept = 0.0;  // log scale
  double se = 0.0;
  double r_squared = 0.0;
  /// Points actually used.
  std::vector<double> s_grid;
  std::vector<double> residuals;
  /// Points dropped by the noise-floor guard.
  std::vector<double> excluded_s;
};

/// Weighted least squares of log(value) on log(s), weights (value/se)^2
/// (uniform when any used se is 0). Points with value < 2 se are dropped.
/// Throws NumericError for non-positive values, fewer than 4 usable points,
/// or a grid that is not increasing with ratio >= 2.
RateFit fit_rate(std::span<const CurvePoint> curve);

struct RateRow {
  std::string id;
  double target = 0.0;
  double exponent = 0.0;
  double se = 0.0;
  double z = 0.0;
  bool pass = false;
};

/// pass iff |exponent - target| <= tolerance.
std::vector<RateRow> rate_report(std::span<const RateFit> fits, std::span<const double> targets,
                                 double tolerance, std::span<const std::string> ids = {});

}  // namespace stablab
