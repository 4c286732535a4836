#pragma once

// Statistics <mu_s, f> = sum over points x in A of f(x) * score(x, X), and
// the first/second difference operators built on them.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stablab/scores.hpp"

namespace stablab {

/// Either the whole window or a sub-box of it. Sub-boxes use half-open
/// containment so that a partition of the window partitions the points.
struct RegionSpec {
  bool whole = true;
  Box box;

  static RegionSpec whole_window() { return {}; }
  static RegionSpec sub_box(Box b) { return {false, std::move(b)}; }

  bool contains(std::span<const double> x) const { return whole || box.contains_half_open(x); }
  Box resolve(const WindowSpec& w) const { return whole ? w.box : box; }
  double volume(const WindowSpec& w) const { return resolve(w).volume(); }
};

/// Intersection of two regions within a window; empty when volume is 0.
Box intersect_regions(const RegionSpec& a, const RegionSpec& b, const WindowSpec& w,
                      bool* empty);

struct TestFn {
  enum class Kind { constant, coordinate, affine, custom };
  Kind kind = Kind::constant;
  double c = 1.0;
  int axis = 0;
  double base = 0.0;
  std::vector<double> gradient;
  std::function<double(std::span<const double>)> fn;
  /// Declared Lipschitz constant (metadata only).
  double lipschitz = 0.0;

  static TestFn constant(double c);
  static TestFn coordinate(int axis);
  static TestFn affine(double base, std::vector<double> gradient);
  static TestFn custom(std::function<double(std::span<const double>)> f, double lipschitz);

  double operator()(std::span<const double> x) const;
  bool is_constant_one() const { return kind == Kind::constant && c == 1.0; }
};

struct StatisticSpec {
  std::string name;
  ScoreSpec score;
  RegionSpec region;
  TestFn testfn;

  /// Throws ConfigError/SpecError: region inside the window with positive
  /// volume, test function not identically zero, score parameters valid.
  void validate(const WindowSpec& window) const;
};

struct StatVector {
  std::vector<double> values;
  double s = 0.0;
  std::uint64_t seed = 0;
};

/// Per-point contributions f(x) * score(x, view) for every id of the view
/// (0 for points outside the region).
void contributions(ScoreContext& ctx, const StatisticSpec& spec, std::vector<double>& out,
                   int threads = 1);

double eval_statistic(const PointConfig& config, const StatisticSpec& spec, int threads = 1);
/// Evaluates all statistics on one shared index.
StatVector eval_vector(const PointConfig& config, std::span<const StatisticSpec> specs,
                       int threads = 1);
/// Same on an existing view (configuration plus extra points).
std::vector<double> eval_vector(const SpatialView& view, double s,
                                std::span<const StatisticSpec> specs, int threads = 1);

/// F(X + z) - F(X).
double diff1(const PointConfig& config, const StatisticSpec& spec, const MarkedPoint& z);
/// F(X + z1 + z2) - F(X + z1) - F(X + z2) + F(X), symmetric in (z1, z2)
/// bit for bit.
double diff2(const PointConfig& config, const StatisticSpec& spec, const MarkedPoint& z1,
             const MarkedPoint& z2);

struct DiffResult {
  double value = 0.0;
  /// Sum of absolute per-point terms; the scale for a "nonzero" decision.
  double magnitude = 0.0;
  bool nonzero() const;
};
DiffResult diff2_detail(const PointConfig& config, const StatisticSpec& spec,
                        const MarkedPoint& z1, const MarkedPoint& z2);
/// Same on a prebuilt index. Only points whose score can change are
/// re-evaluated (all points for unbounded influence, e.g. r = infinity).
DiffResult diff2_on_index(const GridIndex& index, double s, const StatisticSpec& spec,
                          const MarkedPoint& z1, const MarkedPoint& z2);

struct ProbeOptions {
  /// Color probabilities attached to each sample (colored scores only).
  std::vector<double> colors;
  /// Anchor; empty means the window center.
  std::vector<double> anchor;
  int threads = 1;
};

struct ProbeRow {
  double separation = 0.0;
  std::size_t nonzero = 0;
  std::size_t reps = 0;
  double estimate = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// Monte Carlo frequency of diff2(X, z, z + y e_1) != 0 for each separation
/// y, with the same samples shared across separations.
std::vector<ProbeRow> stab_probe(const StatisticSpec& spec, const WindowSpec& window, double s,
                                 std::span<const double> separations, std::size_t reps,
                                 std::uint64_t seed, const ProbeOptions& opts = {});

/// Wilson score interval for k successes out of n at normal quantile z.
void wilson_interval(std::size_t k, std::size_t n, double z, double& lo, double& hi);

}  // namespace stablab
