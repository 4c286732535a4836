#pragma once

// Covariance machinery: replication batches, empirical Sigma(s), the
// asymptotic covariance estimator, and exact results for the RGG
// vertex/edge pair.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "stablab/functionals.hpp"

namespace stablab {

/// Dense row-major matrix; small sizes only.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// R replications of an m-vector of statistics at one intensity.
struct ReplicationBatch {
  double s = 0.0;
  std::vector<std::string> names;
  Matrix values;  // R x m
  std::vector<std::uint64_t> seeds;
  double wall_seconds = 0.0;

  std::size_t reps() const { return values.rows; }
  std::size_t dim() const { return values.cols; }
};

enum class CovKind { empirical_sigma_s, asymptotic_sigma, closed_form, exact_quadrature };
const char* cov_kind_name(CovKind k);

struct CovEstimate {
  Matrix matrix;
  Matrix se;
  std::size_t n_samples = 0;
  CovKind kind = CovKind::empirical_sigma_s;
  /// Provenance (w, y_max, truncation budgets, seeds...).
  std::map<std::string, double> meta;

  std::size_t dim() const { return matrix.rows; }
};

struct ReplicateOptions {
  std::vector<double> colors;
  int threads = 1;
};

/// Row r uses the point stream derive_seed(master, s, r, points) (stored in
/// seeds) and the mark stream derive_seed(master, s, r, marks).
ReplicationBatch replicate(const WindowSpec& window, std::span<const StatisticSpec> specs,
                           double s, std::size_t reps, std::uint64_t master_seed,
                           const ReplicateOptions& opts = {});
/// Serial reference path of replicate().
ReplicationBatch replicate_serial(const WindowSpec& window, std::span<const StatisticSpec> specs,
                                  double s, std::size_t reps, std::uint64_t master_seed,
                                  const ReplicateOptions& opts = {});

/// Sample covariance of the rows divided by s, with leave-one-out
/// jackknife standard errors. Throws ConfigError for fewer than 2 rows.
CovEstimate empirical_sigma(const ReplicationBatch& batch);

/// Limit covariance of (vertex count, edge count) of the scaled RGG on a
/// unit-volume window with unit density.
CovEstimate rgg_sigma_closed_form(int d, double rho);

struct RggExact {
  double cov_over_s = 0.0;  // Cov(V_s, E_s) / s
  double sigma12 = 0.0;
  double gap = 0.0;  // sigma12 - Cov/s
  double error_bound = 0.0;
};

/// Deterministic evaluation on [0,1]^d: Cov/s = s * int_{B(0,r)} prod(1-|z_i|) dz
/// with r = rho s^{-1/d}. The gap is integrated directly (no cancellation).
/// Requires r <= 1 and 1 <= d <= 6.
RggExact rgg_cov_exact(int d, double rho, double s);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

struct PalmParams {
  /// x draws per batch and stratum.
  std::size_t x_per_stratum = 64;
  std::size_t batches = 16;
  int strata_per_axis = 2;
  std::size_t y_per_x = 64;
  int shells = 8;
  std::size_t pilot_per_stratum = 32;
  /// Independent replicas per x (two groups) removing the centering bias.
  std::size_t center_reps = 8;
  /// 0 selects 6 interaction ranges.
  double w = 0.0;
  /// 0 selects w.
  double y_max = 0.0;
  std::uint64_t seed = 1;
  int threads = 1;
  std::vector<double> colors;
};

/// Monte Carlo estimate of the limit covariance sigma_ij of scaled
/// statistics: a one-point Palm term plus a two-point term integrated over
/// y in B(0, y_max). Entries with empty A_i cap A_j are exactly 0.
/// meta holds w, y_max and per-entry truncation budgets ("budget_i_j").
CovEstimate asymptotic_sigma_mc(std::span<const StatisticSpec> specs, const WindowSpec& window,
                                const PalmParams& params);

enum class GapMode { exact_rgg, mc };

struct GapPoint {
  double s = 0.0;
  Matrix value;   // sigma_ij - Sigma(s)_ij (NaN where unavailable)
  Matrix se;
};

struct GapCurve {
  std::vector<GapPoint> points;
  bool exact = false;
};

/// True when specs are (unit score, scaled RGG edge count) on the unit
/// cube with unit density, whole-window regions and f = 1.
bool is_rgg_vertex_edge_pair(std::span<const StatisticSpec> specs, const WindowSpec& window,
                             double* rho = nullptr);

struct GapOptions {
  std::size_t reps = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
  /// Reference sigma for mc mode; closed form for the RGG pair if null.
  const CovEstimate* reference = nullptr;
};

GapCurve gap_curve(std::span<const StatisticSpec> specs, const WindowSpec& window,
                   std::span<const double> s_grid, GapMode mode, const GapOptions& opts = {});

}  // namespace stablab
