#pragma once

// Gaussian comparison: sampling N(0, cov), two-sample multivariate
// Kolmogorov distance on a grid, and the covariance lower bound for d_3.

#include <cstdint>

#include "stablab/covlab.hpp"

namespace stablab {

struct GaussianSpec {
  Matrix cov;
  /// Lower-triangular root with factor * factor^T = cov (after clipping).
  Matrix factor;
  double min_eigenvalue = 0.0;

  /// Throws NumericError when cov is asymmetric or has an eigenvalue below
  /// -1e-10; eigenvalues in [-1e-10, 0) are clipped to 0.
  static GaussianSpec from_cov(const Matrix& cov);
  std::size_t dim() const { return cov.rows; }
};

/// n x m sample of N(0, cov).
Matrix sample_gaussian(const GaussianSpec& spec, std::size_t n, std::uint64_t seed);

struct DkResult {
  double distance = 0.0;
  /// 1/sqrt(n) + 1/sqrt(n').
  double noise_floor = 0.0;
  int grid = 0;
};

/// max over the product grid {lo + (hi - lo) k / grid : k = 1..grid}^m of
/// |F_a - F_b|, with [lo, hi] the pooled range per axis. Grids nest under
/// integer refinement, so the value is nondecreasing along grid, 2 grid, ...
/// Requires 1 <= m <= 3.
DkResult dk_estimate(const Matrix& a, const Matrix& b, int grid = 64);

/// (1/2) max_ij |a_ij - b_ij|.
double d3_lower_bound(const Matrix& sigma_target, const Matrix& sigma_s);

/// Rows centered by the sample mean and scaled by s^{-1/2}. With a sigma,
/// additionally whitened by its inverse symmetric root; a singular sigma
/// throws NumericError naming the smallest eigenvalue.
Matrix standardize(const ReplicationBatch& batch, const CovEstimate* whiten_by = nullptr);

}  // namespace stablab
