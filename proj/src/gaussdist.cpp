#include "stablab/gaussdist.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "stablab/error.hpp"
#include "stablab/rng.hpp"

namespace stablab {

namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) e(i, j) = m(i, j);
  return e;
}

Matrix from_eigen(const Eigen::MatrixXd& e) {
  Matrix m(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) m(i, j) = e(i, j);
  return m;
}

void require_symmetric(const Matrix& m, const char* what) {
  if (m.rows != m.cols || m.rows == 0)
    throw NumericError(std::string(what) + ": matrix must be square and nonempty");
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double tol = 1e-12 * std::max({1.0, std::abs(m(i, j)), std::abs(m(j, i))});
      if (!(std::abs(m(i, j) - m(j, i)) <= tol))
        throw NumericError(std::string(what) + ": matrix is not symmetric");
    }
}

}  // namespace

GaussianSpec GaussianSpec::from_cov(const Matrix& cov) {
  require_symmetric(cov, "gaussian covariance");
  const Eigen::MatrixXd c = to_eigen(cov);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (c + c.transpose()));
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues();
  GaussianSpec g;
  g.cov = cov;
  g.min_eigenvalue = lam.minCoeff();
  if (g.min_eigenvalue < -1e-10) {
    std::ostringstream os;
    os << "covariance is not positive semi-definite (min eigenvalue " << g.min_eigenvalue << ")";
    throw NumericError(os.str());
  }
  lam = lam.cwiseMax(0.0);
  // B^T B = cov for B = Lambda^{1/2} V^T; QR of B gives cov = R^T R.
  const Eigen::MatrixXd B = lam.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(B);
  Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < R.rows(); ++i)
    if (R(i, i) < 0.0) R.row(i) *= -1.0;
  g.factor = from_eigen(R.transpose());
  return g;
}

Matrix sample_gaussian(const GaussianSpec& spec, std::size_t n, std::uint64_t seed) {
  const std::size_t m = spec.dim();
  Matrix out(n, m);
  Engine eng = make_engine(seed, 0.0, 0, StreamTag::gaussian);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(m);
  for (std::size_t r = 0; r < n; ++r) {
    for (auto& v : z) v = normal(eng);
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j <= i; ++j) acc += spec.factor(i, j) * z[j];
      out(r, i) = acc;
    }
  }
  return out;
}

DkResult dk_estimate(const Matrix& a, const Matrix& b, int grid) {
  if (a.rows == 0 || b.rows == 0) throw ConfigError("d_K needs two nonempty samples");
  if (a.cols != b.cols) throw ConfigError("d_K samples have different dimensions");
  const std::size_t m = a.cols;
  if (m < 1 || m > 3) throw ConfigError("grid d_K supports 1 to 3 dimensions");
  if (grid < 1) throw ConfigError("d_K grid must be positive");

  std::vector<std::vector<double>> knots(m);
  for (std::size_t ax = 0; ax < m; ++ax) {
    double lo = a(0, ax), hi = a(0, ax);
    for (const Matrix* s : {&a, &b})
      for (std::size_t r = 0; r < s->rows; ++r) {
        lo = std::min(lo, (*s)(r, ax));
        hi = std::max(hi, (*s)(r, ax));
      }
    knots[ax].resize(grid);
    for (int k = 1; k <= grid; ++k)
      knots[ax][k - 1] = k == grid ? hi : lo + (hi - lo) * (static_cast<double>(k) / grid);
  }
  std::size_t cells = 1;
  for (std::size_t ax = 0; ax < m; ++ax) cells *= grid;

  // Histogram of the first knot at or above each point, then prefix sums.
  auto cdf = [&](const Matrix& s) {
    std::vector<double> h(cells, 0.0);
    for (std::size_t r = 0; r < s.rows; ++r) {
      std::size_t flat = 0, stride = 1;
      for (std::size_t ax = 0; ax < m; ++ax) {
        const auto& kn = knots[ax];
        const std::size_t k = std::lower_bound(kn.begin(), kn.end(), s(r, ax)) - kn.begin();
        flat += std::min<std::size_t>(k, grid - 1) * stride;
        stride *= grid;
      }
      h[flat] += 1.0;
    }
    std::size_t stride = 1;
    for (std::size_t ax = 0; ax < m; ++ax) {
      for (std::size_t c = 0; c < cells; ++c)
        if ((c / stride) % grid != 0) h[c] += h[c - stride];
      stride *= grid;
    }
    for (auto& v : h) v /= static_cast<double>(s.rows);
    return h;
  };
  const auto fa = cdf(a), fb = cdf(b);
  DkResult out;
  out.grid = grid;
  for (std::size_t c = 0; c < cells; ++c) out.distance = std::max(out.distance, std::abs(fa[c] - fb[c]));
  out.noise_floor = 1.0 / std::sqrt(static_cast<double>(a.rows)) +
                    1.0 / std::sqrt(static_cast<double>(b.rows));
  return out;
}

double d3_lower_bound(const Matrix& sigma_target, const Matrix& sigma_s) {
  if (sigma_target.rows != sigma_s.rows || sigma_target.cols != sigma_s.cols)
    throw ConfigError("covariance matrices have different shapes");
  double mx = 0.0;
  for (std::size_t k = 0; k < sigma_target.data.size(); ++k)
    mx = std::max(mx, std::abs(sigma_target.data[k] - sigma_s.data[k]));
  return 0.5 * mx;
}

Matrix standardize(const ReplicationBatch& batch, const CovEstimate* whiten_by) {
  const std::size_t R = batch.reps(), m = batch.dim();
  if (R == 0) throw ConfigError("cannot standardize an empty batch");
  if (!(batch.s > 0.0)) throw ConfigError("batch intensity must be positive");
  std::vector<double> mean(m, 0.0);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t i = 0; i < m; ++i) mean[i] += batch.values(r, i);
  for (auto& v : mean) v /= static_cast<double>(R);
  const double scale = 1.0 / std::sqrt(batch.s);
  Matrix out(R, m);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t i = 0; i < m; ++i) out(r, i) = (batch.values(r, i) - mean[i]) * scale;
  if (!whiten_by) return out;

  if (whiten_by->dim() != m) throw ConfigError("whitening matrix has the wrong size");
  require_symmetric(whiten_by->matrix, "whitening covariance");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(whiten_by->matrix));
  const Eigen::VectorXd lam = es.eigenvalues();
  const double lmin = lam.minCoeff(), lmax = lam.cwiseAbs().maxCoeff();
  if (!(lmin > 1e-12 * std::max(1.0, lmax))) {
    std::ostringstream os;
    os << "covariance is singular, cannot whiten (min eigenvalue " << lmin << ")";
    throw NumericError(os.str());
  }
  const Eigen::MatrixXd W =
      es.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  Eigen::VectorXd x(m);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t i = 0; i < m; ++i) x(i) = out(r, i);
    const Eigen::VectorXd y = W * x;
    for (std::size_t i = 0; i < m; ++i) out(r, i) = y(i);
  }
  return out;
}

}  // namespace stablab
