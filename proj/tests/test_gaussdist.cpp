#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "stablab/error.hpp"
#include "stablab/gaussdist.hpp"

using namespace stablab;

namespace {

Matrix mat(std::size_t r, std::size_t c, std::vector<double> v) {
  Matrix m(r, c);
  m.data = std::move(v);
  return m;
}

Matrix sample_cov(const Matrix& x) {
  const std::size_t n = x.rows, m = x.cols;
  std::vector<double> mean(m, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < m; ++i) mean[i] += x(r, i) / n;
  Matrix c(m, m);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) c(i, j) += (x(r, i) - mean[i]) * (x(r, j) - mean[j]) / (n - 1);
  return c;
}

double phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

TEST_CASE("Gaussian spec factors reproduce the covariance") {
  const double pi = std::numbers::pi;
  const Matrix rgg = mat(2, 2, {1, pi, pi, pi * pi + pi / 2});
  const GaussianSpec g = GaussianSpec::from_cov(rgg);
  CHECK(g.factor(0, 1) == 0.0);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 2; ++k) s += g.factor(i, k) * g.factor(j, k);
      CHECK(s == doctest::Approx(rgg(i, j)).epsilon(1e-10));
    }
  CHECK(g.min_eigenvalue > 0.0);

  const Matrix rank1 = mat(2, 2, {1, 2, 2, 4});
  const GaussianSpec r1 = GaussianSpec::from_cov(rank1);
  const Matrix x = sample_gaussian(r1, 200, 3);
  for (std::size_t r = 0; r < x.rows; ++r) CHECK(x(r, 1) == doctest::Approx(2 * x(r, 0)).epsilon(1e-9));

  CHECK_THROWS_AS(GaussianSpec::from_cov(mat(2, 2, {1, 0, 0, -0.01})), NumericError);
  CHECK_THROWS_AS(GaussianSpec::from_cov(mat(2, 2, {1, 0.5, 0.4, 1})), NumericError);
  CHECK_NOTHROW(GaussianSpec::from_cov(mat(2, 2, {1, 0, 0, -1e-12})));
}

TEST_CASE("Gaussian samples have the requested covariance") {
  const std::size_t n = 1000000;
  const Matrix id = mat(2, 2, {1, 0, 0, 1});
  const Matrix x = sample_gaussian(GaussianSpec::from_cov(id), n, 7);
  const Matrix c = sample_cov(x);
  for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(c.data[k] - id.data[k]) < 3.0 / std::sqrt(double(n)) * 1.5);

  const double pi = std::numbers::pi;
  const Matrix rgg = mat(2, 2, {1, pi, pi, pi * pi + pi / 2});
  const Matrix y = sample_gaussian(GaussianSpec::from_cov(rgg), 200000, 8);
  const Matrix cy = sample_cov(y);
  CHECK(cy(0, 0) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(cy(1, 1) == doctest::Approx(pi * pi + pi / 2).epsilon(0.02));

  CHECK(sample_gaussian(GaussianSpec::from_cov(id), 10, 1).data ==
        sample_gaussian(GaussianSpec::from_cov(id), 10, 1).data);
}

TEST_CASE("Kolmogorov distance estimates") {
  const Matrix id1 = mat(1, 1, {1});
  const Matrix a = sample_gaussian(GaussianSpec::from_cov(id1), 100000, 1);
  const DkResult self = dk_estimate(a, a);
  CHECK(self.distance == 0.0);
  CHECK(self.noise_floor == doctest::Approx(2.0 / std::sqrt(1e5)));

  Matrix b = sample_gaussian(GaussianSpec::from_cov(id1), 100000, 2);
  for (double& v : b.data) v += 1.0;
  CHECK(dk_estimate(a, b, 256).distance == doctest::Approx(phi(0.5) - phi(-0.5)).epsilon(0.02));
  CHECK(dk_estimate(a, b).distance == dk_estimate(b, a).distance);

  const Matrix id2 = mat(2, 2, {1, 0, 0, 1});
  const Matrix p = sample_gaussian(GaussianSpec::from_cov(id2), 100000, 3);
  const Matrix q = sample_gaussian(GaussianSpec::from_cov(id2), 100000, 4);
  const DkResult two = dk_estimate(p, q);
  CHECK(two.distance < 0.01 + two.noise_floor);

  double prev = 0.0;
  for (int g : {4, 8, 16, 32, 64}) {
    const double v = dk_estimate(p, q, g).distance;
    CHECK(v >= prev);
    prev = v;
  }

  const Matrix id3 = mat(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Matrix r = sample_gaussian(GaussianSpec::from_cov(id3), 5000, 5);
  Matrix r2 = sample_gaussian(GaussianSpec::from_cov(id3), 5000, 6);
  CHECK(dk_estimate(r, r2, 16).distance < 3 * dk_estimate(r, r2, 16).noise_floor);

  CHECK_THROWS(dk_estimate(Matrix(0, 2), p));
  CHECK_THROWS(dk_estimate(p, r));
  CHECK_THROWS(dk_estimate(Matrix(10, 4, 0.0), Matrix(10, 4, 0.0)));
}

TEST_CASE("same-spec Gaussian samples stay below three noise floors") {
  const Matrix c = mat(2, 2, {2, 0.5, 0.5, 1});
  const GaussianSpec g = GaussianSpec::from_cov(c);
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const DkResult r = dk_estimate(sample_gaussian(g, 2000, 2 * seed), sample_gaussian(g, 2000, 2 * seed + 1), 32);
    ok += r.distance < 3 * r.noise_floor;
  }
  CHECK(ok >= 38);
}

TEST_CASE("d3 lower bound") {
  const Matrix a = mat(2, 2, {1, 2, 2, 5});
  CHECK(d3_lower_bound(a, a) == 0.0);
  Matrix b = a;
  b(1, 1) += 0.3;
  CHECK(d3_lower_bound(a, b) == doctest::Approx(0.15));
  CHECK(d3_lower_bound(b, a) == d3_lower_bound(a, b));

  const RggExact e = rgg_cov_exact(2, 1.0, 1024.0);
  const Matrix sigma = rgg_sigma_closed_form(2, 1.0).matrix;
  Matrix sig_s = sigma;
  sig_s(0, 1) = sig_s(1, 0) = e.cov_over_s;
  CHECK(d3_lower_bound(sigma, sig_s) == doctest::Approx(0.5 * e.gap).epsilon(1e-9));
  CHECK_THROWS(d3_lower_bound(a, Matrix(3, 3)));
}

TEST_CASE("standardize centers, scales and whitens") {
  std::mt19937_64 eng(9);
  std::normal_distribution<double> nd;
  ReplicationBatch b;
  b.s = 25.0;
  b.names = {"x", "y"};
  const std::size_t R = 20000;
  b.values = Matrix(R, 2);
  for (std::size_t r = 0; r < R; ++r) {
    const double z1 = nd(eng), z2 = nd(eng);
    b.values(r, 0) = 100 + 5 * z1;
    b.values(r, 1) = -3 + 5 * z1 + 10 * z2;
  }
  const Matrix plain = standardize(b);
  const Matrix cp = sample_cov(plain);
  CHECK(cp(0, 0) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(cp(0, 1) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(cp(1, 1) == doctest::Approx(5.0).epsilon(0.05));
  double mean = 0;
  for (std::size_t r = 0; r < R; ++r) mean += plain(r, 1);
  CHECK(std::abs(mean / R) < 1e-10);

  const CovEstimate sig = empirical_sigma(b);
  const Matrix white = standardize(b, &sig);
  const Matrix cw = sample_cov(white);
  CHECK(cw(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(cw(1, 1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(cw(0, 1)) < 1e-9);

  CovEstimate singular = sig;
  singular.matrix = mat(2, 2, {1, 1, 1, 1});
  CHECK_THROWS_AS(standardize(b, &singular), NumericError);
}

TEST_CASE("standardized Poisson counts pass a one-sample normality check") {
  const double s = 1e4;
  const std::size_t n = 10000;
  std::mt19937_64 eng(10);
  std::poisson_distribution<long> pois(s);
  ReplicationBatch b;
  b.s = s;
  b.names = {"N"};
  b.values = Matrix(n, 1);
  for (std::size_t r = 0; r < n; ++r) b.values(r, 0) = double(pois(eng));
  const CovEstimate sig = empirical_sigma(b);
  const Matrix z = standardize(b, &sig);
  std::vector<double> v(z.data);
  std::sort(v.begin(), v.end());
  double ks = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = phi(v[i]);
    ks = std::max({ks, std::abs(f - double(i) / n), std::abs(f - double(i + 1) / n)});
  }
  // 5% critical value plus the lattice step of the Poisson law.
  CHECK(ks < 1.36 / std::sqrt(double(n)) + 1.0 / std::sqrt(2 * std::numbers::pi * s));
}
