// End-to-end acceptance checks. One line per criterion; exit status 1 when a
// criterion fails that is not listed with a known defect. Pass criterion ids
// (C1 ... C10) to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "catalog.hpp"
#include "oracles.hpp"
#include "stablab/covlab.hpp"
#include "stablab/expcli.hpp"
#include "stablab/gaussdist.hpp"
#include "stablab/ratelab.hpp"
#include "stablab/rng.hpp"

using namespace stablab;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kZ95 = 1.959963984540054;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

StatisticSpec stat(std::string name, ScoreSpec s) {
  return {std::move(name), std::move(s), RegionSpec::whole_window(), TestFn::constant(1.0)};
}

std::vector<StatisticSpec> rgg_pair() {
  return {stat("V", ScoreSpec::unit()),
          stat("E", ScoreSpec::rgg_subgraph(Pattern::edge(), Radius::scaled(1.0)))};
}

double column_mean(const Matrix& m, std::size_t j) {
  double s = 0.0;
  for (std::size_t r = 0; r < m.rows; ++r) s += m(r, j);
  return s / m.rows;
}

double column_sd(const Matrix& m, std::size_t j) {
  const double mu = column_mean(m, j);
  double ss = 0.0;
  for (std::size_t r = 0; r < m.rows; ++r) ss += (m(r, j) - mu) * (m(r, j) - mu);
  return std::sqrt(ss / (m.rows - 1));
}

// ---------------------------------------------------------------------------

Outcome c1_poisson() {
  const double s = 1e4;
  const std::size_t R = 10000;
  const std::vector<StatisticSpec> specs{stat("N", ScoreSpec::unit())};
  const ReplicationBatch b = replicate(WindowSpec::unit_cube(2), specs, s, R, 101);
  const double mean = column_mean(b.values, 0);
  const double sigma_mean = std::sqrt(s / R);
  const CovEstimate e = empirical_sigma(b);
  const bool ok_mean = std::abs(mean - s) <= 3.0 * sigma_mean;
  const bool ok_var = std::abs(e.matrix(0, 0) - 1.0) <= 3.0 * e.se(0, 0);
  return {ok_mean && ok_var && b.wall_seconds < 60.0,
          "mean " + fmt("%.3f", mean) + " (3 sigma " + fmt("%.2f", 3 * sigma_mean) + "), Sigma_11 " +
              fmt("%.4f", e.matrix(0, 0)) + " +- " + fmt("%.4f", e.se(0, 0)) + ", " +
              fmt("%.1f", b.wall_seconds) + " s"};
}

Outcome c2_bruteforce() {
  std::mt19937_64 eng(202);
  const std::size_t configs = 100;
  std::size_t checked = 0, bad = 0;
  std::string first_bad;
  double worst = 0.0;
  for (const auto& e : oracle::catalog()) {
    const WindowSpec w = WindowSpec::unit_cube(e.dim, e.torus ? Boundary::torus : Boundary::hard);
    std::uniform_int_distribution<std::size_t> size(1, e.n_max);
    for (std::size_t t = 0; t < configs; ++t) {
      const std::size_t n = size(eng);
      const PointConfig c = oracle::uniform_config(w, double(e.n_max), n, eng, e.colors);
      GridIndex g(c);
      SpatialView v(g);
      ScoreContext ctx(v, c.intensity());
      std::vector<double> lib;
      ctx.evaluate(e.spec, {}, lib);
      const auto ref = oracle::scores(c, e.spec);
      for (std::size_t i = 0; i < n; ++i) {
        const double rel = std::abs(lib[i] - ref[i]) / std::max({1.0, std::abs(lib[i]), std::abs(ref[i])});
        worst = std::max(worst, rel);
        if (rel > 1e-9 && bad++ == 0) first_bad = e.label;
      }
      ++checked;
    }
  }
  return {bad == 0, std::to_string(oracle::catalog().size()) + " scores x " + std::to_string(configs) +
                        " configs (" + std::to_string(checked) + "), worst relative error " +
                        fmt("%.2e", worst) + (bad ? ", first mismatch in " + first_bad : "")};
}

Outcome c3_torus_mean() {
  const std::vector<StatisticSpec> specs{
      stat("E", ScoreSpec::rgg_subgraph(Pattern::edge(), Radius::scaled(1.0)))};
  const std::size_t R = 2000;
  const ReplicationBatch b =
      replicate(WindowSpec::unit_cube(2, Boundary::torus), specs, 1000.0, R, 303);
  const double mean = column_mean(b.values, 0);
  const double se = column_sd(b.values, 0) / std::sqrt(double(R));
  const double truth = 500.0 * kPi;
  return {std::abs(mean - truth) <= 3.0 * se,
          "mean " + fmt("%.2f", mean) + " vs 500 pi = " + fmt("%.2f", truth) + ", 3 se " + fmt("%.2f", 3 * se)};
}

Outcome c4_closed_form() {
  const double s = 16384.0;
  const std::size_t R = 5000;
  const ReplicationBatch b = replicate(WindowSpec::unit_cube(2), rgg_pair(), s, R, 404);
  const CovEstimate e = empirical_sigma(b);
  const CovEstimate ref = rgg_sigma_closed_form(2, 1.0);
  bool ok = true;
  std::string d;
  for (auto [i, j] : {std::pair{0, 0}, std::pair{0, 1}, std::pair{1, 1}}) {
    const double tol = std::max(3.0 * e.se(i, j), 0.15);
    ok = ok && std::abs(e.matrix(i, j) - ref.matrix(i, j)) <= tol;
    d += "s" + std::to_string(i + 1) + std::to_string(j + 1) + " " + fmt("%.4f", e.matrix(i, j)) + "/" +
         fmt("%.4f", ref.matrix(i, j)) + " (tol " + fmt("%.3f", tol) + ") ";
  }
  return {ok, d + fmt("%.0f s", b.wall_seconds)};
}

Outcome c5_gap_rate() {
  std::vector<double> grid;
  for (int k = 8; k <= 18; ++k) grid.push_back(std::ldexp(1.0, k));
  std::string d;
  bool ok = true;
  for (int dim : {2, 3}) {
    std::vector<CurvePoint> curve;
    for (double s : grid) {
      const RggExact ex = rgg_cov_exact(dim, 1.0, s);
      curve.push_back({s, ex.gap, ex.error_bound});
    }
    const RateFit f = fit_rate(curve);
    const double target = -1.0 / dim;
    ok = ok && std::abs(f.exponent - target) <= 0.05;
    d += "d=" + std::to_string(dim) + " exponent " + fmt("%.4f", f.exponent) + " (target " +
         fmt("%.4f", target) + "); ";
  }
  const std::vector<double> one{4096.0};
  GapOptions o;
  o.reps = 4000;
  o.seed = 505;
  const GapCurve mc = gap_curve(rgg_pair(), WindowSpec::unit_cube(2), one, GapMode::mc, o);
  const double exact = rgg_cov_exact(2, 1.0, 4096.0).gap;
  const double v = mc.points[0].value(0, 1), se = mc.points[0].se(0, 1);
  ok = ok && std::abs(v - exact) <= 3.0 * se;
  d += "MC gap at 2^12 " + fmt("%.4f", v) + " +- " + fmt("%.4f", se) + " vs " + fmt("%.4f", exact);
  return {ok, d};
}

Outcome c6_palm() {
  PalmParams p;
  p.seed = 606;
  p.x_per_stratum = 512;
  p.batches = 32;
  const auto t0 = std::chrono::steady_clock::now();
  const CovEstimate e = asymptotic_sigma_mc(rgg_pair(), WindowSpec::unit_cube(2), p);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const CovEstimate ref = rgg_sigma_closed_form(2, 1.0);
  bool ok = true;
  std::string d;
  for (auto [i, j] : {std::pair{0, 0}, std::pair{0, 1}, std::pair{1, 1}}) {
    const double est = e.matrix(i, j), truth = ref.matrix(i, j), se = e.se(i, j);
    const bool within = std::abs(est - truth) <= 0.05 * truth;
    const bool covered = std::abs(est - truth) <= kZ95 * se;
    ok = ok && within && covered;
    d += "s" + std::to_string(i + 1) + std::to_string(j + 1) + " " + fmt("%.4f", est) + " [" +
         fmt("%.4f", est - kZ95 * se) + ", " + fmt("%.4f", est + kZ95 * se) + "] vs " +
         fmt("%.4f", truth) + "; ";
  }
  return {ok, d + fmt("%.0f s", secs)};
}

Outcome c7_gaussian() {
  const std::size_t R = 4000;
  std::vector<CurvePoint> curve;
  std::string d;
  for (int k = 6; k <= 12; ++k) {
    const double s = std::ldexp(1.0, k);
    const ReplicationBatch b = replicate(WindowSpec::unit_cube(2), rgg_pair(), s, R, 707);
    const CovEstimate sig = empirical_sigma(b);
    const Matrix z = standardize(b, &sig);
    Matrix id(2, 2);
    id(0, 0) = id(1, 1) = 1.0;
    const Matrix g = sample_gaussian(GaussianSpec::from_cov(id), 10 * R,
                                     derive_seed(707, s, 0, StreamTag::gaussian));
    const DkResult r = dk_estimate(z, g, 64);
    // Unweighted fit: the noise floor is common to every point.
    curve.push_back({s, r.distance, 0.0});
    d += fmt("%.4f ", r.distance);
  }
  const double first = curve.front().value, last = curve.back().value;
  const RateFit f = fit_rate(curve);
  const bool ok = last < first && last < 0.08 && f.exponent >= -0.9 && f.exponent <= -0.2;
  return {ok, "d_K over s=2^6..2^12: " + d + "exponent " + fmt("%.3f", f.exponent)};
}

Outcome c8_probe() {
  const WindowSpec w = WindowSpec::unit_cube(2);
  const double s = 1e4;
  const double unit = 1.0 / std::sqrt(s);
  const std::vector<double> seps{unit, 2 * unit, 3 * unit, 4 * unit};
  const auto rows = stab_probe(stat("L", ScoreSpec::knn_edge(1, 1.0)), w, s, seps, 4000, 808);
  bool decreasing = true;
  std::string d = "kNN:";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    d += " " + fmt("%.3f", rows[k].estimate);
    if (k > 0) decreasing = decreasing && rows[k].estimate < rows[k - 1].estimate;
  }
  // Slope of log estimate against separation^d.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.estimate <= 0.0) continue;
    const double x = r.separation * r.separation * s, y = std::log(r.estimate);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  const double slope = n >= 2 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0.0;
  d += ", slope " + fmt("%.3f", slope);

  // Component scores: nothing beyond three radii. A chain of three points
  // spanning (3r, 4r] still couples z1 and z2 for k = 3, so the k = 3 count
  // is expected to be small but positive; 4.5 r checks the 4r bound.
  const std::vector<double> beyond3{3.05 * unit, 3.25 * unit, 3.5 * unit, 3.75 * unit, 4.5 * unit};
  std::size_t hits3 = 0, hits4 = 0;
  for (int k = 1; k <= 3; ++k) {
    const auto cr = stab_probe(stat("C", ScoreSpec::rgg_component(k, Radius::scaled(1.0))), w, s,
                               beyond3, 20000, 818 + k);
    std::size_t kh = 0;
    for (std::size_t t = 0; t + 1 < cr.size(); ++t) kh += cr[t].nonzero;
    hits3 += kh;
    hits4 += cr.back().nonzero;
    d += "; component k=" + std::to_string(k) + " nonzero in (3r,4r] " + std::to_string(kh) + "/" +
         std::to_string(4 * cr[0].reps) + ", beyond 4r " + std::to_string(cr.back().nonzero);
  }
  return {decreasing && slope < 0.0 && hits3 == 0 && hits4 == 0, d};
}

Outcome c9_entropy() {
  const double s = 1e5;
  const std::size_t R = 10;
  const std::vector<StatisticSpec> specs{stat("L", ScoreSpec::knn_directed(1, 1.0, false))};
  const ReplicationBatch b = replicate(WindowSpec::unit_cube(2, Boundary::torus), specs, s, R, 909);
  const double mean = column_mean(b.values, 0) / std::sqrt(s);
  const double truth = std::tgamma(1.5) / std::sqrt(kPi);
  return {std::abs(mean - truth) <= 0.02 * truth,
          "s^{-1/2} L = " + fmt("%.5f", mean) + " vs " + fmt("%.5f", truth)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome c10_determinism() {
  ExperimentConfig c;
  c.name = "determinism";
  c.statistics = rgg_pair();
  c.statistics.push_back(stat("L", ScoreSpec::knn_edge(1, 1.0)));
  c.s_grid = {256, 512, 1024, 2048};
  c.reps_per_s = 100;
  c.master_seed = 1010;
  c.analyses.empirical_sigma = true;
  c.analyses.dk = DkAnalysis{DkTarget::sigma_s, 32, 2};
  c.analyses.stab_probe = ProbeAnalysis{"L", 1024.0, {1.0, 2.0}, 50};
  const fs::path root = fs::temp_directory_path() / "stablab_acceptance_c10";
  fs::remove_all(root);
  std::string d;
  bool ok = true;
  std::vector<fs::path> dirs;
  for (int par : {1, 8}) {
    c.parallelism = par;
    c.output_dir = (root / ("p" + std::to_string(par))).string();
    const RunSummary r = run_experiment(c);
    ok = ok && r.complete;
    dirs.push_back(c.output_dir);
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(dirs[0])) {
    if (entry.path().extension() != ".csv") continue;
    ++compared;
    const bool same = slurp(entry.path()) == slurp(dirs[1] / entry.path().filename());
    if (!same) d += " differs: " + entry.path().filename().string();
    ok = ok && same;
  }
  fs::remove_all(root);
  return {ok && compared >= 6, std::to_string(compared) + " CSV files compared at parallelism 1 and 8" + d};
}

}  // namespace

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
  /// Non-empty when the criterion is known to be unattainable as stated.
  std::string known_defect;
};

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"C1 Poisson sanity", c1_poisson, ""},
      {"C2 brute-force equivalence", c2_bruteforce, ""},
      {"C3 RGG torus edge mean", c3_torus_mean, ""},
      {"C4 closed-form Sigma reproduction", c4_closed_form, ""},
      {"C5 covariance-gap rate", c5_gap_rate, ""},
      {"C6 asymptotic sigma estimator", c6_palm, ""},
      {"C7 Gaussian approximation decay", c7_gaussian, ""},
      {"C8 stabilization probe", c8_probe,
       "the size-3 component score interacts up to 4 r_s (z1 - a - b - c - z2 chain), so the probe "
       "beyond 3 r_s is rare but not exactly 0"},
      {"C9 entropy estimator limit", c9_entropy, ""},
      {"C10 determinism", c10_determinism, ""},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int unexpected = 0;
  for (const auto& c : criteria) {
    const std::string id = c.name.substr(0, c.name.find(' '));
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string note;
    if (!c.known_defect.empty()) note = o.pass ? " (passed despite known defect: " : " (known defect: ";
    if (!note.empty()) note += c.known_defect + ")";
    std::printf("%s %s: %s%s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(),
                note.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass && c.known_defect.empty()) ++unexpected;
  }
  return unexpected ? 1 : 0;
}
