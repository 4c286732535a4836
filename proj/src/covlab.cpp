#include "stablab/covlab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "stablab/error.hpp"
#include "stablab/parallel.hpp"
#include "stablab/rng.hpp"

namespace stablab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

const char* cov_kind_name(CovKind k) {
  switch (k) {
    case CovKind::empirical_sigma_s:
      return "empirical_sigma_s";
    case CovKind::asymptotic_sigma:
      return "asymptotic_sigma";
    case CovKind::closed_form:
      return "closed_form";
    case CovKind::exact_quadrature:
      return "exact_quadrature";
  }
  return "?";
}

// ---------------------------------------------------------------------------

namespace {

template <class Loop>
ReplicationBatch replicate_with(Loop&& loop, const WindowSpec& window,
                                std::span<const StatisticSpec> specs, double s, std::size_t reps,
                                std::uint64_t master, const ReplicateOptions& opts) {
  window.validate();
  for (const auto& sp : specs) sp.validate(window);
  const bool colored =
      std::any_of(specs.begin(), specs.end(), [](auto& sp) { return sp.score.needs_colors(); });
  if (colored && opts.colors.empty())
    throw SpecError("colored statistics need color probabilities");
  if (!opts.colors.empty()) validate_simplex(opts.colors);

  const auto t0 = std::chrono::steady_clock::now();
  ReplicationBatch b;
  b.s = s;
  for (const auto& sp : specs) b.names.push_back(sp.name);
  b.values = Matrix(reps, specs.size());
  b.seeds.resize(reps);
  loop(reps, [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(master, s, r, StreamTag::points);
    b.seeds[r] = seed;
    PointConfig cfg = sample_poisson(window, s, seed);
    if (!opts.colors.empty())
      cfg = attach_colors(cfg, opts.colors, derive_seed(master, s, r, StreamTag::marks));
    const StatVector v = eval_vector(cfg, specs, 1);
    for (std::size_t i = 0; i < specs.size(); ++i) b.values(r, i) = v.values[i];
  });
  b.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return b;
}

}  // namespace

ReplicationBatch replicate(const WindowSpec& window, std::span<const StatisticSpec> specs,
                           double s, std::size_t reps, std::uint64_t master_seed,
                           const ReplicateOptions& opts) {
  return replicate_with(
      [&](std::size_t n, auto&& f) { parallel_for(n, opts.threads, f); }, window, specs, s, reps,
      master_seed, opts);
}

ReplicationBatch replicate_serial(const WindowSpec& window, std::span<const StatisticSpec> specs,
                                  double s, std::size_t reps, std::uint64_t master_seed,
                                  const ReplicateOptions& opts) {
  return replicate_with([](std::size_t n, auto&& f) { serial_for(n, f); }, window, specs, s, reps,
                        master_seed, opts);
}

CovEstimate empirical_sigma(const ReplicationBatch& batch) {
  const std::size_t R = batch.reps(), m = batch.dim();
  if (R < 2) throw ConfigError("empirical covariance needs at least 2 replications");
  if (!(batch.s > 0.0)) throw ConfigError("batch intensity must be positive");
  CovEstimate out;
  out.kind = CovKind::empirical_sigma_s;
  out.n_samples = R;
  out.matrix = Matrix(m, m);
  out.se = Matrix(m, m);
  out.meta["s"] = batch.s;

  std::vector<double> mean(m, 0.0);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t i = 0; i < m; ++i) mean[i] += batch.values(r, i);
  for (auto& v : mean) v /= static_cast<double>(R);
  Matrix c(R, m);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t i = 0; i < m; ++i) c(r, i) = batch.values(r, i) - mean[i];

  const double Rd = static_cast<double>(R);
  std::vector<double> loo(R);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      double S = 0.0;
      for (std::size_t r = 0; r < R; ++r) S += c(r, i) * c(r, j);
      const double cov = S / (Rd - 1.0) / batch.s;
      double se = std::numeric_limits<double>::infinity();
      if (R > 2) {
        // Leave-one-out covariance from the centered sums in O(1) per row.
        double lm = 0.0;
        for (std::size_t r = 0; r < R; ++r) {
          loo[r] = (S - c(r, i) * c(r, j) * Rd / (Rd - 1.0)) / (Rd - 2.0) / batch.s;
          lm += loo[r];
        }
        lm /= Rd;
        double ss = 0.0;
        for (std::size_t r = 0; r < R; ++r) ss += (loo[r] - lm) * (loo[r] - lm);
        se = std::sqrt((Rd - 1.0) / Rd * ss);
      }
      out.matrix(i, j) = out.matrix(j, i) = cov;
      out.se(i, j) = out.se(j, i) = se;
    }
  return out;
}

CovEstimate rgg_sigma_closed_form(int d, double rho) {
  if (d < 1) throw ConfigError("dimension must be >= 1");
  if (!(rho >= 0.0)) throw ConfigError("rho must be >= 0");
  const double a = unit_ball_volume(d) * std::pow(rho, d);
  CovEstimate out;
  out.kind = CovKind::closed_form;
  out.matrix = Matrix(2, 2);
  out.se = Matrix(2, 2);
  out.matrix(0, 0) = 1.0;
  out.matrix(0, 1) = out.matrix(1, 0) = a;
  out.matrix(1, 1) = a * a + 0.5 * a;
  out.meta["d"] = d;
  out.meta["rho"] = rho;
  return out;
}

// ---------------------------------------------------------------------------

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw ConfigError("quadrature needs at least one node");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
}

namespace {

// int over the positive orthant part of B(0, r) of 1 - prod(1 - z_i), in
// hyperspherical coordinates with n_ang Gauss-Legendre nodes per angle.
double orthant_gap_integral(int d, double r, int n_ang) {
  std::vector<double> rx, rw, ax, aw;
  gauss_legendre(d + 2, rx, rw);
  gauss_legendre(n_ang, ax, aw);
  const double half_pi = 0.5 * std::numbers::pi;
  std::vector<double> cosv(n_ang), sinv(n_ang), wang(n_ang);
  for (int i = 0; i < n_ang; ++i) {
    const double phi = 0.5 * half_pi * (ax[i] + 1.0);
    cosv[i] = std::cos(phi);
    sinv[i] = std::sin(phi);
    wang[i] = 0.5 * half_pi * aw[i];
  }
  std::vector<double> rho(d + 2), wr(d + 2);
  for (int i = 0; i < d + 2; ++i) {
    rho[i] = 0.5 * r * (rx[i] + 1.0);
    wr[i] = 0.5 * r * rw[i] * std::pow(rho[i], d - 1);
  }

  const int n_angles = d - 1;
  std::vector<int> idx(std::max(n_angles, 0), 0);
  double total = 0.0;
  double c[kMaxDim];
  for (;;) {
    double w = 1.0, sp = 1.0;
    for (int a = 0; a < n_angles; ++a) {
      const int t = idx[a];
      c[a] = sp * cosv[t];
      sp *= sinv[t];
      w *= wang[t] * std::pow(sinv[t], d - 2 - a);
    }
    c[d - 1] = sp;
    double radial = 0.0;
    for (int i = 0; i < d + 2; ++i) {
      // q = 1 - prod(1 - z_i) accumulated without cancellation.
      double q = 0.0;
      for (int a = 0; a < d; ++a) q += (1.0 - q) * rho[i] * c[a];
      radial += wr[i] * q;
    }
    total += w * radial;
    int a = 0;
    for (; a < n_angles; ++a) {
      if (++idx[a] < n_ang) break;
      idx[a] = 0;
    }
    if (a == n_angles) break;
  }
  return total;
}

}  // namespace

RggExact rgg_cov_exact(int d, double rho, double s) {
  if (d < 1 || d > 6) throw ConfigError("exact RGG covariance supports 1 <= d <= 6");
  if (!(rho > 0.0) || !(s > 0.0)) throw ConfigError("rho and s must be positive");
  const double r = rho * std::pow(s, -1.0 / d);
  if (r > 1.0) throw ConfigError("connection radius exceeds the unit box (r = " +
                                 std::to_string(r) + ")");
  const int n = d <= 3 ? 24 : (d == 4 ? 16 : 10);
  const double orth = std::ldexp(1.0, d);
  const double coarse = orth * orthant_gap_integral(d, r, n);
  const double fine = orth * orthant_gap_integral(d, r, 2 * n);
  RggExact out;
  out.sigma12 = unit_ball_volume(d) * std::pow(rho, d);
  out.gap = s * fine;
  out.cov_over_s = out.sigma12 - out.gap;
  out.error_bound = s * std::abs(fine - coarse) + 4.0 * std::numeric_limits<double>::epsilon() * out.gap;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Stationary Poisson process of intensity u on x + [-L, L]^d, realized as
// the points of an intensity-1 driver on the box x [0, gsup] with t <= u.
PointConfig palm_driver(std::span<const double> x, double L, double u, double gsup,
                        Engine& eng, const std::vector<double>& colors) {
  const int d = static_cast<int>(x.size());
  WindowSpec w;
  w.box.lo.resize(d);
  w.box.hi.resize(d);
  for (int a = 0; a < d; ++a) {
    w.box.lo[a] = x[a] - L;
    w.box.hi[a] = x[a] + L;
  }
  w.density = DensitySpec::constant(1.0);
  PointConfig cfg(w, 1.0);
  std::poisson_distribution<long long> count(gsup * w.box.volume());
  const long long n = count(eng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::discrete_distribution<int> pick;
  if (!colors.empty()) pick = std::discrete_distribution<int>(colors.begin(), colors.end());
  cfg.reserve(static_cast<std::size_t>(n * (u / gsup) * 1.2) + 8);
  double p[kMaxDim];
  for (long long i = 0; i < n; ++i) {
    for (int a = 0; a < d; ++a) p[a] = w.box.lo[a] + 2.0 * L * unit(eng);
    const double t = gsup * unit(eng);
    const int col = colors.empty() ? 0 : pick(eng) + 1;
    if (t <= u) cfg.push_back({p, static_cast<std::size_t>(d)}, col ? Mark::of_color(col) : Mark{});
  }
  return cfg;
}

void uniform_in_box(const Box& b, Engine& eng, double* out) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int a = 0; a < b.dim(); ++a) out[a] = b.lo[a] + b.side(a) * unit(eng);
}

struct Stratum {
  Box cell;
  double volume;
};

std::vector<Stratum> make_strata(const Box& b, int per_axis) {
  const int d = b.dim();
  std::vector<Stratum> out;
  std::vector<int> idx(d, 0);
  for (;;) {
    Stratum st;
    st.cell = b;
    for (int a = 0; a < d; ++a) {
      const double h = b.side(a) / per_axis;
      st.cell.lo[a] = b.lo[a] + h * idx[a];
      st.cell.hi[a] = idx[a] + 1 == per_axis ? b.hi[a] : b.lo[a] + h * (idx[a] + 1);
    }
    st.volume = st.cell.volume();
    out.push_back(st);
    int a = 0;
    for (; a < d; ++a) {
      if (++idx[a] < per_axis) break;
      idx[a] = 0;
    }
    if (a == d) break;
  }
  return out;
}

bool same_box(const Box& a, const Box& b) { return a.lo == b.lo && a.hi == b.hi; }

Mark draw_mark(const std::vector<double>& colors, Engine& eng) {
  if (colors.empty()) return {};
  std::discrete_distribution<int> pick(colors.begin(), colors.end());
  return Mark::of_color(pick(eng) + 1);
}

}  // namespace

CovEstimate asymptotic_sigma_mc(std::span<const StatisticSpec> specs, const WindowSpec& window,
                                const PalmParams& params) {
  window.validate();
  const int d = window.dim();
  const std::size_t m = specs.size();
  if (m == 0) throw SpecError("no statistics given");
  for (const auto& sp : specs) {
    sp.validate(window);
    if (!is_scaled(sp.score))
      throw SpecError("statistic '" + sp.name + "' (" + sp.score.describe() +
                      ") is not a scaled score; the limit covariance is undefined for it");
    if (sp.score.needs_colors() && params.colors.empty())
      throw SpecError("colored statistics need color probabilities");
  }
  if (params.batches < 2) throw ConfigError("need at least 2 batches for a standard error");
  if (params.strata_per_axis < 1 || params.shells < 1 || params.y_per_x < 1 ||
      params.x_per_stratum < 1)
    throw ConfigError("Monte Carlo sample sizes must be positive");

  const Box& wb = window.box;
  const double gsup = window.density.sup(wb);
  double u_ref = window.density.min_over(wb);
  if (!(u_ref > 0.0)) u_ref = 0.1 * gsup;
  double range = 0.0;
  for (const auto& sp : specs) range = std::max(range, interaction_range(sp.score, d, u_ref));
  const double w = params.w > 0.0 ? params.w : (range > 0.0 ? 6.0 * range : 1.0);
  const double y_max = params.y_max > 0.0 ? params.y_max : w;
  const double L = w + y_max;
  const double ball = unit_ball_volume(d) * std::pow(y_max, d);

  CovEstimate out;
  out.kind = CovKind::asymptotic_sigma;
  out.matrix = Matrix(m, m);
  out.se = Matrix(m, m);
  out.meta["w"] = w;
  out.meta["y_max"] = y_max;
  out.meta["seed"] = static_cast<double>(params.seed);

  // Group entries by their intersection box.
  struct Group {
    Box box;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
  };
  std::vector<Group> groups;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      bool empty = false;
      Box b = intersect_regions(specs[i].region, specs[j].region, window, &empty);
      if (empty) {
        out.meta["budget_" + std::to_string(i) + "_" + std::to_string(j)] = 0.0;
        continue;
      }
      auto it = std::find_if(groups.begin(), groups.end(),
                             [&](const Group& g) { return same_box(g.box, b); });
      if (it == groups.end()) {
        groups.push_back({b, {}});
        it = groups.end() - 1;
      }
      it->pairs.emplace_back(i, j);
    }

  std::size_t total_x = 0;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const Group& grp = groups[gi];
    const std::uint64_t gseed = mix64(params.seed ^ mix64(gi + 1));
    const auto strata = make_strata(grp.box, params.strata_per_axis);
    const std::size_t nS = strata.size();
    const std::size_t P = grp.pairs.size();

    // Pilot means of the one-point scores per stratum.
    std::vector<double> pilot(nS * m, 0.0);
    parallel_for(nS, params.threads, [&](std::size_t k) {
      std::vector<double> acc(m, 0.0);
      double xx[kMaxDim];
      for (std::size_t p = 0; p < params.pilot_per_stratum; ++p) {
        Engine eng = make_engine(derive_seed(gseed, static_cast<double>(k), p, StreamTag::palm_pilot));
        uniform_in_box(strata[k].cell, eng, xx);
        std::span<const double> x(xx, d);
        const double u = window.density(x, wb);
        if (!(u > 0.0)) continue;
        PointConfig drv = palm_driver(x, L, u, gsup, eng, params.colors);
        GridIndex idx(drv);
        SpatialView va(idx, {MarkedPoint{{x.begin(), x.end()}, draw_mark(params.colors, eng)}});
        ScoreContext ca(va, 1.0);
        for (std::size_t i = 0; i < m; ++i) acc[i] += ca.score(specs[i].score, va.extra_id(0));
      }
      for (std::size_t i = 0; i < m; ++i)
        pilot[k * m + i] = params.pilot_per_stratum ? acc[i] / params.pilot_per_stratum : 0.0;
    });

    const std::size_t per_batch = nS * params.x_per_stratum;
    const std::size_t n_x = params.batches * per_batch;
    total_x += n_x;
    // Per sample and pair: term 1, term 2, outer-shell part of term 2.
    std::vector<double> res(n_x * P * 3, 0.0);

    parallel_for(n_x, params.threads, [&](std::size_t t) {
      const std::size_t k = (t / params.x_per_stratum) % nS;
      Engine eng = make_engine(derive_seed(gseed, 0.0, t, StreamTag::palm_x));
      double xx[kMaxDim];
      uniform_in_box(strata[k].cell, eng, xx);
      std::span<const double> x(xx, d);
      const double u = window.density(x, wb);
      if (!(u > 0.0)) return;
      PointConfig drv = palm_driver(x, L, u, gsup, eng, params.colors);
      GridIndex idx(drv);
      const std::size_t n = drv.size();
      const MarkedPoint px{{x.begin(), x.end()}, draw_mark(params.colors, eng)};

      SpatialView va(idx, {px});
      ScoreContext ca(va, 1.0);
      std::vector<double> xa(m), f(m);
      for (std::size_t i = 0; i < m; ++i) {
        xa[i] = ca.score(specs[i].score, n);
        f[i] = specs[i].testfn(x);
      }

      // E[(A - c)(B - c)] = Cov(A, B) + (m(x) - c)^2; the second part is
      // estimated from two independent groups of replicas at x.
      std::vector<double> g1(m, 0.0), g2(m, 0.0);
      if (params.center_reps > 0) {
        Engine ceng = make_engine(derive_seed(gseed, -1.0, t, StreamTag::palm_pilot));
        for (std::size_t c = 0; c < 2 * params.center_reps; ++c) {
          PointConfig rep = palm_driver(x, w, u, gsup, ceng, params.colors);
          GridIndex ridx(rep);
          SpatialView rv(ridx, {MarkedPoint{px.pos, draw_mark(params.colors, ceng)}});
          ScoreContext rc(rv, 1.0);
          auto& g = c % 2 ? g2 : g1;
          for (std::size_t i = 0; i < m; ++i) g[i] += rc.score(specs[i].score, rep.size());
        }
        for (std::size_t i = 0; i < m; ++i) {
          g1[i] = g1[i] / params.center_reps - pilot[k * m + i];
          g2[i] = g2[i] / params.center_reps - pilot[k * m + i];
        }
      }

      std::vector<double> sum2(P, 0.0), outer(P, 0.0);
      std::vector<double> xb(m), cx(m), cy(m);
      Engine yeng = make_engine(derive_seed(gseed, 0.0, t, StreamTag::palm_y));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (std::size_t yk = 0; yk < params.y_per_x; ++yk) {
        const int shell = static_cast<int>(yk % params.shells);
        const double rad =
            y_max * std::pow((shell + unit(yeng)) / params.shells, 1.0 / d);
        double dir[kMaxDim], n2 = 0.0;
        do {
          n2 = 0.0;
          for (int a = 0; a < d; ++a) {
            dir[a] = normal(yeng);
            n2 += dir[a] * dir[a];
          }
        } while (!(n2 > 0.0));
        MarkedPoint py{{x.begin(), x.end()}, draw_mark(params.colors, yeng)};
        for (int a = 0; a < d; ++a) py.pos[a] += rad * dir[a] / std::sqrt(n2);

        SpatialView vb(idx, {py});
        SpatialView vc(idx, {px, py});
        ScoreContext cb(vb, 1.0), cc(vc, 1.0);
        for (std::size_t i = 0; i < m; ++i) {
          xb[i] = cb.score(specs[i].score, n);
          cx[i] = cc.score(specs[i].score, n);
          cy[i] = cc.score(specs[i].score, n + 1);
        }
        for (std::size_t p = 0; p < P; ++p) {
          const auto [i, j] = grp.pairs[p];
          const double mi = pilot[k * m + i], mj = pilot[k * m + j];
          // Common-random-numbers difference, symmetrized in (i, j).
          const double a =
              0.5 * ((cx[i] * cy[j] - xa[i] * xb[j]) + (cx[j] * cy[i] - xa[j] * xb[i]));
          const double b =
              0.5 * ((xa[i] - mi) * (xb[j] - mj) + (xa[j] - mj) * (xb[i] - mi));
          sum2[p] += a + b;
          if (shell == params.shells - 1) outer[p] += a + b;
        }
      }
      for (std::size_t p = 0; p < P; ++p) {
        const auto [i, j] = grp.pairs[p];
        const double ff = f[i] * f[j];
        const double corr =
            params.center_reps ? 0.5 * (g1[i] * g2[j] + g1[j] * g2[i]) : 0.0;
        double* r = &res[(t * P + p) * 3];
        r[0] = xa[i] * xa[j] * ff * u;
        r[1] = ball * (sum2[p] / params.y_per_x - corr) * ff * u * u;
        r[2] = ball * (outer[p] / params.y_per_x - corr / params.shells) * ff * u * u;
      }
    });

    // Batch estimates of the x-integral: sum over strata of volume * mean.
    const std::size_t B = params.batches;
    for (std::size_t p = 0; p < P; ++p) {
      std::vector<double> est(B, 0.0), est_outer(B, 0.0), est1(B, 0.0), est2(B, 0.0);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t k = 0; k < nS; ++k) {
          double s1 = 0.0, s2 = 0.0, so = 0.0;
          for (std::size_t q = 0; q < params.x_per_stratum; ++q) {
            const std::size_t t = b * per_batch + k * params.x_per_stratum + q;
            const double* r = &res[(t * P + p) * 3];
            s1 += r[0];
            s2 += r[1];
            so += r[2];
          }
          const double scale = strata[k].volume / params.x_per_stratum;
          est1[b] += scale * s1;
          est2[b] += scale * s2;
          est_outer[b] += scale * so;
        }
      auto mean_se = [B](const std::vector<double>& v, double& mean, double& se) {
        mean = 0.0;
        for (double x : v) mean += x;
        mean /= B;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        se = std::sqrt(ss / (B - 1.0) / B);
      };
      for (std::size_t b = 0; b < B; ++b) est[b] = est1[b] + est2[b];
      double mean, se, m1, se1, m2, se2, mo, seo;
      mean_se(est, mean, se);
      mean_se(est1, m1, se1);
      mean_se(est2, m2, se2);
      mean_se(est_outer, mo, seo);
      const auto [i, j] = grp.pairs[p];
      out.matrix(i, j) = out.matrix(j, i) = mean;
      out.se(i, j) = out.se(j, i) = se;
      const std::string tag = std::to_string(i) + "_" + std::to_string(j);
      out.meta["term1_" + tag] = m1;
      out.meta["term2_" + tag] = m2;
      out.meta["budget_" + tag] = std::abs(mo) + 2.0 * seo;
    }
  }
  out.n_samples = total_x;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

bool is_edge_count(const ScoreSpec& sc, double* rho) {
  const bool edge_sub = sc.family == Family::rgg_subgraph && sc.pattern.vertices == 2;
  const bool rips_edges = sc.family == Family::rips_volume && sc.k == 1 && sc.alpha == 0.0;
  if (!(edge_sub || rips_edges) || sc.radius.rule != RadiusRule::scaled) return false;
  if (rho) *rho = sc.radius.value;
  return true;
}

}  // namespace

bool is_rgg_vertex_edge_pair(std::span<const StatisticSpec> specs, const WindowSpec& window,
                             double* rho) {
  if (specs.size() != 2) return false;
  const int d = window.dim();
  for (int a = 0; a < d; ++a)
    if (window.box.lo[a] != 0.0 || window.box.hi[a] != 1.0) return false;
  if (window.boundary != Boundary::hard || !window.density.is_constant() ||
      window.density.value != 1.0)
    return false;
  for (const auto& sp : specs)
    if (!sp.region.whole && !same_box(sp.region.box, window.box)) return false;
  for (const auto& sp : specs)
    if (!sp.testfn.is_constant_one()) return false;
  return specs[0].score.family == Family::unit && is_edge_count(specs[1].score, rho);
}

GapCurve gap_curve(std::span<const StatisticSpec> specs, const WindowSpec& window,
                   std::span<const double> s_grid, GapMode mode, const GapOptions& opts) {
  for (std::size_t i = 1; i < s_grid.size(); ++i)
    if (!(s_grid[i] > s_grid[i - 1])) throw ConfigError("s grid must be strictly increasing");
  GapCurve curve;
  const std::size_t m = specs.size();
  double rho = 0.0;
  const bool pair = is_rgg_vertex_edge_pair(specs, window, &rho);
  if (mode == GapMode::exact_rgg) {
    if (!pair)
      throw SpecError("exact gap curves need the (unit, scaled RGG edge count) pair on the "
                      "unit cube with unit density");
    curve.exact = true;
    for (double s : s_grid) {
      const RggExact ex = rgg_cov_exact(window.dim(), rho, s);
      GapPoint gp;
      gp.s = s;
      gp.value = Matrix(2, 2);
      gp.se = Matrix(2, 2);
      // Var(V_s)/s equals sigma_11 exactly; the edge-edge entry has no
      // quadrature here.
      gp.value(0, 1) = gp.value(1, 0) = ex.gap;
      gp.se(0, 1) = gp.se(1, 0) = ex.error_bound;
      gp.value(1, 1) = gp.se(1, 1) = kNaN;
      curve.points.push_back(std::move(gp));
    }
    return curve;
  }

  CovEstimate ref;
  if (opts.reference) {
    ref = *opts.reference;
    if (ref.dim() != m) throw ConfigError("reference covariance has the wrong size");
  } else if (pair) {
    ref = rgg_sigma_closed_form(window.dim(), rho);
  } else {
    throw SpecError("mc gap curves need a reference covariance for these statistics");
  }
  ReplicateOptions ro;
  ro.threads = opts.threads;
  for (double s : s_grid) {
    const ReplicationBatch batch = replicate(window, specs, s, opts.reps, opts.seed, ro);
    const CovEstimate emp = empirical_sigma(batch);
    GapPoint gp;
    gp.s = s;
    gp.value = Matrix(m, m);
    gp.se = Matrix(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        gp.value(i, j) = ref.matrix(i, j) - emp.matrix(i, j);
        const double rs = ref.se.rows ? ref.se(i, j) : 0.0;
        gp.se(i, j) = std::sqrt(emp.se(i, j) * emp.se(i, j) + rs * rs);
      }
    curve.points.push_back(std::move(gp));
  }
  return curve;
}

}  // namespace stablab
