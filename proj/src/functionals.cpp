#include "stablab/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "stablab/error.hpp"
#include "stablab/parallel.hpp"
#include "stablab/rng.hpp"

namespace stablab {

Box intersect_regions(const RegionSpec& a, const RegionSpec& b, const WindowSpec& w,
                      bool* empty) {
  Box ra = a.resolve(w), rb = b.resolve(w);
  Box out = ra;
  bool is_empty = false;
  for (int i = 0; i < w.dim(); ++i) {
    out.lo[i] = std::max(ra.lo[i], rb.lo[i]);
    out.hi[i] = std::min(ra.hi[i], rb.hi[i]);
    if (!(out.lo[i] < out.hi[i])) is_empty = true;
  }
  if (empty) *empty = is_empty;
  return out;
}

TestFn TestFn::constant(double c) {
  TestFn f;
  f.c = c;
  return f;
}

TestFn TestFn::coordinate(int axis) {
  TestFn f;
  f.kind = Kind::coordinate;
  f.axis = axis;
  f.lipschitz = 1.0;
  return f;
}

TestFn TestFn::affine(double base, std::vector<double> gradient) {
  TestFn f;
  f.kind = Kind::affine;
  f.base = base;
  double s2 = 0.0;
  for (double g : gradient) s2 += g * g;
  f.lipschitz = std::sqrt(s2);
  f.gradient = std::move(gradient);
  return f;
}

TestFn TestFn::custom(std::function<double(std::span<const double>)> fn, double lipschitz) {
  TestFn f;
  f.kind = Kind::custom;
  f.fn = std::move(fn);
  f.lipschitz = lipschitz;
  return f;
}

double TestFn::operator()(std::span<const double> x) const {
  switch (kind) {
    case Kind::constant:
      return c;
    case Kind::coordinate:
      return x[axis];
    case Kind::affine: {
      double v = base;
      for (std::size_t a = 0; a < gradient.size(); ++a) v += gradient[a] * x[a];
      return v;
    }
    case Kind::custom:
      return fn(x);
  }
  return 0.0;
}

void StatisticSpec::validate(const WindowSpec& window) const {
  const std::string who = name.empty() ? std::string("statistic") : "statistic '" + name + "'";
  const int d = window.dim();
  score.validate(d);
  if (!region.whole) {
    if (region.box.dim() != d) throw ConfigError(who + ": region dimension does not match window");
    region.box.validate();
    if (!window.box.contains_box(region.box))
      throw ConfigError(who + ": region must lie inside the window");
  }
  if (!(region.volume(window) > 0.0))
    throw ConfigError(who + ": region must have positive volume");

  bool zero = false;
  switch (testfn.kind) {
    case TestFn::Kind::constant:
      zero = testfn.c == 0.0;
      break;
    case TestFn::Kind::coordinate:
      if (testfn.axis < 0 || testfn.axis >= d)
        throw ConfigError(who + ": test function axis out of range");
      break;
    case TestFn::Kind::affine:
      if (static_cast<int>(testfn.gradient.size()) != d)
        throw ConfigError(who + ": affine test function needs one gradient entry per axis");
      zero = testfn.base == 0.0 &&
             std::all_of(testfn.gradient.begin(), testfn.gradient.end(),
                         [](double g) { return g == 0.0; });
      break;
    case TestFn::Kind::custom: {
      if (!testfn.fn) throw ConfigError(who + ": custom test function is empty");
      // Spot check on a deterministic lattice of the region.
      const Box b = region.resolve(window);
      std::vector<double> x(d);
      zero = true;
      for (int i = 0; i < 64 && zero; ++i) {
        unsigned h = static_cast<unsigned>(i) * 2654435761u;
        for (int a = 0; a < d; ++a) {
          h = h * 1664525u + 1013904223u;
          x[a] = b.lo[a] + b.side(a) * ((h >> 8) / 16777216.0);
        }
        zero = testfn(x) == 0.0;
      }
      break;
    }
  }
  if (zero)
    throw ConfigError(who + ": test function must not vanish identically (f_i = 0 is excluded)");
}

// ---------------------------------------------------------------------------

void contributions(ScoreContext& ctx, const StatisticSpec& spec, std::vector<double>& out,
                   int threads) {
  const SpatialView& v = ctx.view();
  const int d = v.dim();
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (spec.region.contains({v.pos(i), static_cast<std::size_t>(d)})) ids.push_back(i);
  std::vector<double> sc;
  ctx.evaluate(spec.score, ids, sc, threads);
  out.assign(v.size(), 0.0);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const std::size_t i = ids[t];
    const double f = spec.testfn.is_constant_one()
                         ? 1.0
                         : spec.testfn({v.pos(i), static_cast<std::size_t>(d)});
    out[i] = f * sc[t];
  }
}

namespace {

double sum_fixed_order(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

std::vector<double> eval_vector(const SpatialView& view, double s,
                                std::span<const StatisticSpec> specs, int threads) {
  ScoreContext ctx(view, s);
  std::vector<double> values;
  values.reserve(specs.size());
  std::vector<double> c;
  for (const auto& spec : specs) {
    contributions(ctx, spec, c, threads);
    values.push_back(sum_fixed_order(c));
  }
  return values;
}

StatVector eval_vector(const PointConfig& config, std::span<const StatisticSpec> specs,
                       int threads) {
  GridIndex index(config);
  SpatialView view(index);
  StatVector out;
  out.s = config.intensity();
  out.values = eval_vector(view, config.intensity(), specs, threads);
  return out;
}

double eval_statistic(const PointConfig& config, const StatisticSpec& spec, int threads) {
  return eval_vector(config, std::span<const StatisticSpec>(&spec, 1), threads).values[0];
}

double diff1(const PointConfig& config, const StatisticSpec& spec, const MarkedPoint& z) {
  GridIndex index(config);
  SpatialView plain(index), added(index, {z});
  const double s = config.intensity();
  ScoreContext c0(plain, s), c1(added, s);
  std::vector<double> a, b;
  contributions(c0, spec, a);
  contributions(c1, spec, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += b[i] - a[i];
  return sum + b[added.extra_id(0)];
}

bool DiffResult::nonzero() const { return std::abs(value) > 1e-12 * magnitude; }

namespace {

// Base ids whose score may change when the extra point `z` of `with_z` is
// inserted into `plain`. False when no bounded set is known.
bool influence_set(const ScoreSpec& spec, const ScoreContext& plain, const ScoreContext& with_z,
                   std::size_t z, std::vector<std::size_t>& out) {
  const SpatialView& v = plain.view();
  const double s = plain.s();
  const int d = v.dim();
  double radius = -1.0;
  switch (spec.family) {
    case Family::unit:
      return true;
    case Family::rgg_degree:
    case Family::rips_volume:
      radius = spec.radius.at(s, d);
      break;
    case Family::rgg_component:
      radius = spec.k * spec.radius.at(s, d);
      break;
    case Family::rgg_subgraph:
      radius = (spec.pattern.vertices - 1) * spec.radius.at(s, d);
      break;
    case Family::critical_points:
      radius = 2.0 * spec.radius.at(s, d);
      break;
    case Family::knn_directed:
    case Family::knn_edge:
    case Family::knn_degree:
    case Family::colored_nn: {
      const int k = spec.family == Family::colored_nn ? 1 : spec.k;
      // Fewer points than the convention needs: every score may move.
      if (v.size() < static_cast<std::size_t>(k) + 2) return false;
      // Insertion only shrinks kNN balls: affected are the reverse
      // neighbors of z, their previous out-neighbors, and z's out-neighbors.
      std::vector<std::size_t> rev;
      std::vector<Neighbor> nb;
      with_z.in_neighbors(z, k, rev);
      for (std::size_t y : rev) {
        out.push_back(y);
        plain.out_neighbors(y, k, nb);
        for (const auto& e : nb) out.push_back(e.id);
      }
      with_z.out_neighbors(z, k, nb);
      for (const auto& e : nb) out.push_back(e.id);
      return true;
    }
  }
  if (!std::isfinite(radius)) return false;
  std::vector<std::size_t> near;
  with_z.view().range(with_z.view().pos(z), radius, near, z);
  out.insert(out.end(), near.begin(), near.end());
  return true;
}

double contribution(const ScoreContext& ctx, const StatisticSpec& spec, std::size_t id) {
  const SpatialView& v = ctx.view();
  const std::span<const double> x{v.pos(id), static_cast<std::size_t>(v.dim())};
  if (!spec.region.contains(x)) return 0.0;
  const double f = spec.testfn.is_constant_one() ? 1.0 : spec.testfn(x);
  return f * ctx.score(spec.score, id);
}

}  // namespace

DiffResult diff2_on_index(const GridIndex& index, double s, const StatisticSpec& spec,
                          const MarkedPoint& z1, const MarkedPoint& z2) {
  SpatialView v00(index), v10(index, {z1}), v01(index, {z2}), v11(index, {z1, z2});
  ScoreContext c00(v00, s), c10(v10, s), c01(v01, s), c11(v11, s);
  const std::size_t n = index.size();
  DiffResult r;

  std::vector<std::size_t> ids;
  const bool local = influence_set(spec.score, c00, c10, n, ids) &&
                     influence_set(spec.score, c00, c01, n, ids);
  std::vector<double> a00, a10, a01, a11;
  if (local) {
    std::vector<std::size_t> base;
    for (std::size_t i : ids)
      if (i < n) base.push_back(i);
    std::sort(base.begin(), base.end());
    base.erase(std::unique(base.begin(), base.end()), base.end());
    for (std::size_t i : base) {
      a00.push_back(contribution(c00, spec, i));
      a10.push_back(contribution(c10, spec, i));
      a01.push_back(contribution(c01, spec, i));
      a11.push_back(contribution(c11, spec, i));
    }
    a10.push_back(contribution(c10, spec, n));
    a01.push_back(contribution(c01, spec, n));
    a11.push_back(contribution(c11, spec, n));
    a11.push_back(contribution(c11, spec, n + 1));
  } else {
    contributions(c00, spec, a00);
    contributions(c10, spec, a10);
    contributions(c01, spec, a01);
    contributions(c11, spec, a11);
  }
  const std::size_t m = a00.size();
  double base = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    // Grouped so that swapping z1 and z2 gives the identical value.
    base += (a11[i] + a00[i]) - (a10[i] + a01[i]);
    r.magnitude += std::abs(a11[i]) + std::abs(a00[i]) + std::abs(a10[i]) + std::abs(a01[i]);
  }
  const double t1 = a11[m] - a10[m];
  const double t2 = a11[m + 1] - a01[m];
  r.magnitude += std::abs(a11[m]) + std::abs(a10[m]) + std::abs(a11[m + 1]) + std::abs(a01[m]);
  r.value = base + (t1 + t2);
  return r;
}

DiffResult diff2_detail(const PointConfig& config, const StatisticSpec& spec,
                        const MarkedPoint& z1, const MarkedPoint& z2) {
  GridIndex index(config);
  return diff2_on_index(index, config.intensity(), spec, z1, z2);
}

double diff2(const PointConfig& config, const StatisticSpec& spec, const MarkedPoint& z1,
             const MarkedPoint& z2) {
  return diff2_detail(config, spec, z1, z2).value;
}

void wilson_interval(std::size_t k, std::size_t n, double z, double& lo, double& hi) {
  if (n == 0) {
    lo = 0.0;
    hi = 1.0;
    return;
  }
  const double nn = static_cast<double>(n);
  const double p = k / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  lo = std::max(0.0, center - half);
  hi = std::min(1.0, center + half);
}

std::vector<ProbeRow> stab_probe(const StatisticSpec& spec, const WindowSpec& window, double s,
                                 std::span<const double> separations, std::size_t reps,
                                 std::uint64_t seed, const ProbeOptions& opts) {
  window.validate();
  spec.validate(window);
  if (spec.score.needs_colors() && opts.colors.empty())
    throw SpecError("stab_probe: colored scores need color probabilities");
  const int d = window.dim();
  std::vector<double> anchor = opts.anchor.empty() ? window.box.center() : opts.anchor;
  if (static_cast<int>(anchor.size()) != d) throw ConfigError("probe anchor dimension mismatch");

  const std::size_t m = separations.size();
  // hits[rep * m + k]
  std::vector<char> hits(reps * m, 0);
  parallel_for(reps, opts.threads, [&](std::size_t rep) {
    PointConfig cfg = sample_poisson(window, s, derive_seed(seed, s, rep, StreamTag::probe));
    Engine mark_eng = make_engine(seed, s, rep, StreamTag::marks);
    Mark m1, m2;
    if (!opts.colors.empty()) {
      cfg = attach_colors(cfg, opts.colors, mark_eng());
      std::discrete_distribution<int> pick(opts.colors.begin(), opts.colors.end());
      m1 = Mark::of_color(pick(mark_eng) + 1);
      m2 = Mark::of_color(pick(mark_eng) + 1);
    }
    const GridIndex index(cfg);
    MarkedPoint z1{anchor, m1};
    for (std::size_t k = 0; k < m; ++k) {
      MarkedPoint z2{anchor, m2};
      z2.pos[0] += separations[k];
      hits[rep * m + k] = diff2_on_index(index, s, spec, z1, z2).nonzero();
    }
  });

  std::vector<ProbeRow> rows(m);
  for (std::size_t k = 0; k < m; ++k) {
    ProbeRow& r = rows[k];
    r.separation = separations[k];
    r.reps = reps;
    for (std::size_t rep = 0; rep < reps; ++rep) r.nonzero += hits[rep * m + k];
    r.estimate = reps ? static_cast<double>(r.nonzero) / reps : 0.0;
    wilson_interval(r.nonzero, reps, 1.959963984540054, r.ci_lo, r.ci_hi);
  }
  return rows;
}

}  // namespace stablab
