#include "stablab/scores.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "stablab/error.hpp"
#include "stablab/parallel.hpp"

namespace stablab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr std::pair<Family, const char*> kFamilyNames[] = {
    {Family::unit, "unit"},
    {Family::knn_edge, "knn_edge"},
    {Family::knn_directed, "knn_directed"},
    {Family::knn_degree, "knn_degree"},
    {Family::colored_nn, "colored_nn"},
    {Family::rgg_component, "rgg_component"},
    {Family::rgg_degree, "rgg_degree"},
    {Family::rgg_subgraph, "rgg_subgraph"},
    {Family::rips_volume, "rips_volume"},
    {Family::critical_points, "critical_points"},
};

}  // namespace

double unit_ball_volume(int d) { return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0); }

const char* family_name(Family f) {
  for (auto& [fam, name] : kFamilyNames)
    if (fam == f) return name;
  return "?";
}

Family parse_family(const std::string& name) {
  for (auto& [fam, n] : kFamilyNames)
    if (name == n) return fam;
  throw SpecError("unknown score family '" + name + "'");
}

std::vector<Family> all_families() {
  std::vector<Family> out;
  for (auto& [fam, n] : kFamilyNames) out.push_back(fam);
  return out;
}

const char* radius_rule_name(RadiusRule r) {
  switch (r) {
    case RadiusRule::fixed:
      return "fixed";
    case RadiusRule::scaled:
      return "scaled";
    case RadiusRule::infinite:
      return "infinite";
  }
  return "?";
}

RadiusRule parse_radius_rule(const std::string& name) {
  if (name == "fixed") return RadiusRule::fixed;
  if (name == "scaled") return RadiusRule::scaled;
  if (name == "infinite") return RadiusRule::infinite;
  throw SpecError("unknown radius rule '" + name + "'");
}

double Radius::at(double s, int d) const {
  switch (rule) {
    case RadiusRule::fixed:
      return value;
    case RadiusRule::scaled:
      return value * std::pow(s, -1.0 / d);
    case RadiusRule::infinite:
      return kInf;
  }
  return kInf;
}

// ---------------------------------------------------------------------------

Pattern Pattern::path(int n) {
  Pattern p{n, {}};
  for (int i = 0; i + 1 < n; ++i) p.edges.emplace_back(i, i + 1);
  return p;
}

Pattern Pattern::star(int leaves) {
  Pattern p{leaves + 1, {}};
  for (int i = 1; i <= leaves; ++i) p.edges.emplace_back(0, i);
  return p;
}

Pattern Pattern::complete(int n) {
  Pattern p{n, {}};
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) p.edges.emplace_back(i, j);
  return p;
}

std::vector<unsigned> Pattern::adjacency() const {
  std::vector<unsigned> adj(std::max(vertices, 0), 0u);
  for (auto [a, b] : edges) {
    adj[a] |= 1u << b;
    adj[b] |= 1u << a;
  }
  return adj;
}

int Pattern::automorphisms() const {
  const auto adj = adjacency();
  std::vector<int> perm(vertices);
  std::iota(perm.begin(), perm.end(), 0);
  int count = 0;
  do {
    bool ok = true;
    for (auto [a, b] : edges)
      if (!(adj[perm[a]] >> perm[b] & 1u)) {
        ok = false;
        break;
      }
    count += ok;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return count;
}

void Pattern::validate() const {
  if (vertices < 1 || vertices > kMaxPatternVertices)
    throw SpecError("pattern must have 1 to 5 vertices");
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto [a, b] = edges[e];
    if (a < 0 || b < 0 || a >= vertices || b >= vertices || a == b)
      throw SpecError("pattern edge out of range or a loop");
    for (std::size_t f = 0; f < e; ++f) {
      auto [c, dd] = edges[f];
      if ((a == c && b == dd) || (a == dd && b == c)) throw SpecError("duplicate pattern edge");
    }
  }
  const auto adj = adjacency();
  unsigned seen = 1u, frontier = 1u;
  while (frontier) {
    unsigned next = 0;
    for (int v = 0; v < vertices; ++v)
      if (frontier >> v & 1u) next |= adj[v];
    frontier = next & ~seen;
    seen |= next;
  }
  if (seen != (1u << vertices) - 1u) throw SpecError("pattern graph must be connected");
}

// ---------------------------------------------------------------------------

ScoreSpec ScoreSpec::knn_edge(int k, double q, bool prefactor) {
  ScoreSpec s;
  s.family = Family::knn_edge;
  s.k = k;
  s.q = q;
  s.prefactor = prefactor;
  return s;
}

ScoreSpec ScoreSpec::knn_directed(int k, double q, bool prefactor) {
  ScoreSpec s = knn_edge(k, q, prefactor);
  s.family = Family::knn_directed;
  return s;
}

ScoreSpec ScoreSpec::knn_degree(int k, int j) {
  ScoreSpec s;
  s.family = Family::knn_degree;
  s.k = k;
  s.j = j;
  return s;
}

ScoreSpec ScoreSpec::colored_nn(int j) {
  ScoreSpec s;
  s.family = Family::colored_nn;
  s.j = j;
  return s;
}

ScoreSpec ScoreSpec::rgg_component(int k, Radius r) {
  ScoreSpec s;
  s.family = Family::rgg_component;
  s.k = k;
  s.radius = r;
  return s;
}

ScoreSpec ScoreSpec::rgg_degree(int j, Radius r) {
  ScoreSpec s;
  s.family = Family::rgg_degree;
  s.j = j;
  s.radius = r;
  return s;
}

ScoreSpec ScoreSpec::rgg_subgraph(Pattern p, Radius r) {
  ScoreSpec s;
  s.family = Family::rgg_subgraph;
  s.pattern = std::move(p);
  s.k = s.pattern.vertices;
  s.radius = r;
  return s;
}

ScoreSpec ScoreSpec::rips_volume(int k, Radius r, double alpha, bool prefactor) {
  ScoreSpec s;
  s.family = Family::rips_volume;
  s.k = k;
  s.radius = r;
  s.alpha = alpha;
  s.prefactor = prefactor;
  return s;
}

ScoreSpec ScoreSpec::critical_points(int k, Radius r) {
  ScoreSpec s;
  s.family = Family::critical_points;
  s.k = k;
  s.radius = r;
  return s;
}

bool ScoreSpec::uses_knn() const {
  return family == Family::knn_edge || family == Family::knn_directed ||
         family == Family::knn_degree || family == Family::colored_nn;
}

bool ScoreSpec::uses_radius() const {
  return family == Family::rgg_component || family == Family::rgg_degree ||
         family == Family::rgg_subgraph || family == Family::rips_volume ||
         family == Family::critical_points;
}

void ScoreSpec::validate(int dim) const {
  const std::string name = family_name(family);
  if (uses_radius()) {
    if (radius.rule == RadiusRule::infinite) {
      if (family != Family::critical_points)
        throw SpecError(name + ": an infinite radius is only allowed for critical points");
    } else if (!(radius.value > 0.0) || !std::isfinite(radius.value)) {
      throw SpecError(name + ": radius must be positive and finite");
    }
  }
  switch (family) {
    case Family::unit:
      break;
    case Family::knn_edge:
    case Family::knn_directed:
      if (k < 1) throw SpecError(name + ": k must be >= 1");
      if (!(q >= 0.0)) throw SpecError(name + ": q must be >= 0");
      break;
    case Family::knn_degree:
      if (k < 1) throw SpecError(name + ": k must be >= 1");
      if (j < 0) throw SpecError(name + ": j must be >= 0");
      break;
    case Family::colored_nn:
      if (j < 1) throw SpecError(name + ": color j must be >= 1");
      break;
    case Family::rgg_component:
      if (k < 1) throw SpecError(name + ": k must be >= 1");
      break;
    case Family::rgg_degree:
      if (j < 0) throw SpecError(name + ": j must be >= 0");
      break;
    case Family::rgg_subgraph:
      pattern.validate();
      if (k != pattern.vertices) throw SpecError(name + ": k must equal the pattern size");
      break;
    case Family::rips_volume:
    case Family::critical_points:
      if (k < 1 || k > dim) throw SpecError(name + ": k must lie in [1, d]");
      if (family == Family::rips_volume && !(alpha >= 0.0))
        throw SpecError(name + ": alpha must be >= 0");
      break;
  }
}

std::string ScoreSpec::describe() const {
  std::ostringstream os;
  os << family_name(family);
  auto rad = [&] {
    os << ",r=" << radius_rule_name(radius.rule);
    if (radius.rule != RadiusRule::infinite) os << ":" << radius.value;
  };
  switch (family) {
    case Family::unit:
      break;
    case Family::knn_edge:
    case Family::knn_directed:
      os << "(k=" << k << ",q=" << q << (prefactor ? "" : ",raw") << ")";
      break;
    case Family::knn_degree:
      os << "(k=" << k << ",j=" << j << ")";
      break;
    case Family::colored_nn:
      os << "(j=" << j << ")";
      break;
    case Family::rgg_component:
      os << "(k=" << k;
      rad();
      os << ")";
      break;
    case Family::rgg_degree:
      os << "(j=" << j;
      rad();
      os << ")";
      break;
    case Family::rgg_subgraph:
      os << "(v=" << pattern.vertices << ",e=" << pattern.edges.size();
      rad();
      os << ")";
      break;
    case Family::rips_volume:
      os << "(k=" << k << ",alpha=" << alpha << (prefactor ? "" : ",raw");
      rad();
      os << ")";
      break;
    case Family::critical_points:
      os << "(k=" << k;
      rad();
      os << ")";
      break;
  }
  return os.str();
}

bool is_scaled(const ScoreSpec& spec) {
  switch (spec.family) {
    case Family::unit:
    case Family::knn_degree:
    case Family::colored_nn:
      return true;
    case Family::knn_edge:
    case Family::knn_directed:
      return spec.prefactor || spec.q == 0.0;
    case Family::rgg_component:
    case Family::rgg_degree:
    case Family::rgg_subgraph:
      return spec.radius.rule == RadiusRule::scaled;
    case Family::rips_volume:
      return spec.radius.rule == RadiusRule::scaled && (spec.prefactor || spec.alpha == 0.0);
    case Family::critical_points:
      return spec.radius.rule != RadiusRule::fixed;
  }
  return false;
}

double knn_distance_quantile(int k, int dim, double u, double tail) {
  // P(D_k > r) = P(Poisson(lambda) < k) with lambda = u kappa_d r^d.
  auto upper_tail = [k](double lambda) {
    double term = std::exp(-lambda), sum = term;
    for (int i = 1; i < k; ++i) {
      term *= lambda / i;
      sum += term;
    }
    return sum;
  };
  double lo = 0.0, hi = 1.0;
  while (upper_tail(hi) > tail) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (upper_tail(mid) > tail ? lo : hi) = mid;
  }
  return std::pow(hi / (u * unit_ball_volume(dim)), 1.0 / dim);
}

double interaction_range(const ScoreSpec& spec, int dim, double u) {
  const double rho = spec.radius.value;
  switch (spec.family) {
    case Family::unit:
      return 0.0;
    case Family::knn_edge:
    case Family::knn_directed:
    case Family::knn_degree:
      return 2.0 * knn_distance_quantile(spec.k, dim, u, 1e-3);
    case Family::colored_nn:
      return 2.0 * knn_distance_quantile(1, dim, u, 1e-3);
    case Family::rgg_degree:
    case Family::rips_volume:
      return rho;
    case Family::rgg_component:
      return spec.k * rho;
    case Family::rgg_subgraph:
      return (spec.pattern.vertices - 1) * rho;
    case Family::critical_points:
      if (spec.radius.rule == RadiusRule::infinite)
        return 2.0 * knn_distance_quantile(spec.k + 1, dim, u, 1e-3);
      return 2.0 * rho;
  }
  return 0.0;
}

std::size_t critical_point_cap(int k) {
  switch (k) {
    case 1:
      return 2000;
    case 2:
      return 300;
    case 3:
      return 80;
    default:
      return 40;
  }
}

// ---------------------------------------------------------------------------

namespace {

// Directions on the surface of [-1,1]^d sampled with spacing 2/M, then
// normalized. Any unit vector is within chord sqrt(d-1)/M of one of them.
constexpr int kDirLattice = 4;
constexpr int kMaxCertDim = 4;

const std::vector<double>& certificate_directions(int d) {
  static const auto table = [] {
    std::vector<std::vector<double>> t(kMaxCertDim + 1);
    for (int dim = 1; dim <= kMaxCertDim; ++dim) {
      int idx[kMaxCertDim] = {};
      for (;;) {
        bool surface = false;
        double norm2 = 0.0, v[kMaxCertDim];
        for (int a = 0; a < dim; ++a) {
          v[a] = -1.0 + 2.0 * idx[a] / kDirLattice;
          surface |= idx[a] == 0 || idx[a] == kDirLattice;
          norm2 += v[a] * v[a];
        }
        if (surface)
          for (int a = 0; a < dim; ++a) t[dim].push_back(v[a] / std::sqrt(norm2));
        int a = 0;
        for (; a < dim; ++a) {
          if (++idx[a] <= kDirLattice) break;
          idx[a] = 0;
        }
        if (a == dim) break;
      }
    }
    return t;
  }();
  return table[d];
}

double window_extent(const SpatialView& v) {
  const WindowSpec& w = v.index().config().window();
  double diag2 = 0.0;
  for (int a = 0; a < w.dim(); ++a) {
    double side = w.box.side(a);
    // Extras may sit outside the box on hard windows.
    if (!v.metric().torus)
      for (std::size_t e = 0; e < v.extra_count(); ++e) {
        const double x = v.pos(v.extra_id(e))[a];
        side = std::max({side, x - w.box.lo[a], w.box.hi[a] - x});
      }
    diag2 += side * side;
  }
  return std::sqrt(diag2);
}

struct Scratch {
  std::vector<Neighbor> nb;
  std::vector<std::size_t> ids;
};

// Connected vertex sets of size `target` containing local vertex 0, each
// visited exactly once (ESU with vertex 0 as root).
template <class Visit>
void enumerate_connected(const std::vector<std::vector<int>>& adj, int target, Visit&& visit) {
  const int m = static_cast<int>(adj.size());
  std::vector<int> sub{0};
  auto rec = [&](auto&& self, std::vector<int> ext) -> void {
    if (static_cast<int>(sub.size()) == target) {
      visit(sub);
      return;
    }
    // Closed neighborhood of the current sub set.
    std::vector<char> closed(m, 0);
    for (int v : sub) {
      closed[v] = 1;
      for (int u : adj[v]) closed[u] = 1;
    }
    while (!ext.empty()) {
      const int w = ext.back();
      ext.pop_back();
      std::vector<int> next = ext;
      for (int u : adj[w])
        if (!closed[u] && std::find(next.begin(), next.end(), u) == next.end()) next.push_back(u);
      sub.push_back(w);
      self(self, std::move(next));
      sub.pop_back();
    }
  };
  rec(rec, adj[0]);
}

}  // namespace

ScoreContext::ScoreContext(const SpatialView& view, double s) : view_(&view), s_(s) {
  if (!(s > 0.0)) throw ConfigError("intensity s must be positive for score evaluation");
}

void ScoreContext::out_neighbors(std::size_t id, int k, std::vector<Neighbor>& out) const {
  const SpatialView& v = *view_;
  if (global_k_ >= k && static_cast<std::size_t>(k) <= out_lists_[id].size()) {
    out.clear();
    const auto& list = out_lists_[id];
    for (int i = 0; i < k; ++i)
      out.push_back({v.metric().dist2(v.pos(id), v.pos(list[i])), list[i]});
    return;
  }
  v.knn(v.pos(id), k, out, id);
}

const std::vector<std::vector<std::size_t>>& ScoreContext::in_lists(int k) const {
  return in_lists_.at(k);
}

void ScoreContext::in_neighbors(std::size_t id, int k, std::vector<std::size_t>& out) const {
  out.clear();
  if (auto it = in_lists_.find(k); it != in_lists_.end()) {
    out = it->second[id];
    return;
  }
  const SpatialView& v = *view_;
  const int d = v.dim();
  const double* x = v.pos(id);
  std::vector<Neighbor> nb;
  v.knn(x, k, nb, id);

  // Grow t until every point farther than t provably has k points closer
  // to it than x.
  const double extent = window_extent(v);
  double limit = extent;
  if (v.metric().torus) {
    limit = kInf;
    for (int a = 0; a < d; ++a) limit = std::min(limit, 0.5 * v.metric().period[a]);
  }
  std::vector<std::size_t> cand;
  bool all = d > kMaxCertDim;
  double t = 2.0 * std::sqrt(nb.back().d2);
  if (!(t > 0.0)) t = v.index().min_cell_width();
  const double chord = std::sqrt(static_cast<double>(d - 1)) / kDirLattice;
  while (!all) {
    if (t >= limit) {
      all = true;
      break;
    }
    const auto& dirs = certificate_directions(d);
    const double rad = 0.5 * t * (1.0 - chord);
    bool ok = true;
    double c[kMaxDim];
    const std::size_t skip[1] = {id};
    for (std::size_t u = 0; ok && u < dirs.size() / d; ++u) {
      for (int a = 0; a < d; ++a) c[a] = x[a] + 0.5 * t * dirs[u * d + a];
      ok = v.count_in_ball(c, rad, false, static_cast<std::size_t>(k), skip) >= static_cast<std::size_t>(k);
    }
    if (ok) break;
    t *= 1.5;
  }
  v.range(x, all ? kInf : t, cand, id);
  for (std::size_t y : cand) {
    v.knn(v.pos(y), k, nb, y);
    for (const auto& n : nb)
      if (n.id == id) {
        out.push_back(y);
        break;
      }
  }
  std::sort(out.begin(), out.end());
}

void ScoreContext::prepare_knn(int k, int threads) {
  const SpatialView& v = *view_;
  const std::size_t n = v.size();
  if (n == 0) return;
  const int kk = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(k), n - 1));
  if (global_k_ < k) {
    out_lists_.assign(n, {});
    parallel_for(n, threads, [&](std::size_t i) {
      std::vector<Neighbor> nb;
      v.knn(v.pos(i), kk, nb, i);
      auto& list = out_lists_[i];
      list.reserve(nb.size());
      for (auto& e : nb) list.push_back(e.id);
    });
    global_k_ = k;
    in_lists_.clear();
  }
  if (!in_lists_.count(k)) {
    auto& in = in_lists_[k];
    in.assign(n, {});
    for (std::size_t i = 0; i < n; ++i)
      for (int r = 0; r < kk; ++r) in[out_lists_[i][r]].push_back(i);
  }
}

void ScoreContext::evaluate(const ScoreSpec& spec, std::span<const std::size_t> ids,
                            std::vector<double>& out, int threads) {
  const std::size_t n_ids = ids.empty() ? view_->size() : ids.size();
  if (spec.family == Family::knn_edge || spec.family == Family::knn_degree ||
      spec.family == Family::colored_nn) {
    const int k = spec.family == Family::colored_nn ? 1 : spec.k;
    if (view_->size() > static_cast<std::size_t>(k)) prepare_knn(k, threads);
  }
  out.assign(n_ids, 0.0);
  parallel_for(n_ids, threads, [&](std::size_t i) {
    out[i] = score_impl(spec, ids.empty() ? i : ids[i]);
  });
}

double ScoreContext::score(const ScoreSpec& spec, std::size_t id) const {
  return score_impl(spec, id);
}

double ScoreContext::score_impl(const ScoreSpec& spec, std::size_t id) const {
  const SpatialView& v = *view_;
  const int d = v.dim();
  const double* x = v.pos(id);
  const std::size_t others = v.size() - 1;

  auto degenerate = [&](int k) {
    if (others < static_cast<std::size_t>(k)) {
      degenerate_.fetch_add(1, std::memory_order_relaxed);
      return true;
    }
    return false;
  };

  switch (spec.family) {
    case Family::unit:
      return 1.0;

    case Family::knn_directed: {
      if (degenerate(spec.k)) return 0.0;
      std::vector<Neighbor> nb;
      out_neighbors(id, spec.k, nb);
      double sum = 0.0;
      for (const auto& e : nb) sum += std::pow(std::sqrt(e.d2), spec.q);
      return spec.prefactor ? sum * std::pow(s_, spec.q / d) : sum;
    }

    case Family::knn_edge: {
      if (degenerate(spec.k)) return 0.0;
      std::vector<Neighbor> nb, back;
      out_neighbors(id, spec.k, nb);
      double sum = 0.0;
      for (const auto& e : nb) {
        out_neighbors(e.id, spec.k, back);
        const bool mutual =
            std::any_of(back.begin(), back.end(), [id](const Neighbor& b) { return b.id == id; });
        const double w = std::pow(std::sqrt(e.d2), spec.q);
        sum += mutual ? 0.5 * w : w;
      }
      return spec.prefactor ? sum * std::pow(s_, spec.q / d) : sum;
    }

    case Family::knn_degree: {
      if (degenerate(spec.k)) return 0.0;
      std::vector<Neighbor> nb;
      std::vector<std::size_t> in;
      out_neighbors(id, spec.k, nb);
      in_neighbors(id, spec.k, in);
      std::size_t deg = in.size();
      for (const auto& e : nb)
        if (!std::binary_search(in.begin(), in.end(), e.id)) ++deg;
      return deg == static_cast<std::size_t>(spec.j) ? 1.0 : 0.0;
    }

    case Family::colored_nn: {
      const Mark& mx = v.mark(id);
      if (mx.kind != Mark::Kind::color) throw SpecError("colored_nn needs colored points");
      if (degenerate(1)) return 0.0;
      std::vector<Neighbor> nb;
      std::vector<std::size_t> in;
      out_neighbors(id, 1, nb);
      in_neighbors(id, 1, in);
      auto colored = [&](std::size_t y) {
        const Mark& my = v.mark(y);
        if (my.kind != Mark::Kind::color) throw SpecError("colored_nn needs colored points");
        return mx.color == spec.j && my.color == spec.j;
      };
      double edges = 0.0;
      for (std::size_t y : in) edges += colored(y);
      if (!std::binary_search(in.begin(), in.end(), nb[0].id)) edges += colored(nb[0].id);
      return 0.5 * edges;
    }

    case Family::rgg_degree: {
      std::vector<std::size_t> nbr;
      v.range(x, spec.radius.at(s_, d), nbr, id);
      return nbr.size() == static_cast<std::size_t>(spec.j) ? 1.0 : 0.0;
    }

    case Family::rgg_component: {
      const double r = spec.radius.at(s_, d);
      std::vector<std::size_t> comp{id}, nbr;
      for (std::size_t head = 0; head < comp.size(); ++head) {
        v.range(v.pos(comp[head]), r, nbr, comp[head]);
        for (std::size_t y : nbr)
          if (std::find(comp.begin(), comp.end(), y) == comp.end()) {
            comp.push_back(y);
            if (comp.size() > static_cast<std::size_t>(spec.k)) return 0.0;
          }
      }
      return comp.size() == static_cast<std::size_t>(spec.k) ? 1.0 / spec.k : 0.0;
    }

    case Family::rgg_subgraph: {
      const Pattern& pat = spec.pattern;
      const int kp = pat.vertices;
      if (kp == 1) return 1.0;
      const double r = spec.radius.at(s_, d);
      if (kp == 2) {
        // Single edge: every neighbor is one copy, shared by two endpoints.
        const std::size_t self[1] = {id};
        return 0.5 * static_cast<double>(
                         v.count_in_ball(x, r, false, std::numeric_limits<std::size_t>::max(), self));
      }
      const double r2 = r * r;
      std::vector<std::size_t> local{id}, nbr;
      v.range(x, (kp - 1) * r, nbr, id);
      std::sort(nbr.begin(), nbr.end(), [&](auto a, auto b) { return v.position_less(a, b); });
      local.insert(local.end(), nbr.begin(), nbr.end());
      const int m = static_cast<int>(local.size());
      std::vector<std::vector<int>> adj(m);
      std::vector<char> mat(static_cast<std::size_t>(m) * m, 0);
      for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b)
          if (v.metric().dist2(v.pos(local[a]), v.pos(local[b])) <= r2) {
            adj[a].push_back(b);
            adj[b].push_back(a);
            mat[a * m + b] = mat[b * m + a] = 1;
          }
      const int aut = pat.automorphisms();
      long long copies = 0;
      enumerate_connected(adj, kp, [&](const std::vector<int>& set) {
        std::vector<int> perm(set);
        std::sort(perm.begin(), perm.end());
        long long maps = 0;
        do {
          bool ok = true;
          for (auto [pa, pb] : pat.edges)
            if (!mat[perm[pa] * m + perm[pb]]) {
              ok = false;
              break;
            }
          maps += ok;
        } while (std::next_permutation(perm.begin(), perm.end()));
        copies += maps;
      });
      return static_cast<double>(copies) / aut / kp;
    }

    case Family::rips_volume: {
      const int k = spec.k;
      const double r = spec.radius.at(s_, d);
      const double r2 = r * r;
      std::vector<std::size_t> nbr;
      v.range(x, r, nbr, id);
      std::sort(nbr.begin(), nbr.end(), [&](auto a, auto b) { return v.position_less(a, b); });
      const int m = static_cast<int>(nbr.size());
      if (m < k) return 0.0;
      // Pairwise squared distances; index 0 is x itself.
      const int n1 = m + 1;
      std::vector<double> dd(static_cast<std::size_t>(n1) * n1, 0.0);
      for (int a = 0; a < m; ++a) {
        dd[a + 1] = dd[(a + 1) * n1] = v.metric().dist2(x, v.pos(nbr[a]));
        for (int b = a + 1; b < m; ++b)
          dd[(a + 1) * n1 + b + 1] = dd[(b + 1) * n1 + a + 1] =
              v.metric().dist2(v.pos(nbr[a]), v.pos(nbr[b]));
      }
      auto adjacent = [&](int a, int b) { return dd[(a + 1) * n1 + b + 1] <= r2; };
      std::vector<int> clique;
      std::vector<double> sub(static_cast<std::size_t>(k + 1) * (k + 1), 0.0);
      double sum = 0.0;
      auto rec = [&](auto&& self, int start) -> void {
        if (static_cast<int>(clique.size()) == k) {
          for (int i = 0; i <= k; ++i)
            for (int j = 0; j <= k; ++j) {
              const int a = i == 0 ? 0 : clique[i - 1] + 1;
              const int b = j == 0 ? 0 : clique[j - 1] + 1;
              sub[i * (k + 1) + j] = dd[a * n1 + b];
            }
          sum += std::pow(simplex_volume_d2(sub, k + 1), spec.alpha);
          return;
        }
        for (int c = start; c < m; ++c) {
          bool ok = true;
          for (int u : clique)
            if (!adjacent(u, c)) {
              ok = false;
              break;
            }
          if (!ok) continue;
          clique.push_back(c);
          self(self, c + 1);
          clique.pop_back();
        }
      };
      rec(rec, 0);
      sum /= (k + 1);
      return spec.prefactor ? sum * std::pow(s_, spec.alpha * k / d) : sum;
    }

    case Family::critical_points: {
      const int k = spec.k;
      const double r = spec.radius.at(s_, d);
      std::vector<std::size_t> cand;
      if (std::isinf(r)) {
        if (v.size() > critical_point_cap(k))
          throw CapacityError("critical points with an infinite radius are capped at " +
                              std::to_string(critical_point_cap(k)) + " points for k=" +
                              std::to_string(k) + "; use a finite radius");
        v.range(x, kInf, cand, id);
      } else {
        v.range(x, 2.0 * r, cand, id);
      }
      std::sort(cand.begin(), cand.end(), [&](auto a, auto b) { return v.position_less(a, b); });
      const int m = static_cast<int>(cand.size());
      if (m < k) return 0.0;
      std::vector<double> rel(static_cast<std::size_t>(m) * d);
      for (int i = 0; i < m; ++i) v.metric().delta(x, v.pos(cand[i]), &rel[i * d]);
      std::vector<double> pts(static_cast<std::size_t>(k + 1) * d, 0.0);
      std::vector<std::size_t> members(k + 1);
      members[0] = id;
      std::vector<int> pick(k);
      double count = 0.0;
      double c[kMaxDim];
      auto rec = [&](auto&& self, int depth, int start) -> void {
        if (depth == k) {
          for (int i = 0; i < k; ++i) {
            std::copy_n(&rel[pick[i] * d], d, &pts[(i + 1) * d]);
            members[i + 1] = cand[pick[i]];
          }
          // On a torus, skip simplices whose chart depends on the base vertex.
          if (v.metric().torus) {
            double dv[kMaxDim];
            for (int i = 0; i < k; ++i)
              for (int j = i + 1; j < k; ++j) {
                v.metric().delta(v.pos(cand[pick[i]]), v.pos(cand[pick[j]]), dv);
                for (int t = 0; t < d; ++t)
                  if (std::abs(dv[t] - (rel[pick[j] * d + t] - rel[pick[i] * d + t])) > 1e-9)
                    return;
              }
          }
          const Circumsphere cs = circumsphere(pts, d);
          if (cs.degenerate || !(cs.radius > 0.0) || cs.radius > r) return;
          if (!center_in_interior(pts, d, cs.center)) return;
          for (int a = 0; a < d; ++a) c[a] = x[a] + cs.center[a];
          if (v.count_in_ball(c, cs.radius, true, 1, members) == 0) count += 1.0;
          return;
        }
        for (int i = start; i <= m - (k - depth); ++i) {
          pick[depth] = i;
          self(self, depth + 1, i + 1);
        }
      };
      rec(rec, 0, 0);
      return count / (k + 1);
    }
  }
  return 0.0;
}

}  // namespace stablab
