#pragma once

// Score-function catalog. A score maps (point, configuration) to a real;
// statistics are region-restricted, f-weighted sums of scores.

#include <atomic>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stablab/spatial.hpp"

namespace stablab {

enum class Family {
  unit,
  knn_edge,
  knn_directed,
  knn_degree,
  colored_nn,
  rgg_component,
  rgg_degree,
  rgg_subgraph,
  rips_volume,
  critical_points,
};

const char* family_name(Family f);
/// Throws SpecError for an unknown name.
Family parse_family(const std::string& name);
std::vector<Family> all_families();

enum class RadiusRule { fixed, scaled, infinite };

const char* radius_rule_name(RadiusRule r);
RadiusRule parse_radius_rule(const std::string& name);

/// Connection radius: a fixed r, the scaled r_s = rho * s^{-1/d}, or infinity.
struct Radius {
  RadiusRule rule = RadiusRule::scaled;
  double value = 1.0;

  static Radius fixed(double r) { return {RadiusRule::fixed, r}; }
  static Radius scaled(double rho) { return {RadiusRule::scaled, rho}; }
  static Radius infinite() { return {RadiusRule::infinite, 0.0}; }
  double at(double s, int d) const;
  bool operator==(const Radius&) const = default;
};

/// Small connected pattern graph for subgraph counts (at most 5 vertices).
struct Pattern {
  int vertices = 2;
  std::vector<std::pair<int, int>> edges{{0, 1}};

  static Pattern edge() { return {}; }
  static Pattern triangle() { return {3, {{0, 1}, {1, 2}, {0, 2}}}; }
  static Pattern path(int n);
  static Pattern star(int leaves);
  static Pattern complete(int n);

  /// Adjacency bitmask row per vertex.
  std::vector<unsigned> adjacency() const;
  /// Number of vertex permutations preserving the edge set.
  int automorphisms() const;
  /// Throws SpecError unless 1..5 vertices, simple edges, connected.
  void validate() const;
  bool operator==(const Pattern&) const = default;
};

inline constexpr int kMaxPatternVertices = 5;

struct ScoreSpec {
  Family family = Family::unit;
  int k = 1;
  double q = 1.0;
  int j = 0;
  Radius radius;
  double alpha = 1.0;
  /// Multiply by s^{q/d} (kNN weights) or s^{alpha k/d} (Rips volumes).
  bool prefactor = true;
  Pattern pattern;

  static ScoreSpec unit() { return {}; }
  static ScoreSpec knn_edge(int k, double q, bool prefactor = true);
  static ScoreSpec knn_directed(int k, double q, bool prefactor = true);
  static ScoreSpec knn_degree(int k, int j);
  static ScoreSpec colored_nn(int j);
  static ScoreSpec rgg_component(int k, Radius r);
  static ScoreSpec rgg_degree(int j, Radius r);
  static ScoreSpec rgg_subgraph(Pattern p, Radius r);
  static ScoreSpec rips_volume(int k, Radius r, double alpha, bool prefactor = true);
  static ScoreSpec critical_points(int k, Radius r);

  /// Throws SpecError on parameters outside the documented ranges.
  void validate(int dim) const;
  std::string describe() const;
  bool uses_knn() const;
  bool uses_radius() const;
  bool needs_colors() const { return family == Family::colored_nn; }
  bool operator==(const ScoreSpec&) const = default;
};

/// True when the family is a scaled score, i.e. evaluating it at intensity
/// s equals evaluating the s = 1 parent on the dilated configuration.
bool is_scaled(const ScoreSpec& spec);

/// Distance beyond which the unscaled parent at intensity u is (almost
/// surely, or up to a 1e-3 tail for kNN families) unaffected by changes.
double interaction_range(const ScoreSpec& spec, int dim, double u = 1.0);

/// Volume kappa_d of the unit ball in R^d.
double unit_ball_volume(int d);

/// Radius r with P(k-th neighbor distance > r) = tail for a rate-u Poisson
/// process in R^d.
double knn_distance_quantile(int k, int dim, double u, double tail);

/// Size caps for exhaustive enumeration with an infinite radius.
std::size_t critical_point_cap(int k);

/// Evaluation context for one point set at intensity s. Global neighbor
/// lists are built on demand by evaluate_all and reused across specs.
class ScoreContext {
 public:
  ScoreContext(const SpatialView& view, double s);

  const SpatialView& view() const { return *view_; }
  double s() const { return s_; }

  /// Score of point `id` using only local queries.
  double score(const ScoreSpec& spec, std::size_t id) const;
  /// Scores of the given ids (all points when ids is empty), written in
  /// the same order. Uses global kNN lists where they help.
  void evaluate(const ScoreSpec& spec, std::span<const std::size_t> ids,
                std::vector<double>& out, int threads = 1);

  /// Number of evaluations that hit the fewer-than-k+1-points convention.
  std::size_t degenerate_events() const { return degenerate_.load(); }

  /// Out-neighbors V_k of id (exact, tie-broken order).
  void out_neighbors(std::size_t id, int k, std::vector<Neighbor>& out) const;
  /// All points y with id in V_k(y).
  void in_neighbors(std::size_t id, int k, std::vector<std::size_t>& out) const;

 private:
  void prepare_knn(int k, int threads);
  const std::vector<std::vector<std::size_t>>& in_lists(int k) const;
  double score_impl(const ScoreSpec& spec, std::size_t id) const;

  const SpatialView* view_;
  double s_;
  int global_k_ = 0;
  std::vector<std::vector<std::size_t>> out_lists_;
  std::map<int, std::vector<std::vector<std::size_t>>> in_lists_;
  mutable std::atomic<std::size_t> degenerate_{0};
};

}  // namespace stablab
