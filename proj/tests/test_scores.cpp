#include <doctest.h>

#include <cmath>
#include <random>

#include "catalog.hpp"
#include "oracles.hpp"
#include "stablab/error.hpp"
#include "stablab/scores.hpp"

using namespace stablab;

namespace {

std::vector<double> library_scores(const PointConfig& c, const ScoreSpec& s, int threads = 1) {
  GridIndex g(c);
  SpatialView v(g);
  ScoreContext ctx(v, c.intensity());
  std::vector<double> out;
  ctx.evaluate(s, {}, out, threads);
  return out;
}

PointConfig config_of(std::vector<std::vector<double>> pts, double s = 1.0, int d = 2) {
  Box b{std::vector<double>(d, -10.0), std::vector<double>(d, 10.0)};
  PointConfig c(WindowSpec{b, Boundary::hard, DensitySpec::constant(1.0)}, s);
  for (auto& p : pts) c.push_back(p);
  return c;
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

TEST_CASE("family names round-trip") {
  for (Family f : all_families()) CHECK(parse_family(family_name(f)) == f);
  CHECK_THROWS_AS(parse_family("nope"), SpecError);
}

TEST_CASE("knn edge score examples") {
  auto two = config_of({{0, 0}, {1, 0}});
  CHECK(library_scores(two, ScoreSpec::knn_edge(1, 1.0, false)) == std::vector<double>{0.5, 0.5});
  auto three = config_of({{0, 0}, {1, 0}, {3, 0}});
  CHECK(library_scores(three, ScoreSpec::knn_edge(1, 1.0, false)) == std::vector<double>{0.5, 0.5, 2.0});

  std::mt19937_64 eng(1);
  const PointConfig c = oracle::uniform_config(WindowSpec::unit_cube(2), 40.0, 40, eng);
  CHECK(sum(library_scores(c, ScoreSpec::knn_edge(2, 1.0, false))) ==
        doctest::Approx(oracle::knn_graph_length(c, 2, 1.0)).epsilon(1e-12));
}

TEST_CASE("knn directed score examples") {
  auto two = config_of({{0, 0}, {1, 0}});
  CHECK(sum(library_scores(two, ScoreSpec::knn_directed(1, 1.0, false))) == 2.0);
  auto three = config_of({{0, 0}, {1, 0}, {3, 0}});
  CHECK(library_scores(three, ScoreSpec::knn_directed(1, 2.0, false)) == std::vector<double>{1, 1, 4});
  std::mt19937_64 eng(2);
  const PointConfig c = oracle::uniform_config(WindowSpec::unit_cube(2), 30.0, 30, eng);
  for (double v : library_scores(c, ScoreSpec::knn_directed(3, 0.0))) CHECK(v == 3.0);
}

TEST_CASE("knn degree score examples and partition") {
  auto two = config_of({{0, 0}, {1, 0}});
  CHECK(library_scores(two, ScoreSpec::knn_degree(1, 1)) == std::vector<double>{1, 1});
  auto three = config_of({{0, 0}, {1, 0}, {3, 0}});
  CHECK(library_scores(three, ScoreSpec::knn_degree(1, 2)) == std::vector<double>{0, 1, 0});

  std::mt19937_64 eng(3);
  for (int k : {1, 2, 4}) {
    const PointConfig c = oracle::uniform_config(WindowSpec::unit_cube(2), 60.0, 60, eng);
    double total = 0.0;
    for (int j = 0; j <= 6 * k + 6; ++j) total += sum(library_scores(c, ScoreSpec::knn_degree(k, j)));
    CHECK(total == 60.0);
  }
}

TEST_CASE("colored nearest-neighbor score") {
  auto pair = config_of({{0, 0}, {1, 0}});
  pair.set_mark(0, Mark::of_color(1));
  pair.set_mark(1, Mark::of_color(1));
  CHECK(library_scores(pair, ScoreSpec::colored_nn(1)) == std::vector<double>{0.5, 0.5});
  CHECK(sum(library_scores(pair, ScoreSpec::colored_nn(2))) == 0.0);

  std::mt19937_64 eng(4);
  const PointConfig c = oracle::uniform_config(WindowSpec::unit_cube(2), 30.0, 30, eng, 3);
  double total = 0.0;
  for (int j = 1; j <= 3; ++j) total += sum(library_scores(c, ScoreSpec::colored_nn(j)));
  const double edges = oracle::knn_graph_length(c, 1, 0.0);
  CHECK(total <= edges);

  CHECK_THROWS_AS(library_scores(config_of({{0, 0}, {1, 0}}), ScoreSpec::colored_nn(1)), SpecError);
}

TEST_CASE("RGG component, degree and subgraph examples") {
  auto iso = config_of({{0, 0}, {5, 5}});
  CHECK(library_scores(iso, ScoreSpec::rgg_component(1, Radius::fixed(1.0))) == std::vector<double>{1, 1});
  CHECK(library_scores(iso, ScoreSpec::rgg_degree(0, Radius::fixed(1.0))) == std::vector<double>{1, 1});
  auto pair = config_of({{0, 0}, {0.5, 0}});
  CHECK(library_scores(pair, ScoreSpec::rgg_component(2, Radius::fixed(1.0))) == std::vector<double>{0.5, 0.5});
  CHECK(library_scores(pair, ScoreSpec::rgg_degree(1, Radius::fixed(1.0))) == std::vector<double>{1, 1});

  auto tri = config_of({{0, 0}, {0.5, 0}, {0.2, 0.3}});
  const auto t = library_scores(tri, ScoreSpec::rgg_subgraph(Pattern::triangle(), Radius::fixed(1.0)));
  for (double v : t) CHECK(v == doctest::Approx(1.0 / 3));
  // A triangle contains three 3-paths.
  CHECK(sum(library_scores(tri, ScoreSpec::rgg_subgraph(Pattern::path(3), Radius::fixed(1.0)))) ==
        doctest::Approx(3.0));

  std::mt19937_64 eng(5);
  const PointConfig c = oracle::uniform_config(WindowSpec::unit_cube(2), 50.0, 50, eng);
  const Radius r = Radius::scaled(1.5);
  double handshake = 0.0;
  for (int j = 0; j < 50; ++j) handshake += j * sum(library_scores(c, ScoreSpec::rgg_degree(j, r)));
  CHECK(handshake == doctest::Approx(2.0 * sum(library_scores(c, ScoreSpec::rgg_subgraph(Pattern::edge(), r)))));
  double verts = 0.0;
  for (int j = 0; j < 50; ++j) verts += sum(library_scores(c, ScoreSpec::rgg_degree(j, r)));
  CHECK(verts == 50.0);

  Pattern disconnected{3, {{0, 1}}};
  CHECK_THROWS_AS(ScoreSpec::rgg_subgraph(disconnected, r).validate(2), SpecError);
}

TEST_CASE("Rips volume examples") {
  auto tri = config_of({{0, 0}, {0.5, 0}, {0.2, 0.3}});
  CHECK(sum(library_scores(tri, ScoreSpec::rips_volume(2, Radius::fixed(1.0), 0.0, false))) ==
        doctest::Approx(1.0));
  // k = 1: sum over edges of length^alpha.
  CHECK(sum(library_scores(tri, ScoreSpec::rips_volume(1, Radius::fixed(1.0), 1.0, false))) ==
        doctest::Approx(0.5 + std::sqrt(0.13) + std::sqrt(0.09 + 0.09)));
  CHECK_THROWS_AS(ScoreSpec::rips_volume(3, Radius::fixed(1.0), 1.0).validate(2), SpecError);
}

TEST_CASE("critical point examples") {
  auto two = config_of({{0, 0}, {1, 0}});
  CHECK(sum(library_scores(two, ScoreSpec::critical_points(1, Radius::infinite()))) == doctest::Approx(1.0));
  auto right = config_of({{0, 0}, {1, 0}, {0, 1}});
  // Hypotenuse midpoint is not interior; the legs' diametral disks are empty.
  CHECK(sum(library_scores(right, ScoreSpec::critical_points(2, Radius::infinite()))) == 0.0);
  CHECK(sum(library_scores(right, ScoreSpec::critical_points(1, Radius::infinite()))) == doctest::Approx(2.0));
}

TEST_CASE("critical points with an infinite radius respect the size cap") {
  std::mt19937_64 eng(6);
  const std::size_t cap = critical_point_cap(2);
  const PointConfig big = oracle::uniform_config(WindowSpec::unit_cube(2), 1.0, cap + 1, eng);
  CHECK_THROWS_AS(library_scores(big, ScoreSpec::critical_points(2, Radius::infinite())), CapacityError);
}

TEST_CASE("degenerate inputs score zero and are counted") {
  auto one = config_of({{0, 0}});
  GridIndex g(one);
  SpatialView v(g);
  ScoreContext ctx(v, 1.0);
  std::vector<double> out;
  ctx.evaluate(ScoreSpec::knn_directed(1, 1.0), {}, out);
  CHECK(out == std::vector<double>{0.0});
  CHECK(ctx.degenerate_events() == 1);
}

TEST_CASE("catalog scores equal the naive oracles") {
  std::mt19937_64 eng(2024);
  for (const auto& e : oracle::catalog()) {
    CAPTURE(e.label);
    const WindowSpec w = WindowSpec::unit_cube(e.dim, e.torus ? Boundary::torus : Boundary::hard);
    for (int t = 0; t < 12; ++t) {
      const std::size_t n = 2 + (t * 13) % (e.n_max - 1);
      const PointConfig c = oracle::uniform_config(w, double(e.n_max), n, eng, e.colors);
      const auto lib = library_scores(c, e.spec, 1 + t % 2);
      const auto ref = oracle::scores(c, e.spec);
      for (std::size_t i = 0; i < n; ++i) {
        CAPTURE(i);
        CAPTURE(lib[i]);
        CAPTURE(ref[i]);
        REQUIRE(oracle::close(lib[i], ref[i]));
      }
    }
  }
}

TEST_CASE("local evaluation agrees with whole-configuration evaluation") {
  std::mt19937_64 eng(77);
  for (const auto& e : oracle::catalog()) {
    CAPTURE(e.label);
    const WindowSpec w = WindowSpec::unit_cube(e.dim, e.torus ? Boundary::torus : Boundary::hard);
    const PointConfig c = oracle::uniform_config(w, double(e.n_max), e.n_max, eng, e.colors);
    GridIndex g(c);
    SpatialView v(g);
    ScoreContext ctx(v, c.intensity());
    std::vector<double> all;
    ctx.evaluate(e.spec, {}, all);
    ScoreContext fresh(v, c.intensity());
    for (std::size_t i = 0; i < c.size(); ++i) REQUIRE(fresh.score(e.spec, i) == all[i]);
  }
}

TEST_CASE("scores are translation invariant") {
  // Dyadic coordinates and shifts keep the translated positions exact.
  std::mt19937_64 eng(8);
  std::uniform_int_distribution<int> cell(0, 1023);
  for (const auto& e : oracle::catalog()) {
    if (e.torus) continue;
    CAPTURE(e.label);
    const int d = e.dim;
    Box b0{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    Box b1{std::vector<double>(d, 0.25), std::vector<double>(d, 1.25)};
    PointConfig a(WindowSpec{b0, Boundary::hard, DensitySpec::constant(1.0)}, double(e.n_max));
    PointConfig b(WindowSpec{b1, Boundary::hard, DensitySpec::constant(1.0)}, double(e.n_max));
    std::uniform_int_distribution<int> col(1, std::max(1, e.colors));
    for (std::size_t i = 0; i < std::min<std::size_t>(e.n_max, 30); ++i) {
      std::vector<double> p(d), q(d);
      for (int t = 0; t < d; ++t) {
        p[t] = cell(eng) / 1024.0;
        q[t] = p[t] + 0.25;
      }
      if (a.find(p) < a.size()) continue;
      const Mark m = e.colors ? Mark::of_color(col(eng)) : Mark{};
      a.push_back(p, m);
      b.push_back(q, m);
    }
    REQUIRE(library_scores(a, e.spec) == library_scores(b, e.spec));
  }
}

TEST_CASE("scaling law of scaled scores") {
  std::mt19937_64 eng(10);
  const double s = 400.0;
  for (const auto& e : oracle::catalog()) {
    if (e.torus || !is_scaled(e.spec)) continue;
    CAPTURE(e.label);
    const int d = e.dim;
    const WindowSpec w = WindowSpec::unit_cube(d);
    const PointConfig c = oracle::uniform_config(w, s, std::min<std::size_t>(e.n_max, 25), eng, e.colors);
    const auto at_s = library_scores(c, e.spec);
    // Dilate about each point by s^{1/d} and evaluate the parent at s = 1.
    const double f = std::pow(s, 1.0 / d);
    for (std::size_t x = 0; x < c.size(); ++x) {
      Box big{std::vector<double>(d, -f * 2), std::vector<double>(d, f * 2)};
      PointConfig dil(WindowSpec{big, Boundary::hard, DensitySpec::constant(1.0)}, 1.0);
      for (std::size_t i = 0; i < c.size(); ++i) {
        std::vector<double> p(d);
        for (int t = 0; t < d; ++t) p[t] = c.pos(x)[t] + f * (c.pos(i)[t] - c.pos(x)[t]);
        dil.push_back(p, c.mark(i));
      }
      GridIndex g(dil);
      SpatialView v(g);
      ScoreContext ctx(v, 1.0);
      REQUIRE(oracle::close(ctx.score(e.spec, x), at_s[x], 1e-12));
    }
  }
}

TEST_CASE("RGG scores are unchanged by deleting far points") {
  std::mt19937_64 eng(11);
  const WindowSpec w = WindowSpec::unit_cube(2);
  const PointConfig c = oracle::uniform_config(w, 300.0, 300, eng);
  const Radius rad = Radius::scaled(1.2);
  const double r = rad.at(300.0, 2);
  const std::vector<std::pair<ScoreSpec, double>> cases = {
      {ScoreSpec::rgg_degree(3, rad), r},
      {ScoreSpec::rgg_component(3, rad), 3 * r},
      {ScoreSpec::rgg_subgraph(Pattern::path(4), rad), 4 * r},
  };
  for (const auto& [spec, R] : cases) {
    const auto full = library_scores(c, spec);
    for (std::size_t x = 0; x < c.size(); x += 17) {
      const PointConfig near = c.filtered([&](std::size_t i) {
        double s2 = 0;
        for (int t = 0; t < 2; ++t) s2 += std::pow(c.pos(i)[t] - c.pos(x)[t], 2);
        return s2 <= R * R;
      });
      const std::size_t xi = near.find(c.pos(x));
      REQUIRE(library_scores(near, spec)[xi] == full[x]);
    }
  }
}
