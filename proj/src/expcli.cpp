#include "stablab/expcli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "stablab/gaussdist.hpp"
#include "stablab/rng.hpp"

namespace stablab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string join_items(const std::vector<std::string>& items) {
  std::string s = "invalid configuration:";
  for (const auto& i : items) s += "\n  - " + i;
  return s;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> it)
    : Error(join_items(it)), items(std::move(it)) {}

// ---------------------------------------------------------------------------
// JSON <-> config

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& path,
                std::vector<std::string>& errors) {
  if (!j.is_object()) {
    errors.push_back(path + ": expected an object");
    return;
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) errors.push_back(path + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
T get_or(const json& j, const char* key, T def) {
  return j.contains(key) ? j.at(key).get<T>() : def;
}

json density_to_json(const DensitySpec& d) {
  json j;
  switch (d.kind) {
    case DensitySpec::Kind::constant:
      j = {{"kind", "constant"}, {"value", d.value}};
      break;
    case DensitySpec::Kind::affine:
      j = {{"kind", "affine"}, {"base", d.base}, {"gradient", d.gradient}};
      break;
    case DensitySpec::Kind::grid:
      j = {{"kind", "grid"}, {"shape", d.grid_shape}, {"values", d.grid_values}};
      break;
  }
  if (d.sup_bound > 0.0) j["sup_bound"] = d.sup_bound;
  return j;
}

DensitySpec density_from_json(const json& j, std::vector<std::string>& errors) {
  check_keys(j, {"kind", "value", "base", "gradient", "shape", "values", "sup_bound"},
             "window.density", errors);
  DensitySpec d;
  const std::string kind = get_or<std::string>(j, "kind", "constant");
  if (kind == "constant") {
    d = DensitySpec::constant(get_or(j, "value", 1.0));
  } else if (kind == "affine") {
    d = DensitySpec::affine(get_or(j, "base", 1.0),
                            get_or(j, "gradient", std::vector<double>{}));
  } else if (kind == "grid") {
    d.kind = DensitySpec::Kind::grid;
    d.grid_shape = j.at("shape").get<std::vector<int>>();
    d.grid_values = j.at("values").get<std::vector<double>>();
  } else {
    errors.push_back("window.density: unknown kind '" + kind + "'");
  }
  d.sup_bound = get_or(j, "sup_bound", 0.0);
  return d;
}

json pattern_to_json(const Pattern& p) {
  json e = json::array();
  for (auto [a, b] : p.edges) e.push_back({a, b});
  return {{"vertices", p.vertices}, {"edges", e}};
}

Pattern pattern_from_json(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    auto tail = [&](std::size_t n) { return std::stoi(s.substr(n)); };
    if (s == "edge") return Pattern::edge();
    if (s == "triangle") return Pattern::triangle();
    if (s.rfind("path", 0) == 0) return Pattern::path(tail(4));
    if (s.rfind("star", 0) == 0) return Pattern::star(tail(4));
    if (s.rfind("complete", 0) == 0) return Pattern::complete(tail(8));
    throw SpecError("unknown pattern '" + s + "'");
  }
  Pattern p;
  p.vertices = j.at("vertices").get<int>();
  p.edges.clear();
  for (const auto& e : j.at("edges")) p.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  return p;
}

json score_to_json(const ScoreSpec& s) {
  return {{"family", family_name(s.family)},
          {"k", s.k},
          {"q", s.q},
          {"j", s.j},
          {"radius", {{"rule", radius_rule_name(s.radius.rule)}, {"value", s.radius.value}}},
          {"alpha", s.alpha},
          {"prefactor", s.prefactor},
          {"pattern", pattern_to_json(s.pattern)}};
}

ScoreSpec score_from_json(const json& j, const std::string& path, std::vector<std::string>& errors) {
  check_keys(j, {"family", "k", "q", "j", "radius", "alpha", "prefactor", "pattern"}, path, errors);
  ScoreSpec s;
  s.family = parse_family(j.at("family").get<std::string>());
  s.k = get_or(j, "k", s.k);
  s.q = get_or(j, "q", s.q);
  s.j = get_or(j, "j", s.j);
  if (j.contains("radius")) {
    const json& r = j.at("radius");
    check_keys(r, {"rule", "value"}, path + ".radius", errors);
    s.radius.rule = parse_radius_rule(get_or<std::string>(r, "rule", "scaled"));
    s.radius.value = get_or(r, "value", s.radius.value);
  }
  s.alpha = get_or(j, "alpha", s.alpha);
  s.prefactor = get_or(j, "prefactor", s.prefactor);
  if (j.contains("pattern")) s.pattern = pattern_from_json(j.at("pattern"));
  // k is implied by the pattern for subgraph counts.
  if (s.family == Family::rgg_subgraph && !j.contains("k")) s.k = s.pattern.vertices;
  return s;
}

json testfn_to_json(const TestFn& f) {
  switch (f.kind) {
    case TestFn::Kind::constant:
      return {{"kind", "constant"}, {"c", f.c}};
    case TestFn::Kind::coordinate:
      return {{"kind", "coordinate"}, {"axis", f.axis}};
    case TestFn::Kind::affine:
      return {{"kind", "affine"}, {"base", f.base}, {"gradient", f.gradient}};
    case TestFn::Kind::custom:
      break;
  }
  throw ConfigError("custom test functions cannot be serialized");
}

TestFn testfn_from_json(const json& j, const std::string& path, std::vector<std::string>& errors) {
  check_keys(j, {"kind", "c", "axis", "base", "gradient"}, path, errors);
  const std::string kind = get_or<std::string>(j, "kind", "constant");
  if (kind == "constant") return TestFn::constant(get_or(j, "c", 1.0));
  if (kind == "coordinate") return TestFn::coordinate(j.at("axis").get<int>());
  if (kind == "affine")
    return TestFn::affine(get_or(j, "base", 0.0), j.at("gradient").get<std::vector<double>>());
  errors.push_back(path + ": unknown test function kind '" + kind + "'");
  return {};
}

json palm_to_json(const PalmParams& p) {
  return {{"x_per_stratum", p.x_per_stratum}, {"batches", p.batches},
          {"strata_per_axis", p.strata_per_axis}, {"y_per_x", p.y_per_x},
          {"shells", p.shells}, {"pilot_per_stratum", p.pilot_per_stratum},
          {"center_reps", p.center_reps}, {"w", p.w}, {"y_max", p.y_max}, {"seed", p.seed}};
}

PalmParams palm_from_json(const json& j, std::vector<std::string>& errors) {
  check_keys(j,
             {"x_per_stratum", "batches", "strata_per_axis", "y_per_x", "shells",
              "pilot_per_stratum", "center_reps", "w", "y_max", "seed"},
             "analyses.asymptotic_sigma", errors);
  PalmParams p;
  p.x_per_stratum = get_or(j, "x_per_stratum", p.x_per_stratum);
  p.batches = get_or(j, "batches", p.batches);
  p.strata_per_axis = get_or(j, "strata_per_axis", p.strata_per_axis);
  p.y_per_x = get_or(j, "y_per_x", p.y_per_x);
  p.shells = get_or(j, "shells", p.shells);
  p.pilot_per_stratum = get_or(j, "pilot_per_stratum", p.pilot_per_stratum);
  p.center_reps = get_or(j, "center_reps", p.center_reps);
  p.w = get_or(j, "w", p.w);
  p.y_max = get_or(j, "y_max", p.y_max);
  p.seed = get_or<std::uint64_t>(j, "seed", 0);
  return p;
}

template <class F>
void section(const std::string& path, std::vector<std::string>& errors, F&& f) {
  try {
    f();
  } catch (const json::exception& e) {
    // Drop the library's "[json.exception.kind.id] " prefix.
    std::string msg = e.what();
    if (const auto close = msg.find("] "); msg.rfind("[json.exception", 0) == 0 && close != std::string::npos)
      msg.erase(0, close + 2);
    if (msg.rfind("key '", 0) == 0 && msg.find("' not found") != std::string::npos)
      msg = "missing required " + msg.substr(0, msg.find(" not found"));
    errors.push_back(path + ": " + msg);
  } catch (const std::exception& e) {
    errors.push_back(path + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  std::vector<std::string> errors;
  ExperimentConfig c;
  check_keys(j,
             {"name", "window", "colors", "statistics", "s_grid", "reps_per_s", "master_seed",
              "analyses", "output_dir", "parallelism"},
             "config", errors);
  if (!j.is_object()) throw ValidationError(errors);

  section("name", errors, [&] { c.name = get_or<std::string>(j, "name", c.name); });
  section("window", errors, [&] {
    const json& w = j.at("window");
    check_keys(w, {"lo", "hi", "boundary", "density"}, "window", errors);
    c.window.box.lo = w.at("lo").get<std::vector<double>>();
    c.window.box.hi = w.at("hi").get<std::vector<double>>();
    const std::string b = get_or<std::string>(w, "boundary", "hard");
    if (b == "hard")
      c.window.boundary = Boundary::hard;
    else if (b == "torus")
      c.window.boundary = Boundary::torus;
    else
      errors.push_back("window.boundary: expected 'hard' or 'torus', got '" + b + "'");
    c.window.density =
        w.contains("density") ? density_from_json(w.at("density"), errors) : DensitySpec{};
  });
  section("colors", errors, [&] { c.colors = get_or(j, "colors", std::vector<double>{}); });
  section("statistics", errors, [&] {
    const json& arr = j.at("statistics");
    if (!arr.is_array()) throw ConfigError("expected a list");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "statistics[" + std::to_string(i) + "]";
      section(path, errors, [&] {
        const json& sj = arr.at(i);
        check_keys(sj, {"name", "score", "region", "testfn"}, path, errors);
        StatisticSpec sp;
        sp.name = get_or<std::string>(sj, "name", "stat" + std::to_string(i));
        sp.score = score_from_json(sj.at("score"), path + ".score", errors);
        if (sj.contains("region") && !(sj.at("region").is_string() && sj.at("region") == "whole")) {
          const json& r = sj.at("region");
          check_keys(r, {"lo", "hi"}, path + ".region", errors);
          sp.region = RegionSpec::sub_box(
              {r.at("lo").get<std::vector<double>>(), r.at("hi").get<std::vector<double>>()});
        }
        if (sj.contains("testfn")) sp.testfn = testfn_from_json(sj.at("testfn"), path + ".testfn", errors);
        c.statistics.push_back(std::move(sp));
      });
    }
  });
  section("s_grid", errors, [&] { c.s_grid = j.at("s_grid").get<std::vector<double>>(); });
  section("reps_per_s", errors,
          [&] { c.reps_per_s = get_or<std::size_t>(j, "reps_per_s", c.reps_per_s); });
  section("master_seed", errors,
          [&] { c.master_seed = get_or<std::uint64_t>(j, "master_seed", c.master_seed); });
  section("output_dir", errors,
          [&] { c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir); });
  section("parallelism", errors, [&] { c.parallelism = get_or(j, "parallelism", c.parallelism); });

  if (j.contains("analyses")) {
    const json& a = j.at("analyses");
    check_keys(a, {"empirical_sigma", "asymptotic_sigma", "gap_curve", "dk", "stab_probe", "rate_fit"},
               "analyses", errors);
    Analyses& an = c.analyses;
    section("analyses.empirical_sigma", errors,
            [&] { an.empirical_sigma = get_or(a, "empirical_sigma", false); });
    section("analyses.asymptotic_sigma", errors, [&] {
      if (a.contains("asymptotic_sigma") && !a.at("asymptotic_sigma").is_null())
        an.asymptotic_sigma = palm_from_json(a.at("asymptotic_sigma"), errors);
    });
    section("analyses.gap_curve", errors, [&] {
      if (!a.contains("gap_curve") || a.at("gap_curve").is_null()) return;
      const json& g = a.at("gap_curve");
      check_keys(g, {"mode"}, "analyses.gap_curve", errors);
      const std::string mode = get_or<std::string>(g, "mode", "exact_rgg");
      if (mode == "exact_rgg")
        an.gap_curve = GapMode::exact_rgg;
      else if (mode == "mc")
        an.gap_curve = GapMode::mc;
      else
        errors.push_back("analyses.gap_curve.mode: expected 'exact_rgg' or 'mc'");
    });
    section("analyses.dk", errors, [&] {
      if (!a.contains("dk") || a.at("dk").is_null()) return;
      const json& d = a.at("dk");
      check_keys(d, {"against", "grid", "gaussian_factor"}, "analyses.dk", errors);
      DkAnalysis dk;
      const std::string ag = get_or<std::string>(d, "against", "sigma_s");
      if (ag == "sigma_s")
        dk.against = DkTarget::sigma_s;
      else if (ag == "sigma_limit")
        dk.against = DkTarget::sigma_limit;
      else
        errors.push_back("analyses.dk.against: expected 'sigma_s' or 'sigma_limit'");
      dk.grid = get_or(d, "grid", dk.grid);
      dk.gaussian_factor = get_or(d, "gaussian_factor", dk.gaussian_factor);
      an.dk = dk;
    });
    section("analyses.stab_probe", errors, [&] {
      if (!a.contains("stab_probe") || a.at("stab_probe").is_null()) return;
      const json& p = a.at("stab_probe");
      check_keys(p, {"statistic", "s", "separations", "reps"}, "analyses.stab_probe", errors);
      ProbeAnalysis pr;
      pr.statistic = p.at("statistic").get<std::string>();
      pr.s = get_or(p, "s", 0.0);
      pr.separations = p.at("separations").get<std::vector<double>>();
      pr.reps = get_or<std::size_t>(p, "reps", pr.reps);
      an.stab_probe = pr;
    });
    section("analyses.rate_fit", errors, [&] {
      if (!a.contains("rate_fit") || a.at("rate_fit").is_null()) return;
      const json& r = a.at("rate_fit");
      check_keys(r, {"tolerance", "gap_target", "gap_entry", "dk_target"}, "analyses.rate_fit",
                 errors);
      RateAnalysis ra;
      ra.tolerance = get_or(r, "tolerance", ra.tolerance);
      if (r.contains("gap_target")) ra.gap_target = r.at("gap_target").get<double>();
      if (r.contains("dk_target")) ra.dk_target = r.at("dk_target").get<double>();
      if (r.contains("gap_entry")) {
        const auto e = r.at("gap_entry").get<std::vector<std::size_t>>();
        if (e.size() != 2) throw ConfigError("gap_entry must be [i, j]");
        ra.gap_i = e[0];
        ra.gap_j = e[1];
      }
      an.rate_fit = ra;
    });
  }
  if (!errors.empty()) throw ValidationError(errors);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["window"] = {{"lo", c.window.box.lo},
                 {"hi", c.window.box.hi},
                 {"boundary", c.window.boundary == Boundary::torus ? "torus" : "hard"},
                 {"density", density_to_json(c.window.density)}};
  if (!c.colors.empty()) j["colors"] = c.colors;
  json stats = json::array();
  for (const auto& sp : c.statistics) {
    json sj = {{"name", sp.name}, {"score", score_to_json(sp.score)}, {"testfn", testfn_to_json(sp.testfn)}};
    if (sp.region.whole)
      sj["region"] = "whole";
    else
      sj["region"] = {{"lo", sp.region.box.lo}, {"hi", sp.region.box.hi}};
    stats.push_back(sj);
  }
  j["statistics"] = stats;
  j["s_grid"] = c.s_grid;
  j["reps_per_s"] = c.reps_per_s;
  j["master_seed"] = c.master_seed;
  j["output_dir"] = c.output_dir;
  j["parallelism"] = c.parallelism;
  json a = json::object();
  const Analyses& an = c.analyses;
  a["empirical_sigma"] = an.empirical_sigma;
  if (an.asymptotic_sigma) a["asymptotic_sigma"] = palm_to_json(*an.asymptotic_sigma);
  if (an.gap_curve)
    a["gap_curve"] = {{"mode", *an.gap_curve == GapMode::exact_rgg ? "exact_rgg" : "mc"}};
  if (an.dk)
    a["dk"] = {{"against", an.dk->against == DkTarget::sigma_s ? "sigma_s" : "sigma_limit"},
               {"grid", an.dk->grid},
               {"gaussian_factor", an.dk->gaussian_factor}};
  if (an.stab_probe)
    a["stab_probe"] = {{"statistic", an.stab_probe->statistic},
                       {"s", an.stab_probe->s},
                       {"separations", an.stab_probe->separations},
                       {"reps", an.stab_probe->reps}};
  if (an.rate_fit) {
    json r = {{"tolerance", an.rate_fit->tolerance},
              {"gap_entry", {an.rate_fit->gap_i, an.rate_fit->gap_j}}};
    if (an.rate_fit->gap_target) r["gap_target"] = *an.rate_fit->gap_target;
    if (an.rate_fit->dk_target) r["dk_target"] = *an.rate_fit->dk_target;
    a["rate_fit"] = r;
  }
  j["analyses"] = a;
  return j;
}

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError({path + ": " + e.what()});
  }
}

}  // namespace

ExperimentConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Validation

namespace {

bool has_reference(const ExperimentConfig& c) {
  return c.analyses.asymptotic_sigma.has_value() ||
         is_rgg_vertex_edge_pair(c.statistics, c.window);
}

}  // namespace

std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  bool window_ok = true;
  section("window", errors, [&] {
    try {
      c.window.validate();
    } catch (...) {
      window_ok = false;
      throw;
    }
  });
  if (!c.colors.empty()) section("colors", errors, [&] { validate_simplex(c.colors); });
  if (c.statistics.empty()) errors.push_back("statistics: at least one statistic is required");
  std::set<std::string> names;
  for (std::size_t i = 0; i < c.statistics.size(); ++i) {
    const auto& sp = c.statistics[i];
    const std::string path = "statistics[" + std::to_string(i) + "] '" + sp.name + "'";
    if (sp.name.empty() || sp.name.find_first_of(",\"\n\r") != std::string::npos)
      errors.push_back(path + ": names must be nonempty without commas, quotes or newlines");
    if (!names.insert(sp.name).second) errors.push_back(path + ": duplicate name");
    if (window_ok) section(path, errors, [&] { sp.validate(c.window); });
    if (sp.score.needs_colors() && c.colors.empty())
      errors.push_back(path + ": colored score needs 'colors'");
    if (sp.testfn.kind == TestFn::Kind::custom)
      errors.push_back(path + ": custom test functions cannot be used in configs");
  }
  if (c.s_grid.empty()) errors.push_back("s_grid: must be nonempty");
  for (std::size_t i = 0; i < c.s_grid.size(); ++i) {
    if (!(c.s_grid[i] > 0.0)) errors.push_back("s_grid: intensities must be positive");
    if (i > 0 && !(c.s_grid[i] > c.s_grid[i - 1]))
      errors.push_back("s_grid: must be strictly increasing");
  }
  if (c.reps_per_s < 1) errors.push_back("reps_per_s: must be >= 1");
  if (c.parallelism < 1) errors.push_back("parallelism: must be >= 1");
  if (c.output_dir.empty()) errors.push_back("output_dir: must be nonempty");

  const Analyses& an = c.analyses;
  const bool cov = an.empirical_sigma || an.dk || (an.gap_curve && *an.gap_curve == GapMode::mc);
  if (cov && c.reps_per_s < 2)
    errors.push_back("reps_per_s: covariance analyses need at least 2 replications");
  if (an.asymptotic_sigma) {
    for (const auto& sp : c.statistics)
      if (!is_scaled(sp.score))
        errors.push_back("analyses.asymptotic_sigma: statistic '" + sp.name +
                         "' is not a scaled score");
    const auto& p = *an.asymptotic_sigma;
    if (p.batches < 2 || p.x_per_stratum < 1 || p.y_per_x < 1 || p.shells < 1 ||
        p.strata_per_axis < 1)
      errors.push_back("analyses.asymptotic_sigma: sample sizes must be positive, batches >= 2");
  }
  if (an.gap_curve) {
    if (*an.gap_curve == GapMode::exact_rgg) {
      if (!is_rgg_vertex_edge_pair(c.statistics, c.window))
        errors.push_back(
            "analyses.gap_curve: exact_rgg needs exactly (unit, scaled RGG edge count) on the unit "
            "cube with unit density");
      else
        for (double s : c.s_grid) {
          double rho = 0.0;
          is_rgg_vertex_edge_pair(c.statistics, c.window, &rho);
          if (rho * std::pow(s, -1.0 / c.window.dim()) > 1.0)
            errors.push_back("analyses.gap_curve: connection radius exceeds the box at s = " +
                             std::to_string(s));
          if (c.window.dim() > 6) errors.push_back("analyses.gap_curve: exact mode needs d <= 6");
        }
    } else if (!has_reference(c)) {
      errors.push_back("analyses.gap_curve: mc mode needs asymptotic_sigma or the RGG pair");
    } else if (an.asymptotic_sigma) {
      for (const auto& sp : c.statistics)
        if (!is_scaled(sp.score))
          errors.push_back("analyses.gap_curve: Sigma reference needs scaled scores");
    }
  }
  if (an.dk) {
    if (c.statistics.size() > 3)
      errors.push_back("analyses.dk: grid d_K supports at most 3 statistics");
    if (an.dk->grid < 1) errors.push_back("analyses.dk.grid: must be positive");
    if (an.dk->gaussian_factor < 1) errors.push_back("analyses.dk.gaussian_factor: must be >= 1");
    if (an.dk->against == DkTarget::sigma_limit && !has_reference(c))
      errors.push_back("analyses.dk: sigma_limit needs asymptotic_sigma or the RGG pair");
  }
  if (an.stab_probe) {
    if (!names.count(an.stab_probe->statistic))
      errors.push_back("analyses.stab_probe.statistic: no statistic named '" +
                       an.stab_probe->statistic + "'");
    if (an.stab_probe->separations.empty())
      errors.push_back("analyses.stab_probe.separations: must be nonempty");
    if (an.stab_probe->s < 0.0) errors.push_back("analyses.stab_probe.s: must be >= 0");
  }
  if (an.rate_fit) {
    const auto& r = *an.rate_fit;
    if (r.gap_target && !an.gap_curve)
      errors.push_back("analyses.rate_fit: gap_target needs analyses.gap_curve");
    if (r.dk_target && !an.dk) errors.push_back("analyses.rate_fit: dk_target needs analyses.dk");
    if (r.gap_i >= c.statistics.size() || r.gap_j >= c.statistics.size())
      errors.push_back("analyses.rate_fit.gap_entry: index out of range");
    if (c.s_grid.size() < 4) errors.push_back("analyses.rate_fit: needs at least 4 grid points");
    for (std::size_t i = 1; i < c.s_grid.size(); ++i)
      if (!(c.s_grid[i] >= 2.0 * c.s_grid[i - 1]))
        errors.push_back("analyses.rate_fit: s_grid ratios must be >= 2");
  }
  return errors;
}

std::vector<std::string> validate_config_file(const std::string& path) {
  try {
    return validate_config(load_config(path));
  } catch (const ValidationError& e) {
    return e.items;
  } catch (const std::exception& e) {
    return {e.what()};
  }
}

std::string config_hash(const ExperimentConfig& c) {
  json j = config_to_json(c);
  // Where results go and how many workers produce them do not change them.
  j.erase("output_dir");
  j.erase("parallelism");
  const std::string text = j.dump() + "|" + kVersion;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Running

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class BundleWriter {
 public:
  explicit BundleWriter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw Error("cannot write '" + (dir_ / name).string() + "'");
    out << content;
    if (!out) throw Error("write failed for '" + (dir_ / name).string() + "'");
    files_.push_back(name);
  }
  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows; ++i) {
    json r = json::array();
    for (std::size_t j = 0; j < m.cols; ++j) {
      const double v = m(i, j);
      if (std::isfinite(v))
        r.push_back(v);
      else
        r.push_back(nullptr);
    }
    rows.push_back(r);
  }
  return rows;
}

json cov_json(const CovEstimate& e) {
  json m = json::object();
  for (const auto& [k, v] : e.meta) m[k] = v;
  return {{"kind", cov_kind_name(e.kind)},
          {"matrix", matrix_json(e.matrix)},
          {"stderr", matrix_json(e.se)},
          {"n_samples", e.n_samples},
          {"meta", m}};
}

std::string batch_csv(const ReplicationBatch& b) {
  std::string out = "s,rep,seed";
  for (const auto& n : b.names) out += "," + n;
  out += "\n";
  for (std::size_t r = 0; r < b.reps(); ++r) {
    out += fmt(b.s) + "," + std::to_string(r) + "," + std::to_string(b.seeds[r]);
    for (std::size_t i = 0; i < b.dim(); ++i) out += "," + fmt(b.values(r, i));
    out += "\n";
  }
  return out;
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& c) {
  if (auto errs = validate_config(c); !errs.empty()) throw ValidationError(errs);
  const auto t0 = std::chrono::steady_clock::now();
  RunSummary summary;
  BundleWriter out(c.output_dir);
  const Analyses& an = c.analyses;
  const int d = c.window.dim();
  const std::size_t m = c.statistics.size();

  try {
    out.write("config.json", config_to_json(c).dump(2) + "\n");

    ReplicateOptions ro;
    ro.colors = c.colors;
    ro.threads = c.parallelism;
    std::vector<ReplicationBatch> batches;
    for (std::size_t k = 0; k < c.s_grid.size(); ++k) {
      batches.push_back(replicate(c.window, c.statistics, c.s_grid[k], c.reps_per_s,
                                  c.master_seed, ro));
      out.write("batch_s" + std::to_string(k) + ".csv", batch_csv(batches.back()));
    }

    json sigma = json::object();
    std::vector<CovEstimate> emp;
    if (c.reps_per_s >= 2)
      for (const auto& b : batches) emp.push_back(empirical_sigma(b));
    if (an.empirical_sigma) {
      json arr = json::array();
      for (std::size_t k = 0; k < emp.size(); ++k) {
        json e = cov_json(emp[k]);
        e["s"] = c.s_grid[k];
        arr.push_back(e);
      }
      sigma["empirical"] = arr;
    }

    std::optional<CovEstimate> reference;
    double rho = 0.0;
    if (is_rgg_vertex_edge_pair(c.statistics, c.window, &rho)) {
      reference = rgg_sigma_closed_form(d, rho);
      sigma["closed_form"] = cov_json(*reference);
    }
    if (an.asymptotic_sigma) {
      PalmParams p = *an.asymptotic_sigma;
      if (p.seed == 0) p.seed = c.master_seed;
      p.threads = c.parallelism;
      p.colors = c.colors;
      reference = asymptotic_sigma_mc(c.statistics, c.window, p);
      sigma["asymptotic"] = cov_json(*reference);
    }
    if (!sigma.empty()) out.write("sigma.json", sigma.dump(2) + "\n");

    std::vector<GapPoint> gaps;
    if (an.gap_curve) {
      if (*an.gap_curve == GapMode::exact_rgg) {
        gaps = gap_curve(c.statistics, c.window, c.s_grid, GapMode::exact_rgg).points;
      } else {
        for (std::size_t k = 0; k < emp.size(); ++k) {
          GapPoint gp;
          gp.s = c.s_grid[k];
          gp.value = Matrix(m, m);
          gp.se = Matrix(m, m);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
              gp.value(i, j) = reference->matrix(i, j) - emp[k].matrix(i, j);
              const double rs = reference->se(i, j);
              gp.se(i, j) = std::sqrt(emp[k].se(i, j) * emp[k].se(i, j) + rs * rs);
            }
          gaps.push_back(std::move(gp));
        }
      }
      std::string csv = "s,i,j,value,stderr\n";
      for (const auto& gp : gaps)
        for (std::size_t i = 0; i < gp.value.rows; ++i)
          for (std::size_t j = i; j < gp.value.cols; ++j)
            csv += fmt(gp.s) + "," + std::to_string(i) + "," + std::to_string(j) + "," +
                   fmt(gp.value(i, j)) + "," + fmt(gp.se(i, j)) + "\n";
      out.write("gap.csv", csv);
    }

    std::vector<CurvePoint> dk_curve;
    if (an.dk) {
      std::string csv = "s,dk,noise_floor,grid,d3_lower\n";
      for (std::size_t k = 0; k < batches.size(); ++k) {
        const CovEstimate& w = an.dk->against == DkTarget::sigma_s ? emp[k] : *reference;
        const Matrix z = standardize(batches[k], &w);
        Matrix ident(m, m);
        for (std::size_t i = 0; i < m; ++i) ident(i, i) = 1.0;
        const Matrix g = sample_gaussian(GaussianSpec::from_cov(ident),
                                         c.reps_per_s * an.dk->gaussian_factor,
                                         derive_seed(c.master_seed, c.s_grid[k], 0, StreamTag::gaussian));
        const DkResult r = dk_estimate(z, g, an.dk->grid);
        const double d3 = reference ? d3_lower_bound(reference->matrix, emp[k].matrix)
                                    : std::numeric_limits<double>::quiet_NaN();
        csv += fmt(c.s_grid[k]) + "," + fmt(r.distance) + "," + fmt(r.noise_floor) + "," +
               std::to_string(r.grid) + "," + fmt(d3) + "\n";
        dk_curve.push_back({c.s_grid[k], r.distance, 0.0});
      }
      out.write("dk.csv", csv);
    }

    if (an.stab_probe) {
      const auto& pa = *an.stab_probe;
      const StatisticSpec* spec = nullptr;
      for (const auto& sp : c.statistics)
        if (sp.name == pa.statistic) spec = &sp;
      const double s = pa.s > 0.0 ? pa.s : c.s_grid.back();
      const double unit = std::pow(s, -1.0 / d);
      std::vector<double> seps;
      for (double v : pa.separations) seps.push_back(v * unit);
      ProbeOptions po;
      po.colors = c.colors;
      po.threads = c.parallelism;
      const auto rows = stab_probe(*spec, c.window, s, seps, pa.reps, c.master_seed, po);
      std::string csv = "s,separation,separation_scaled,nonzero,reps,estimate,ci_lo,ci_hi\n";
      for (std::size_t k = 0; k < rows.size(); ++k)
        csv += fmt(s) + "," + fmt(rows[k].separation) + "," + fmt(pa.separations[k]) + "," +
               std::to_string(rows[k].nonzero) + "," + std::to_string(rows[k].reps) + "," +
               fmt(rows[k].estimate) + "," + fmt(rows[k].ci_lo) + "," + fmt(rows[k].ci_hi) + "\n";
      out.write("stab.csv", csv);
    }

    if (an.rate_fit) {
      const auto& ra = *an.rate_fit;
      std::string csv = "curve,target,exponent,stderr,z,pass,note\n";
      auto emit = [&](const std::string& id, double target, std::span<const CurvePoint> curve) {
        std::string note;
        RateRow row;
        row.id = id;
        row.target = target;
        try {
          const RateFit fit = fit_rate(curve);
          row = rate_report(std::span<const RateFit>(&fit, 1), std::span<const double>(&target, 1),
                            ra.tolerance, std::span<const std::string>(&id, 1))[0];
          if (!fit.excluded_s.empty())
            note = std::to_string(fit.excluded_s.size()) + " points below noise floor";
        } catch (const NumericError& e) {
          row.exponent = row.se = row.z = std::numeric_limits<double>::quiet_NaN();
          note = e.what();
          for (char& ch : note)
            if (ch == ',' || ch == '\n') ch = ';';
        }
        csv += id + "," + fmt(row.target) + "," + fmt(row.exponent) + "," + fmt(row.se) + "," +
               fmt(row.z) + "," + (row.pass ? "1" : "0") + "," + note + "\n";
      };
      if (ra.gap_target) {
        std::vector<CurvePoint> pts;
        for (const auto& gp : gaps) pts.push_back({gp.s, gp.value(ra.gap_i, ra.gap_j), gp.se(ra.gap_i, ra.gap_j)});
        emit("gap_" + std::to_string(ra.gap_i) + "_" + std::to_string(ra.gap_j), *ra.gap_target, pts);
      }
      if (ra.dk_target) emit("dk", *ra.dk_target, dk_curve);
      out.write("rates.csv", csv);
    }
    summary.complete = true;
  } catch (const std::exception& e) {
    summary.error = e.what();
  }

  summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest = {{"version", kVersion},
                   {"config_hash", config_hash(c)},
                   {"name", c.name},
                   {"master_seed", c.master_seed},
                   {"seed_contract", "row seed = derive_seed(master_seed, s, rep, points)"},
                   {"s_grid", c.s_grid},
                   {"reps_per_s", c.reps_per_s},
                   {"parallelism", c.parallelism},
                   {"status", summary.complete ? "complete" : "incomplete"},
                   {"files", out.files()},
                   {"wall_seconds", summary.wall_seconds}};
  if (!summary.complete) manifest["error"] = summary.error;
  out.write("manifest.json", manifest.dump(2) + "\n");
  summary.files = out.files();
  return summary;
}

// ---------------------------------------------------------------------------
// Bundles and export

std::vector<std::string> verify_bundle(const std::string& dir) {
  std::vector<std::string> issues;
  const fs::path d(dir);
  json manifest;
  try {
    manifest = read_json_file((d / "manifest.json").string());
  } catch (const std::exception& e) {
    return {std::string("manifest: ") + e.what()};
  }
  if (manifest.value("status", "") != "complete")
    issues.push_back("manifest: run is marked incomplete (" + manifest.value("error", "") + ")");
  if (manifest.value("version", "") != kVersion)
    issues.push_back("manifest: written by version " + manifest.value("version", "?") +
                     ", reading with " + kVersion);
  try {
    const ExperimentConfig c = load_config((d / "config.json").string());
    if (config_hash(c) != manifest.value("config_hash", ""))
      issues.push_back("manifest: config hash mismatch (config.json was modified or the code "
                       "version differs)");
  } catch (const std::exception& e) {
    issues.push_back(std::string("config.json: ") + e.what());
  }
  for (const auto& f : manifest.value("files", std::vector<std::string>{}))
    if (!fs::exists(d / f)) issues.push_back("missing file '" + f + "'");
  return issues;
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw ConfigError("'" + path.string() + "' is empty");
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ConfigError("column '" + name + "' not found");
}

}  // namespace

std::string export_plotdata(const std::string& dir, const std::string& curve) {
  const fs::path d(dir);
  std::string out = "curve,series,s,value,stderr\n";
  if (curve == "gap") {
    const auto rows = read_csv(d / "gap.csv");
    const auto& h = rows[0];
    const std::size_t cs = column(h, "s"), ci = column(h, "i"), cj = column(h, "j"),
                      cv = column(h, "value"), ce = column(h, "stderr");
    for (std::size_t r = 1; r < rows.size(); ++r)
      out += "gap,sigma_" + rows[r][ci] + "_" + rows[r][cj] + "," + rows[r][cs] + "," +
             rows[r][cv] + "," + rows[r][ce] + "\n";
  } else if (curve == "dk") {
    const auto rows = read_csv(d / "dk.csv");
    const std::size_t cs = column(rows[0], "s"), cv = column(rows[0], "dk"),
                      ce = column(rows[0], "noise_floor");
    for (std::size_t r = 1; r < rows.size(); ++r)
      out += "dk,dk," + rows[r][cs] + "," + rows[r][cv] + "," + rows[r][ce] + "\n";
  } else if (curve == "stab") {
    const auto rows = read_csv(d / "stab.csv");
    const auto& h = rows[0];
    const std::size_t cs = column(h, "separation"), cv = column(h, "estimate"),
                      lo = column(h, "ci_lo"), hi = column(h, "ci_hi");
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const double half = (std::stod(rows[r][hi]) - std::stod(rows[r][lo])) / (2.0 * 1.959963984540054);
      out += "stab,p_nonzero," + rows[r][cs] + "," + rows[r][cv] + "," + fmt(half) + "\n";
    }
  } else if (curve == "rates") {
    const auto rows = read_csv(d / "rates.csv");
    const auto& h = rows[0];
    const std::size_t cc = column(h, "curve"), ct = column(h, "target"),
                      cv = column(h, "exponent"), ce = column(h, "stderr");
    for (std::size_t r = 1; r < rows.size(); ++r)
      out += "rates," + rows[r][cc] + "," + rows[r][ct] + "," + rows[r][cv] + "," + rows[r][ce] + "\n";
  } else {
    throw ConfigError("unknown curve '" + curve + "' (expected gap, dk, stab or rates)");
  }
  return out;
}

std::vector<SeriesPoint> read_plotdata(const std::string& csv) {
  std::vector<SeriesPoint> out;
  std::stringstream in(csv);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      if (line != "curve,series,s,value,stderr") throw ConfigError("not a plot-data CSV");
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw ConfigError("malformed plot-data row: " + line);
    out.push_back({cells[1], {std::stod(cells[2]), std::stod(cells[3]), std::stod(cells[4])}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Presets

namespace {

StatisticSpec stat(std::string name, ScoreSpec s) {
  StatisticSpec sp;
  sp.name = std::move(name);
  sp.score = std::move(s);
  return sp;
}

std::vector<double> geometric(double lo, double ratio, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo * std::pow(ratio, i));
  return g;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"prop24", "poisson_count", "entropy", "knn_stab", "rgg_palm", "rgg_clt"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  c.output_dir = "results/" + name;
  const StatisticSpec V = stat("V", ScoreSpec::unit());
  const StatisticSpec E = stat("E", ScoreSpec::rgg_subgraph(Pattern::edge(), Radius::scaled(1.0)));
  if (name == "prop24") {
    c.statistics = {V, E};
    c.s_grid = geometric(256.0, 2.0, 7);
    c.reps_per_s = 1000;
    c.analyses.empirical_sigma = true;
    c.analyses.gap_curve = GapMode::exact_rgg;
    RateAnalysis r;
    r.gap_target = -0.5;
    r.tolerance = 0.05;
    c.analyses.rate_fit = r;
  } else if (name == "poisson_count") {
    c.statistics = {stat("N", ScoreSpec::unit())};
    c.s_grid = {100.0};
    c.reps_per_s = 100;
    c.analyses.empirical_sigma = true;
  } else if (name == "entropy") {
    c.window = WindowSpec::unit_cube(2, Boundary::torus);
    c.statistics = {stat("L11", ScoreSpec::knn_directed(1, 1.0, false))};
    c.s_grid = {1e3, 1e4, 1e5};
    c.reps_per_s = 10;
  } else if (name == "knn_stab") {
    c.statistics = {stat("NN", ScoreSpec::knn_edge(1, 1.0))};
    c.s_grid = {1e4};
    c.reps_per_s = 4;
    c.analyses.stab_probe = ProbeAnalysis{"NN", 1e4, {1.0, 2.0, 3.0, 4.0}, 2000};
  } else if (name == "rgg_palm") {
    c.statistics = {V, E};
    c.s_grid = {4096.0};
    c.reps_per_s = 500;
    c.analyses.empirical_sigma = true;
    c.analyses.asymptotic_sigma = PalmParams{};
  } else if (name == "rgg_clt") {
    c.statistics = {V, E};
    c.s_grid = geometric(64.0, 4.0, 4);
    c.reps_per_s = 4000;
    c.analyses.empirical_sigma = true;
    c.analyses.dk = DkAnalysis{};
    RateAnalysis r;
    r.dk_target = -0.5;
    r.tolerance = 0.35;
    c.analyses.rate_fit = r;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

}  // namespace stablab
