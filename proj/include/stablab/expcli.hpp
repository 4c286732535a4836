#pragma once

// Experiment orchestration: JSON configs, seeded replication over an s grid,
// CSV/JSON result bundles and plot-data export.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stablab/covlab.hpp"
#include "stablab/error.hpp"
#include "stablab/ratelab.hpp"

namespace stablab {

inline constexpr const char* kVersion = "0.3.0";

/// Itemized config problems.
struct ValidationError : Error {
  explicit ValidationError(std::vector<std::string> items);
  std::vector<std::string> items;
};

enum class DkTarget { sigma_s, sigma_limit };

struct DkAnalysis {
  DkTarget against = DkTarget::sigma_s;
  int grid = 64;
  /// Gaussian sample size as a multiple of reps_per_s.
  int gaussian_factor = 10;
};

struct ProbeAnalysis {
  std::string statistic;
  double s = 0.0;
  /// Separations in units of s^{-1/d}.
  std::vector<double> separations;
  std::size_t reps = 1000;
};

struct RateAnalysis {
  double tolerance = 0.1;
  std::optional<double> gap_target;
  std::size_t gap_i = 0, gap_j = 1;
  std::optional<double> dk_target;
};

struct Analyses {
  bool empirical_sigma = false;
  std::optional<PalmParams> asymptotic_sigma;
  std::optional<GapMode> gap_curve;
  std::optional<DkAnalysis> dk;
  std::optional<ProbeAnalysis> stab_probe;
  std::optional<RateAnalysis> rate_fit;
};

struct ExperimentConfig {
  std::string name = "experiment";
  WindowSpec window = WindowSpec::unit_cube(2);
  std::vector<double> colors;
  std::vector<StatisticSpec> statistics;
  std::vector<double> s_grid;
  std::size_t reps_per_s = 100;
  std::uint64_t master_seed = 1;
  Analyses analyses;
  std::string output_dir = "results";
  int parallelism = 1;
};

/// Throws ValidationError listing every problem found while reading.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path);

/// Semantic checks; empty when the config is runnable.
std::vector<std::string> validate_config(const ExperimentConfig& c);
/// Reads and checks a file; parse errors are returned as items.
std::vector<std::string> validate_config_file(const std::string& path);

/// FNV-1a 64 of the canonical config dump and the library version.
std::string config_hash(const ExperimentConfig& c);

struct RunSummary {
  bool complete = false;
  std::string error;
  std::vector<std::string> files;
  double wall_seconds = 0.0;
};

/// Writes the bundle into c.output_dir. Throws ValidationError before any
/// work for invalid configs; runtime failures leave a manifest marked
/// incomplete and are reported through the summary.
RunSummary run_experiment(const ExperimentConfig& c);

/// Problems with a bundle on disk (missing manifest, hash mismatch, ...).
std::vector<std::string> verify_bundle(const std::string& dir);

/// Long-format CSV (curve, series, s, value, stderr) for one of
/// gap, dk, rates, stab.
std::string export_plotdata(const std::string& dir, const std::string& curve);

struct SeriesPoint {
  std::string series;
  CurvePoint point;
};
/// Parses export_plotdata output.
std::vector<SeriesPoint> read_plotdata(const std::string& csv);

std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown preset.
ExperimentConfig preset(const std::string& name);

}  // namespace stablab
