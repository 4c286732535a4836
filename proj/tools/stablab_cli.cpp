// Command-line front end: run, validate, export, presets.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "stablab/expcli.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

// "preset:NAME" or a path to a JSON file.
stablab::ExperimentConfig resolve(const std::string& arg) {
  if (arg.rfind("preset:", 0) == 0) return stablab::preset(arg.substr(7));
  return stablab::load_config(arg);
}

void print_items(const std::vector<std::string>& items) {
  for (const auto& i : items) std::cerr << "  - " << i << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo laboratory for stabilizing functionals of Poisson processes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", stablab::kVersion);

  std::string config_arg, out_dir, bundle, curve, export_out, preset_name;
  int parallelism = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;

  auto* run = app.add_subcommand("run", "Run an experiment and write a result bundle");
  run->add_option("config", config_arg, "Config file or preset:NAME")->required();
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  run->add_option("--parallelism", parallelism, "Worker threads (overrides parallelism)")
      ->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Master seed override")->each([&](const std::string&) {
    seed_given = true;
  });

  auto* validate = app.add_subcommand("validate", "Check a config and list every problem");
  validate->add_option("config", config_arg, "Config file or preset:NAME")->required();

  auto* exp = app.add_subcommand("export", "Long-format plot data from a result bundle");
  exp->add_option("bundle", bundle, "Result directory")->required();
  exp->add_option("--curve", curve, "gap, dk, stab or rates")->required();
  exp->add_option("--out", export_out, "Output file (stdout if omitted)");

  auto* presets = app.add_subcommand("presets", "Built-in experiment configs");
  presets->require_subcommand(1);
  auto* plist = presets->add_subcommand("list", "List preset names");
  auto* pshow = presets->add_subcommand("show", "Print a preset as JSON");
  pshow->add_option("name", preset_name)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }

  try {
    if (*run) {
      stablab::ExperimentConfig c = resolve(config_arg);
      if (!out_dir.empty()) c.output_dir = out_dir;
      if (parallelism > 0) c.parallelism = parallelism;
      if (seed_given) c.master_seed = seed;
      const auto summary = stablab::run_experiment(c);
      if (!summary.complete) {
        std::cerr << "run failed: " << summary.error << "\n(partial results in " << c.output_dir
                  << ", marked incomplete)\n";
        return kRuntime;
      }
      std::cout << "wrote " << summary.files.size() << " files to " << c.output_dir << " in "
                << std::fixed << std::setprecision(2) << summary.wall_seconds << " s\n";
      return kOk;
    }
    if (*validate) {
      std::vector<std::string> items;
      if (config_arg.rfind("preset:", 0) == 0)
        items = stablab::validate_config(resolve(config_arg));
      else
        items = stablab::validate_config_file(config_arg);
      if (items.empty()) {
        std::cout << "ok\n";
        return kOk;
      }
      std::cerr << "invalid configuration:\n";
      print_items(items);
      return kInvalid;
    }
    if (*exp) {
      const auto issues = stablab::verify_bundle(bundle);
      if (!issues.empty()) {
        std::cerr << "warning: bundle check reported:\n";
        print_items(issues);
      }
      const std::string csv = stablab::export_plotdata(bundle, curve);
      if (export_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(export_out, std::ios::binary);
        out << csv;
        if (!out) throw stablab::Error("cannot write '" + export_out + "'");
      }
      return kOk;
    }
    if (*plist) {
      for (const auto& n : stablab::preset_names()) std::cout << n << "\n";
      return kOk;
    }
    if (*pshow) {
      std::cout << stablab::config_to_json(stablab::preset(preset_name)).dump(2) << "\n";
      return kOk;
    }
  } catch (const stablab::ValidationError& e) {
    std::cerr << "invalid configuration:\n";
    print_items(e.items);
    return kInvalid;
  } catch (const stablab::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
