// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "rlpeft/errors.hpp"
#include "rlpeft/harness/config.hpp"
#include "rlpeft/harness/runner.hpp"

namespace fs = std::filesystem;
using namespace rlpeft;

namespace {

harness::ExperimentConfig config_from(const std::string& path) {
  harness::ExperimentConfig cfg = harness::load_config(path);
  harness::apply_env_overrides(cfg);
  cfg.validate();
  return cfg;
}

fs::path out_dir_or(const fs::path& fallback) {
  const char* env = std::getenv("OUT_DIR");
  return env && *env ? fs::path(env) : fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parameter-efficient RL with verifiable rewards on a tiny policy"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, before_path, after_path, configs_dir;

  auto* train = app.add_subcommand("train", "Warm start, attach adapters and run RL training");
  train->add_option("--config", config_path, "experiment JSON")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on held-out instances");
  eval->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  eval->add_option("--config", config_path, "experiment JSON")->required();

  auto* spectra = app.add_subcommand("spectra", "Project a weight update onto the base singular basis");
  spectra->add_option("--before", before_path, "earlier checkpoint")->required();
  spectra->add_option("--after", after_path, "later checkpoint")->required();

  auto* compare = app.add_subcommand("compare", "Train and evaluate every config in a directory");
  compare->add_option("--configs", configs_dir, "directory of experiment JSON files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (*train) {
      const auto cfg = config_from(config_path);
      const auto res = harness::run_train(cfg);
      const double last = res.reports.empty() ? 0.0 : res.reports.back().mean_reward;
      std::cout << "steps " << res.reports.size() << " final_reward " << last << " trainable_fraction "
                << res.trainable_fraction << "\n"
                << "metrics " << res.metrics.string() << "\n"
                << "checkpoint " << res.final_checkpoint.string() << "\n";
    } else if (*eval) {
      const auto cfg = config_from(config_path);
      const auto s = harness::run_eval(ckpt_path, cfg);
      std::cout << "mean_avg_at_k " << s.mean_avg_at_k << " pass_rate " << s.pass_rate << "\n";
    } else if (*spectra) {
      const fs::path out = out_dir_or(fs::path(after_path).parent_path());
      fs::create_directories(out.empty() ? fs::path(".") : out);
      harness::run_spectra(before_path, after_path, out.empty() ? fs::path(".") : out);
      std::cout << "wrote " << (out / "spectra_profiles.csv").string() << "\n";
    } else if (*compare) {
      const fs::path out = out_dir_or("runs/compare");
      fs::create_directories(out);
      const auto rows = harness::run_compare(configs_dir, out);
      int rc = 0;
      for (const auto& r : rows) {
        if (r.status != 0) {
          std::cerr << r.name << ": " << r.message << "\n";
          if (rc == 0) rc = r.status;
        }
      }
      std::cout << "wrote " << (out / "frontier.csv").string() << "\n";
      return rc;
    }
  } catch (const Error& e) {
    std::cerr << "rlpeft: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "rlpeft: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kFailure);
  }
  return 0;
}
