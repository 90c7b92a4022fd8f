// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "rlpeft/adapters/adapter.hpp"
#include "rlpeft/policy/policy.hpp"
#include "rlpeft/rlvr/trainer.hpp"
#include "rlpeft/rlvr/warm_start.hpp"
#include "rlpeft/tasks/tasks.hpp"

namespace rlpeft::harness {

struct TaskConfig {
  tasks::TaskId family = tasks::TaskId::kModAdd;
  int difficulty = 1;
};

struct EvalConfig {
  std::size_t k = 4;
  std::size_t instances = 64;
  double temperature = 0.6;
  double top_p = 0.95;
  std::uint64_t seed = 42;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 42;
  std::string out_dir = "runs/experiment";
  std::size_t steps = 200;
  std::size_t batch_size = 8;
  /// Stop once the mean reward over the last `stop_window` steps exceeds
  /// this; 0 disables early stopping.
  double stop_reward = 0.0;
  std::size_t stop_window = 20;
  policy::PolicyConfig policy;
  rlvr::WarmStartConfig warm_start;
  adapters::AdapterConfig adapter;
  rlvr::TrainerConfig rlvr;
  TaskConfig task;
  EvalConfig eval;

  /// Cross-field checks; throws ConfigError naming the field.
  void validate() const;
};

/// Parses a JSON document. Every field is optional; unknown fields, wrong
/// types and invalid values throw ConfigError with the field path.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON with every field spelled out; parse_config round-trips it.
std::string to_json(const ExperimentConfig& cfg);

/// Applies SEED and OUT_DIR from the environment when set.
void apply_env_overrides(ExperimentConfig& cfg);

}  // namespace rlpeft::harness
