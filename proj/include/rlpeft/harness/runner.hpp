// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "rlpeft/harness/config.hpp"
#include "rlpeft/policy/policy.hpp"
#include "rlpeft/rlvr/trainer.hpp"
#include "rlpeft/rollout/rollout.hpp"

namespace rlpeft::harness {

/// Base policy for `cfg`: random init, format warm start, then adapters.
std::unique_ptr<policy::PolicyNet> build_policy(const ExperimentConfig& cfg);

/// Training instances for step `step`; a pure function of (cfg, step).
std::vector<tasks::TaskInstance> training_batch(const ExperimentConfig& cfg, std::size_t step);

struct TrainResult {
  std::vector<rlvr::StepReport> reports;
  double trainable_fraction = 0.0;
  std::size_t trainable_params = 0;
  std::size_t total_params = 0;
  std::filesystem::path initial_checkpoint;
  std::filesystem::path final_checkpoint;
  std::filesystem::path metrics;
};

/// Writes <out_dir>/metrics.csv, ckpt_initial.perl and ckpt_final.perl.
TrainResult run_train(const ExperimentConfig& cfg);

/// Evaluates on a held-out instance set seeded by cfg.eval.seed. Writes
/// <out_dir>/eval_<checkpoint stem>_records.csv and _summary.csv.
rollout::BenchmarkSummary run_eval(const std::filesystem::path& checkpoint, const ExperimentConfig& cfg);
rollout::BenchmarkSummary evaluate(const policy::PolicyNet& net, const ExperimentConfig& cfg,
                                   std::vector<rollout::EvalRecord>* records = nullptr);

/// Writes spectra_profiles.csv and spectra_summary.csv into `out_dir`.
void run_spectra(const std::filesystem::path& before, const std::filesystem::path& after,
                 const std::filesystem::path& out_dir);

struct CompareRow {
  std::string name;
  std::string kind;
  std::size_t rank = 0;
  double trainable_fraction = 0.0;
  std::size_t trainable_params = 0;
  std::size_t total_params = 0;
  double mean_avg_at_k = 0.0;
  double pass_rate = 0.0;
  double final_reward = 0.0;
  int status = 0;
  std::string message;
};

/// Trains and evaluates every *.json in `config_dir` (sorted by name), each
/// in <out_dir>/<config stem>, and writes <out_dir>/frontier.csv sorted by
/// trainable fraction, largest first. Member failures are recorded per row.
std::vector<CompareRow> run_compare(const std::filesystem::path& config_dir, const std::filesystem::path& out_dir);

}  // namespace rlpeft::harness
