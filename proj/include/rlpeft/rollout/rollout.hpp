// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include "rlpeft/policy/policy.hpp"
#include "rlpeft/tasks/tasks.hpp"
#include "rlpeft/tensor/rng.hpp"

namespace rlpeft::rollout {

struct EvalRecord {
  std::size_t instance_id = 0;
  std::size_t k = 0;
  std::vector<int> rewards;
  double avg_at_k = 0.0;
  bool passed = false;

  /// Builds a consistent record from per-generation rewards.
  static EvalRecord from_rewards(std::size_t instance_id, std::vector<int> rewards);
};

struct BenchmarkSummary {
  std::size_t records = 0;
  /// Mean avg@k over records, in percent.
  double mean_avg_at_k = 0.0;
  /// Share of records with at least one correct generation, in percent.
  double pass_rate = 0.0;
};

/// k independent samples of `instance`, each verified. Throws ContractError
/// when k == 0.
EvalRecord generate_group(const policy::PolicyNet& net, const tasks::TaskInstance& instance,
                          std::size_t instance_id, std::size_t k, const policy::SamplingParams& params,
                          const Rng& rng);

/// Throws ContractError on empty input.
BenchmarkSummary aggregate(std::span<const EvalRecord> records);

/// Header line plus one row per record:
/// instance_id,k,rewards,avg_at_k,passed with rewards joined by ';'.
void write_records_csv(std::ostream& out, std::span<const EvalRecord> records);
void write_summary_csv(std::ostream& out, const BenchmarkSummary& summary);

}  // namespace rlpeft::rollout
