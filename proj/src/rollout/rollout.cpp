// SPDX-License-Identifier: Apache-2.0
#include "rlpeft/rollout/rollout.hpp"

#include <algorithm>

#include "rlpeft/errors.hpp"
#include "rlpeft/util/csv.hpp"

namespace rlpeft::rollout {

EvalRecord EvalRecord::from_rewards(std::size_t instance_id, std::vector<int> rewards) {
  EvalRecord r;
  r.instance_id = instance_id;
  r.k = rewards.size();
  int hits = 0;
  for (int v : rewards) hits += v;
  r.avg_at_k = r.k == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(r.k);
  r.passed = hits > 0;
  r.rewards = std::move(rewards);
  return r;
}

EvalRecord generate_group(const policy::PolicyNet& net, const tasks::TaskInstance& instance,
                          std::size_t instance_id, std::size_t k, const policy::SamplingParams& params,
                          const Rng& rng) {
  if (k == 0) throw ContractError("generate_group: k must be >= 1");
  const auto samples = policy::sample_group(net, instance.prompt, k, params, rng);
  std::vector<int> rewards;
  for (const auto& s : samples) rewards.push_back(tasks::verify(s.completion, instance));
  return EvalRecord::from_rewards(instance_id, std::move(rewards));
}

BenchmarkSummary aggregate(std::span<const EvalRecord> records) {
  if (records.empty()) throw ContractError("aggregate: no records");
  BenchmarkSummary s;
  s.records = records.size();
  double avg = 0.0, passed = 0.0;
  for (const auto& r : records) {
    avg += r.avg_at_k;
    passed += r.passed ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(records.size());
  s.mean_avg_at_k = 100.0 * avg / n;
  s.pass_rate = 100.0 * passed / n;
  return s;
}

void write_records_csv(std::ostream& out, std::span<const EvalRecord> records) {
  out << "instance_id,k,rewards,avg_at_k,passed\n";
  for (const auto& r : records) {
    std::string joined;
    for (std::size_t i = 0; i < r.rewards.size(); ++i) {
      if (i) joined += ';';
      joined += std::to_string(r.rewards[i]);
    }
    out << r.instance_id << ',' << r.k << ',' << joined << ',' << util::format_double(r.avg_at_k) << ','
        << (r.passed ? 1 : 0) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const BenchmarkSummary& summary) {
  out << "records,mean_avg_at_k,pass_rate\n"
      << summary.records << ',' << util::format_double(summary.mean_avg_at_k) << ','
      << util::format_double(summary.pass_rate) << '\n';
}

}  // namespace rlpeft::rollout
