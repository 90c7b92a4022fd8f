// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "rlpeft/errors.hpp"
#include "rlpeft/rollout/rollout.hpp"

namespace rlpeft::rollout {
namespace {

TEST(Record, Definitions) {
  const EvalRecord r = EvalRecord::from_rewards(3, {1, 1, 1, 0});
  EXPECT_EQ(r.k, 4u);
  EXPECT_DOUBLE_EQ(r.avg_at_k, 0.75);
  EXPECT_TRUE(r.passed);
  const EvalRecord z = EvalRecord::from_rewards(4, {0, 0, 0});
  EXPECT_EQ(z.avg_at_k, 0.0);
  EXPECT_FALSE(z.passed);
}

TEST(Aggregate, Examples) {
  const std::vector<EvalRecord> two = {EvalRecord::from_rewards(0, {1, 0}), EvalRecord::from_rewards(1, {1, 1})};
  const BenchmarkSummary s = aggregate(two);
  EXPECT_DOUBLE_EQ(s.mean_avg_at_k, 75.0);
  EXPECT_DOUBLE_EQ(s.pass_rate, 100.0);

  const std::vector<EvalRecord> one = {EvalRecord::from_rewards(0, {0, 1, 0, 0})};
  const BenchmarkSummary single = aggregate(one);
  EXPECT_DOUBLE_EQ(single.mean_avg_at_k, 25.0);
  EXPECT_DOUBLE_EQ(single.pass_rate, 100.0);
  EXPECT_THROW(aggregate(std::vector<EvalRecord>{}), ContractError);
}

TEST(Aggregate, PermutationInvariantAndBounded) {
  Rng rng(1);
  std::vector<EvalRecord> recs;
  for (std::size_t i = 0; i < 40; ++i) {
    std::vector<int> r;
    const std::size_t k = 1 + rng.below(6);
    for (std::size_t j = 0; j < k; ++j) r.push_back(rng.bernoulli(0.3) ? 1 : 0);
    recs.push_back(EvalRecord::from_rewards(i, r));
    EXPECT_GE(recs.back().avg_at_k, 0.0);
    EXPECT_LE(recs.back().avg_at_k, 1.0);
    if (recs.back().passed) EXPECT_GE(recs.back().avg_at_k, 1.0 / static_cast<double>(k));
  }
  const BenchmarkSummary a = aggregate(recs);
  std::reverse(recs.begin(), recs.end());
  const BenchmarkSummary b = aggregate(recs);
  EXPECT_NEAR(a.mean_avg_at_k, b.mean_avg_at_k, 1e-12);
  EXPECT_EQ(a.pass_rate, b.pass_rate);
}

TEST(Generate, GreedyGivesIdenticalSamples) {
  Rng rng(2);
  policy::PolicyConfig cfg;
  cfg.vocab = 24;
  cfg.d_model = 16;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_ff = 16;
  cfg.max_seq = 16;
  policy::PolicyNet net(cfg, rng);
  const auto inst = tasks::make_modadd(2, 3, 7);
  const EvalRecord r = generate_group(net, inst, 0, 4, policy::SamplingParams{0.0, 0.95, 4}, rng);
  EXPECT_EQ(r.k, 4u);
  EXPECT_TRUE(r.avg_at_k == 0.0 || r.avg_at_k == 1.0);
  const EvalRecord again = generate_group(net, inst, 0, 4, policy::SamplingParams{0.6, 0.95, 4}, Rng(5));
  const EvalRecord same = generate_group(net, inst, 0, 4, policy::SamplingParams{0.6, 0.95, 4}, Rng(5));
  EXPECT_EQ(again.rewards, same.rewards);
  EXPECT_THROW(generate_group(net, inst, 0, 0, {}, rng), ContractError);
}

TEST(Csv, RecordAndSummaryRows) {
  const std::vector<EvalRecord> recs = {EvalRecord::from_rewards(7, {1, 0, 1, 1})};
  std::ostringstream out;
  write_records_csv(out, recs);
  EXPECT_EQ(out.str(), "instance_id,k,rewards,avg_at_k,passed\n7,4,1;0;1;1,0.75,1\n");
  std::ostringstream sum;
  write_summary_csv(sum, aggregate(recs));
  EXPECT_EQ(sum.str(), "records,mean_avg_at_k,pass_rate\n1,75,100\n");
}

}  // namespace
}  // namespace rlpeft::rollout
