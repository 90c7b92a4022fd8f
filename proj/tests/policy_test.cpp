// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "rlpeft/errors.hpp"
#include "rlpeft/policy/policy.hpp"
#include "test_util.hpp"

namespace rlpeft::policy {
namespace {

using adapters::AdapterKind;

PolicyConfig small_config() {
  PolicyConfig cfg;
  cfg.vocab = 16;
  cfg.d_model = 16;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_ff = 24;
  cfg.max_seq = 12;
  return cfg;
}

Sequence random_tokens(std::size_t n, std::size_t vocab, Rng& rng) {
  Sequence s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(static_cast<Token>(rng.below(vocab)));
  return s;
}

TEST(Config, Validation) {
  PolicyConfig cfg = small_config();
  EXPECT_NO_THROW(cfg.validate());
  cfg.n_heads = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.vocab = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Forward, ShapeCausalityDeterminism) {
  Rng rng(1);
  PolicyNet net(small_config(), rng);
  Sequence s = random_tokens(8, 16, rng);
  const Matrix logits = forward_logits(net, s);
  EXPECT_EQ(logits.rows(), 8u);
  EXPECT_EQ(logits.cols(), 16u);
  EXPECT_TRUE(logits.all_finite());
  EXPECT_EQ(forward_logits(net, s), logits);

  Sequence changed = s;
  for (std::size_t t = 5; t < 8; ++t) changed[t] = static_cast<Token>((changed[t] + 7) % 16);
  const Matrix other = forward_logits(net, changed);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t v = 0; v < 16; ++v) EXPECT_EQ(other(t, v), logits(t, v));
}

TEST(Forward, BatchMatchesSeparateCalls) {
  Rng rng(2);
  PolicyNet net(small_config(), rng);
  const std::vector<Sequence> seqs = {random_tokens(3, 16, rng), random_tokens(7, 16, rng),
                                      random_tokens(1, 16, rng)};
  NoGradGuard guard;
  const Matrix joint = net.forward(seqs).value();
  std::size_t col = 0;
  for (const Sequence& s : seqs) {
    const Matrix alone = forward_logits(net, s);
    for (std::size_t t = 0; t < s.size(); ++t)
      for (std::size_t v = 0; v < 16; ++v) EXPECT_NEAR(joint(v, col + t), alone(t, v), 1e-12);
    col += s.size();
  }
}

TEST(Forward, Errors) {
  Rng rng(3);
  PolicyNet net(small_config(), rng);
  EXPECT_THROW(forward_logits(net, random_tokens(13, 16, rng)), DimensionError);
  EXPECT_THROW(forward_logits(net, Sequence{1, 16}), ContractError);
  EXPECT_THROW(sequence_log_prob(net, Sequence{}, Sequence{1}), ContractError);
  EXPECT_THROW(sequence_log_prob(net, Sequence{1}, Sequence{40}), ContractError);
}

TEST(LogProb, UniformLogitsGiveMinusLogVocab) {
  Rng rng(4);
  PolicyNet net(small_config(), rng);
  for (auto& p : net.parameters())
    if (p.name == "head") p.var.mutable_value().fill(0.0);
  const auto lp = sequence_log_prob(net, Sequence{1, 5}, Sequence{3, 9, 2});
  ASSERT_EQ(lp.size(), 3u);
  for (double v : lp) EXPECT_NEAR(v, -std::log(16.0), 1e-12);
  EXPECT_TRUE(sequence_log_prob(net, Sequence{1}, Sequence{}).empty());
}

TEST(LogProb, ChainRuleAgainstPrefixLogits) {
  Rng rng(5);
  PolicyNet net(small_config(), rng);
  const Sequence prompt = random_tokens(4, 16, rng);
  const Sequence completion = random_tokens(5, 16, rng);
  const auto lp = sequence_log_prob(net, prompt, completion, 0.7);
  double joint = 0.0;
  Sequence prefix = prompt;
  for (Token t : completion) {
    const Matrix logits = forward_logits(net, prefix);
    const std::size_t last = prefix.size() - 1;
    double mx = -1e300;
    for (std::size_t v = 0; v < 16; ++v) mx = std::max(mx, logits(last, v) / 0.7);
    double z = 0.0;
    for (std::size_t v = 0; v < 16; ++v) z += std::exp(logits(last, v) / 0.7 - mx);
    joint += logits(last, t) / 0.7 - mx - std::log(z);
    prefix.push_back(t);
  }
  double sum = 0.0;
  for (double v : lp) {
    EXPECT_LE(v, 0.0);
    sum += v;
  }
  EXPECT_NEAR(sum, joint, 1e-10);
}

TEST(Sampling, TemperatureZeroIsGreedy) {
  Rng rng(6);
  PolicyNet net(small_config(), rng);
  const Sequence prompt = {1, 4, 7};
  Sequence greedy;
  Sequence prefix = prompt;
  for (int i = 0; i < 6; ++i) {
    const Matrix logits = forward_logits(net, prefix);
    Token best = 0;
    for (Token v = 1; v < 16; ++v)
      if (logits(prefix.size() - 1, v) > logits(prefix.size() - 1, best)) best = v;
    greedy.push_back(best);
    prefix.push_back(best);
    if (best == tasks::tok::kEos) break;
  }
  Rng s(7);
  EXPECT_EQ(sample_completion(net, prompt, 0.0, 0.95, 6, s), greedy);
  EXPECT_TRUE(sample_completion(net, prompt, 1.0, 1.0, 0, s).empty());
}

TEST(Sampling, FrequenciesMatchSoftmax) {
  const std::vector<double> logits = {0.3, -1.0, 2.0, 0.0, 1.1};
  double z = 0.0;
  for (double l : logits) z += std::exp(l);
  std::vector<int> counts(logits.size(), 0);
  Rng rng(8);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[sample_token(logits, 1.0, 1.0, rng)];
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double p = std::exp(logits[k]) / z;
    const double sigma = std::sqrt(n * p * (1 - p));
    EXPECT_LE(std::abs(counts[k] - n * p), 3 * sigma) << k;
  }
}

TEST(Sampling, TopPKeepsBoundaryToken) {
  // probabilities 0.5, 0.3, 0.2
  const std::vector<double> logits = {std::log(0.5), std::log(0.3), std::log(0.2)};
  auto p = sampling_distribution(logits, 1.0, 0.6);
  EXPECT_NEAR(p[0], 0.5 / 0.8, 1e-12);
  EXPECT_NEAR(p[1], 0.3 / 0.8, 1e-12);
  EXPECT_EQ(p[2], 0.0);
  p = sampling_distribution(logits, 1.0, 0.5);
  EXPECT_NEAR(p[0], 1.0, 1e-12);
  EXPECT_THROW(sampling_distribution(logits, -1.0, 0.5), ContractError);
  EXPECT_THROW(sampling_distribution(logits, 1.0, 0.0), ContractError);
}

TEST(Sampling, GroupLogProbsMatchRecomputation) {
  Rng rng(9);
  PolicyNet net(small_config(), rng);
  const Sequence prompt = {1, 3, 8};
  for (double temp : {1.0, 0.6}) {
    const auto samples = sample_group(net, prompt, 6, SamplingParams{temp, 1.0, 5}, Rng(10));
    for (const Sample& s : samples) {
      const auto lp = sequence_log_prob(net, prompt, s.completion, temp);
      ASSERT_EQ(lp.size(), s.log_probs.size());
      for (std::size_t t = 0; t < lp.size(); ++t) EXPECT_NEAR(lp[t], s.log_probs[t], 1e-9);
    }
  }
  // Sample i does not depend on how many siblings were drawn.
  const auto few = sample_group(net, prompt, 2, SamplingParams{1.0, 1.0, 5}, Rng(11));
  const auto many = sample_group(net, prompt, 5, SamplingParams{1.0, 1.0, 5}, Rng(11));
  EXPECT_EQ(few[1].completion, many[1].completion);
}

TEST(Attach, EndToEndTransparency) {
  for (AdapterKind kind : adapters::kAllKinds) {
    Rng rng(12);
    PolicyNet net(small_config(), rng);
    const Sequence s = random_tokens(9, 16, rng);
    const Matrix before = forward_logits(net, s);
    adapters::AdapterConfig cfg;
    cfg.kind = kind;
    cfg.rank = 2;
    net.attach(cfg, rng);
    EXPECT_LE(testing::max_abs_diff(forward_logits(net, s), before), 1e-9) << adapters::kind_name(kind);
    EXPECT_THROW(net.attach(cfg, rng), ContractError);
  }
}

TEST(Attach, TrainableSetsPerKind) {
  Rng rng(13);
  PolicyNet full(small_config(), rng);
  adapters::AdapterConfig cfg;
  cfg.kind = AdapterKind::kFull;
  full.attach(cfg, rng);
  EXPECT_DOUBLE_EQ(adapters::trainable_fraction(full.parameters()), 1.0);

  PolicyNet ln(small_config(), rng);
  cfg.kind = AdapterKind::kLNTuning;
  ln.attach(cfg, rng);
  for (const auto& p : ln.parameters())
    EXPECT_EQ(p.trainable(), p.role == adapters::ParamRole::kLayerNorm) << p.name;

  PolicyNet lora(small_config(), rng);
  cfg.kind = AdapterKind::kLoRA;
  lora.attach(cfg, rng);
  for (const auto& p : lora.parameters()) {
    const bool factor = p.role == adapters::ParamRole::kLowRankA || p.role == adapters::ParamRole::kLowRankB;
    EXPECT_EQ(p.trainable(), factor) << p.name;
  }
}

TEST(Attach, ModuleNames) {
  Rng rng(14);
  PolicyNet net(small_config(), rng);
  const auto layers = net.linears();
  ASSERT_EQ(layers.size(), 14u);
  EXPECT_EQ(layers[0]->name(), "layers.0.self_attn.q_proj");
  EXPECT_EQ(layers[6]->name(), "layers.0.mlp.down_proj");
  EXPECT_EQ(layers[13]->name(), "layers.1.mlp.down_proj");
}

// End-to-end gradient check through the full network for the kinds whose
// trainable tensors live outside the projections.
TEST(Gradients, WholeNetworkFullAndLayerNorm) {
  PolicyConfig cfg;
  cfg.vocab = 10;
  cfg.d_model = 6;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_ff = 8;
  cfg.max_seq = 8;
  for (AdapterKind kind : {AdapterKind::kFull, AdapterKind::kLNTuning, AdapterKind::kIA3}) {
    Rng rng(15);
    PolicyNet net(cfg, rng);
    adapters::AdapterConfig acfg;
    acfg.kind = kind;
    acfg.dropout = 0.0;
    net.attach(acfg, rng);
    std::vector<Var> leaves;
    for (auto& p : net.parameters()) {
      if (!p.trainable()) continue;
      for (double& v : p.var.mutable_value().data()) v += 0.2 * rng.normal();
      leaves.push_back(p.var);
    }
    const std::vector<Sequence> prompts = {{1, 4, 5}, {1, 9}};
    const std::vector<Sequence> completions = {{3, 8, 2}, {7, 2}};
    const double err = testing::gradcheck(leaves, [&] {
      return sum(completion_log_probs(net, prompts, completions, 0.8));
    });
    EXPECT_LT(err, 1e-5) << adapters::kind_name(kind);
  }
}

TEST(Counting, DefaultPolicyClosedForms) {
  Rng rng(16);
  const PolicyConfig cfg;
  const std::size_t d = cfg.d_model, f = cfg.d_ff, L = cfg.n_layers;
  const std::size_t per_layer = 4 * d * d + 3 * d * f + 4 * d;
  const std::size_t base = 2 * cfg.vocab * d + cfg.max_seq * d + L * per_layer + 2 * d;
  PolicyNet plain(cfg, rng);
  EXPECT_EQ(adapters::count_parameters(plain.parameters()).total, base);
  EXPECT_EQ(base, 94848u);

  adapters::AdapterConfig acfg;
  acfg.kind = AdapterKind::kLoRA;
  for (std::size_t r : {1u, 4u}) {
    PolicyNet net(cfg, rng);
    acfg.rank = r;
    net.attach(acfg, rng);
    const auto c = adapters::count_parameters(net.parameters());
    const std::size_t lora = L * r * (4 * 2 * d + 3 * (d + f));
    EXPECT_EQ(c.trainable, lora);
    EXPECT_EQ(c.total, base + lora);
  }
}

}  // namespace
}  // namespace rlpeft::policy
