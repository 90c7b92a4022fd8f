// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "rlpeft/errors.hpp"
#include "rlpeft/rlvr/objective.hpp"
#include "rlpeft/rlvr/optimizer.hpp"
#include "rlpeft/rlvr/trainer.hpp"
#include "rlpeft/rlvr/warm_start.hpp"
#include "test_util.hpp"

namespace rlpeft::rlvr {
namespace {

using adapters::AdapterKind;

std::vector<double> brute_force_advantages(const std::vector<double>& r, Variant v) {
  const double n = static_cast<double>(r.size());
  double total = 0.0;
  for (double x : r) total += x;
  const double mean = total / n;
  double var = 0.0;
  for (double x : r) var += (x - mean) * (x - mean) / n;
  std::vector<double> out;
  for (double x : r) {
    if (v == Variant::kDrGRPO) {
      out.push_back(x - mean);
    } else {
      out.push_back(var == 0.0 ? 0.0 : (x - mean) / std::sqrt(var));
    }
  }
  return out;
}

TEST(Advantages, Examples) {
  const std::vector<double> r = {1, 0, 0, 1};
  EXPECT_EQ(group_advantages(r, Variant::kGRPO), (std::vector<double>{1, -1, -1, 1}));
  EXPECT_EQ(group_advantages(r, Variant::kDrGRPO), (std::vector<double>{0.5, -0.5, -0.5, 0.5}));
  const std::vector<double> same = {1, 1, 1, 1};
  EXPECT_EQ(group_advantages(same, Variant::kGRPO), (std::vector<double>{0, 0, 0, 0}));
}

TEST(Advantages, RandomGroupsMatchBruteForce) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t g = 2 + rng.below(15);
    std::vector<double> r;
    for (std::size_t i = 0; i < g; ++i) r.push_back(rng.bernoulli(0.4) ? 1.0 : 0.0);
    for (Variant v : {Variant::kGRPO, Variant::kDAPO, Variant::kDrGRPO}) {
      const auto got = group_advantages(r, v);
      const auto want = brute_force_advantages(r, v);
      double mean = 0.0;
      for (std::size_t i = 0; i < g; ++i) {
        EXPECT_NEAR(got[i], want[i], 1e-12);
        mean += got[i];
      }
      EXPECT_NEAR(mean, 0.0, 1e-12);
    }
    // mean-shift invariance
    std::vector<double> shifted = r;
    for (double& x : shifted) x += 3.0;
    const auto a = group_advantages(r, Variant::kGRPO);
    const auto b = group_advantages(shifted, Variant::kGRPO);
    for (std::size_t i = 0; i < g; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(Surrogate, Examples) {
  const auto grpo = SurrogateParams::defaults(Variant::kGRPO);
  const auto dapo = SurrogateParams::defaults(Variant::kDAPO);
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.5, 1.0, grpo), 1.2);
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.5, 1.0, dapo), 1.28);
  EXPECT_DOUBLE_EQ(clipped_surrogate(0.5, -1.0, grpo), -0.8);
}

TEST(Surrogate, ClipKnees) {
  const auto grpo = SurrogateParams::defaults(Variant::kGRPO);
  const auto dapo = SurrogateParams::defaults(Variant::kDAPO);
  for (int i = 1; i <= 300; ++i) {
    const double ratio = i * 0.01;
    EXPECT_DOUBLE_EQ(clipped_surrogate(ratio, 1.0, grpo), std::min(ratio, 1.2));
    EXPECT_DOUBLE_EQ(clipped_surrogate(ratio, 1.0, dapo), std::min(ratio, 1.28));
  }
}

TEST(Surrogate, ParamValidation) {
  SurrogateParams p = SurrogateParams::defaults(Variant::kGRPO);
  p.eps_high = 0.28;
  EXPECT_THROW(p.validate(), ConfigError);
  p = SurrogateParams::defaults(Variant::kDAPO);
  p.eps_low = 0.3;
  EXPECT_THROW(p.validate(), ConfigError);
  p.eps_low = 0.2;
  EXPECT_NO_THROW(p.validate());
  EXPECT_THROW(parse_variant("PPO"), ConfigError);
}

RolloutGroup make_group(std::vector<double> rewards, std::vector<std::size_t> lengths) {
  RolloutGroup g;
  g.prompt = {1, 2};
  g.rewards = std::move(rewards);
  for (std::size_t n : lengths) {
    g.completions.emplace_back(n, 9);
    g.old_log_probs.emplace_back(n, -0.5);
  }
  return g;
}

TEST(Filter, DropsUniformGroups) {
  std::vector<RolloutGroup> groups = {make_group({1, 1, 1, 1}, {1, 1, 1, 1}),
                                      make_group({1, 0, 1, 0}, {1, 1, 1, 1}),
                                      make_group({0, 0, 0, 0}, {1, 1, 1, 1}),
                                      make_group({0, 1, 0, 0}, {2, 1, 1, 1})};
  const auto kept = dynamic_filter(groups);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].rewards, groups[1].rewards);
  EXPECT_EQ(kept[1].rewards, groups[3].rewards);
  EXPECT_TRUE(dynamic_filter({}).empty());
}

Var log_probs_from(const std::vector<RolloutGroup>& groups, double shift) {
  std::vector<double> v;
  for (const auto& g : groups)
    for (const auto& lp : g.old_log_probs)
      for (double x : lp) v.push_back(x + shift);
  Matrix m(1, v.size());
  for (std::size_t i = 0; i < v.size(); ++i) m[i] = v[i];
  return Var::leaf(m, true);
}

TEST(BatchLoss, RatioOneCollapse) {
  const std::vector<RolloutGroup> groups = {make_group({1, 0, 0, 1}, {2, 3, 1, 4})};
  for (Variant v : {Variant::kGRPO, Variant::kDAPO, Variant::kDrGRPO}) {
    const auto params = SurrogateParams::defaults(v);
    const double loss = batch_loss(groups, log_probs_from(groups, 0.0), params, 8).value()[0];
    const auto adv = group_advantages(groups[0].rewards, v);
    double want = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      const double len = static_cast<double>(groups[0].completions[i].size());
      want += v == Variant::kDrGRPO ? adv[i] * len / (4 * 8.0) : adv[i] / 4.0;
    }
    EXPECT_NEAR(loss, -want, 1e-15);
  }
  const std::vector<RolloutGroup> flat = {make_group({1, 1}, {3, 5})};
  EXPECT_EQ(batch_loss(flat, log_probs_from(flat, 0.3), SurrogateParams::defaults(Variant::kGRPO), 8).value()[0], 0.0);
}

TEST(BatchLoss, AveragesOverGroupsAndChecksShapes) {
  const std::vector<RolloutGroup> groups = {make_group({1, 0}, {2, 2}), make_group({0, 1, 1}, {1, 3, 2})};
  const auto params = SurrogateParams::defaults(Variant::kDAPO);
  const Var lp = log_probs_from(groups, 0.1);
  const double loss = batch_loss(groups, lp, params, 8).value()[0];
  double want = 0.0;
  for (const auto& g : groups) {
    const auto adv = group_advantages(g.rewards, params.variant);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double len = static_cast<double>(g.completions[i].size());
      want += len * clipped_surrogate(std::exp(0.1), adv[i], params) / (len * static_cast<double>(g.size()));
    }
  }
  EXPECT_NEAR(loss, -want / 2.0, 1e-14);

  const double err = testing::gradcheck({lp}, [&] { return batch_loss(groups, lp, params, 8); });
  EXPECT_LT(err, 1e-6);

  EXPECT_THROW(batch_loss(groups, Var::constant(Matrix(1, 3)), params, 8), ContractError);
  std::vector<RolloutGroup> bad = groups;
  bad[0].old_log_probs[0].pop_back();
  EXPECT_THROW(batch_loss(bad, lp, params, 8), ContractError);
}

TEST(LengthBias, GrpoEqualDrGrpoProportional) {
  const std::vector<std::vector<double>> ratios = {std::vector<double>(2, 1.0), std::vector<double>(10, 1.0)};
  const std::vector<double> adv = {1.0, 1.0};
  const auto grpo = response_contributions(ratios, adv, SurrogateParams::defaults(Variant::kGRPO), 10);
  EXPECT_DOUBLE_EQ(grpo[0], grpo[1]);
  const auto dr = response_contributions(ratios, adv, SurrogateParams::defaults(Variant::kDrGRPO), 10);
  EXPECT_DOUBLE_EQ(dr[1], 5.0 * dr[0]);
  const std::vector<std::size_t> lengths = {2, 10};
  EXPECT_EQ(token_weights(lengths, Variant::kGRPO, 10), (std::vector<double>{0.25, 0.05}));
  EXPECT_EQ(token_weights(lengths, Variant::kDrGRPO, 10), (std::vector<double>{0.05, 0.05}));
}

adapters::NamedParam scalar_param(double value, bool trainable) {
  return {"w", Var::leaf(Matrix(1, 1, value), trainable), adapters::ParamRole::kOther};
}

TEST(AdamTest, Examples) {
  auto p = scalar_param(0.5, true);
  auto frozen = scalar_param(2.0, false);
  {
    Adam idle({adapters::LrGroup{"default", 1e-3, {p}}});
    idle.step();
    EXPECT_EQ(p.var.value()[0], 0.5);
  }
  Adam adam({adapters::LrGroup{"default", 1e-3, {p, frozen}}});

  p.var.mutable_grad()[0] = 1.0;
  frozen.var.mutable_grad()[0] = 5.0;
  adam.step();
  EXPECT_NEAR(p.var.value()[0], 0.5 - 1e-3, 1e-10);
  EXPECT_EQ(frozen.var.value()[0], 2.0);
  EXPECT_EQ(adam.step_count(), 1u);

  p.var.mutable_grad()[0] = std::nan("");
  const double before = p.var.value()[0];
  try {
    adam.step();
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("'w'"), std::string::npos);
  }
  EXPECT_EQ(p.var.value()[0], before);
}

TEST(AdamTest, BiasCorrectedFirstStepForConstantGradient) {
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const double g = rng.uniform(-5, 5);
    auto p = scalar_param(0.0, true);
    Adam adam({adapters::LrGroup{"default", 0.01, {p}}});
    p.var.mutable_grad()[0] = g;
    adam.step();
    EXPECT_NEAR(p.var.value()[0], -0.01 * g / (std::abs(g) + 1e-8), 1e-12);
  }
}

policy::PolicyConfig tiny_policy() {
  policy::PolicyConfig cfg;
  cfg.vocab = 24;
  cfg.d_model = 16;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_ff = 16;
  cfg.max_seq = 16;
  return cfg;
}

std::vector<tasks::TaskInstance> batch_of(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<tasks::TaskInstance> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(tasks::gen_instance(tasks::TaskId::kModAdd, 1, rng));
  return out;
}

std::vector<StepReport> run(AdapterKind kind, Variant variant, std::size_t steps) {
  Rng rng(3);
  policy::PolicyNet net(tiny_policy(), rng);
  WarmStartConfig ws;
  ws.steps = 20;
  ws.batch = 8;
  warm_start(net, tasks::TaskId::kModAdd, 1, ws, rng.substream("warm"));
  adapters::AdapterConfig acfg;
  acfg.kind = kind;
  acfg.rank = 2;
  net.attach(acfg, rng);
  TrainerConfig tc;
  tc.surrogate = SurrogateParams::defaults(variant);
  tc.group_size = 4;
  tc.max_new = 4;
  tc.lr = 1e-2;
  Trainer trainer(net, tc);
  std::vector<StepReport> out;
  for (std::size_t s = 0; s < steps; ++s) out.push_back(trainer.step(batch_of(3, 100 + s), rng.substream("step", s)));
  return out;
}

TEST(TrainStep, DeterministicReplay) {
  const auto a = run(AdapterKind::kLoRA, Variant::kDAPO, 4);
  const auto b = run(AdapterKind::kLoRA, Variant::kDAPO, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].mean_reward, b[i].mean_reward);
    EXPECT_EQ(a[i].loss, b[i].loss);
    EXPECT_EQ(a[i].grad_norm, b[i].grad_norm);
    EXPECT_EQ(a[i].delta_norms, b[i].delta_norms);
  }
}

TEST(TrainStep, FrozenTensorsNeverChange) {
  for (AdapterKind kind : adapters::kAllKinds) {
    Rng rng(4);
    policy::PolicyNet net(tiny_policy(), rng);
    adapters::AdapterConfig acfg;
    acfg.kind = kind;
    acfg.rank = 2;
    net.attach(acfg, rng);
    std::vector<std::pair<Var, Matrix>> frozen;
    for (const auto& p : net.parameters())
      if (!p.trainable()) frozen.emplace_back(p.var, p.var.value());
    TrainerConfig tc;
    tc.surrogate = SurrogateParams::defaults(Variant::kGRPO);
    tc.group_size = 3;
    tc.max_new = 3;
    Trainer trainer(net, tc);
    for (std::size_t s = 0; s < 2; ++s) {
      const auto r = trainer.step(batch_of(2, s), rng.substream("step", s));
      EXPECT_TRUE(std::isfinite(r.loss));
      EXPECT_TRUE(std::isfinite(r.grad_norm));
    }
    for (const auto& [var, value] : frozen) EXPECT_EQ(var.value(), value) << adapters::kind_name(kind);
  }
}

TEST(TrainStep, PerfectPolicySkippedUnderDapo) {
  Rng rng(5);
  policy::PolicyNet net(tiny_policy(), rng);
  adapters::AdapterConfig acfg;
  net.attach(acfg, rng);
  // Force the head to always emit [kAns, truth, kEos] for a fixed instance.
  const tasks::TaskInstance inst = tasks::make_modadd(1, 1, 7);
  TrainerConfig tc;
  tc.group_size = 4;
  tc.max_new = 3;
  Trainer trainer(net, tc);
  // Replace the head with one that keys on the previous token only through a
  // huge bias: rows for kAns/truth/kEos dominate in sequence via position.
  for (auto& p : net.parameters()) {
    if (p.name != "head") continue;
    p.var.mutable_value().fill(0.0);
  }
  // A uniform policy over 24 tokens is almost never right: every group is all-0.
  const std::vector<tasks::TaskInstance> batch(3, inst);
  const auto r = trainer.step(batch, rng.substream("s"));
  EXPECT_TRUE(r.skipped);
  EXPECT_EQ(r.groups_used, 0u);
  EXPECT_EQ(r.loss, 0.0);
}

TEST(TrainStep, MixedRewardsGiveFiniteUpdates) {
  const auto reports = run(AdapterKind::kDoRA, Variant::kDrGRPO, 3);
  for (const auto& r : reports) {
    EXPECT_TRUE(std::isfinite(r.loss));
    EXPECT_GE(r.mean_reward, 0.0);
    EXPECT_LE(r.mean_reward, 1.0);
    EXPECT_EQ(r.delta_norms.size(), 7u);
  }
}

TEST(WarmStart, TeachesAnswerFormat) {
  Rng rng(6);
  policy::PolicyNet net(tiny_policy(), rng);
  WarmStartConfig ws;
  ws.steps = 150;
  ws.batch = 16;
  ws.lr = 1e-2;
  warm_start(net, tasks::TaskId::kModAdd, 1, ws, rng.substream("warm"));
  int well_formed = 0;
  Rng eval(7);
  for (int i = 0; i < 40; ++i) {
    const auto inst = tasks::gen_instance(tasks::TaskId::kModAdd, 1, eval);
    const auto c = policy::sample_completion(net, inst.prompt, 1.0, 1.0, 4, eval);
    well_formed += c.size() == 3 && c[0] == tasks::tok::kAns && c[2] == tasks::tok::kEos;
  }
  EXPECT_GE(well_formed, 36);
  for (const auto& p : net.parameters()) EXPECT_FALSE(p.trainable());
}

}  // namespace
}  // namespace rlpeft::rlvr
