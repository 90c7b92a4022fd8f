// SPDX-License-Identifier: Apache-2.0
#include "rlpeft/rlvr/trainer.hpp"

#include <cmath>
#include <string>
#include <variant>

#include "rlpeft/errors.hpp"

namespace rlpeft::rlvr {

using adapters::AdapterKind;

void TrainerConfig::validate() const {
  surrogate.validate();
  if (group_size < 2) throw ConfigError("rlvr.group_size: must be >= 2");
  if (max_new == 0) throw ConfigError("rlvr.max_new: must be positive");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ConfigError("rlvr.temperature: must be > 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("rlvr.top_p: must be in (0, 1]");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("rlvr.lr: must be > 0");
}

double update_norm(const adapters::LinearWithAdapter& layer) {
  return frobenius_norm(adapters::effective_delta(layer));
}

Trainer::Trainer(policy::PolicyNet& net, TrainerConfig cfg)
    : net_(net),
      cfg_(std::move(cfg)),
      adam_(adapters::lr_groups(net.parameters(), cfg_.lr, net.adapter_config()), cfg_.adam) {
  cfg_.validate();
  if (!net.attached()) throw ContractError("Trainer: attach adapters before training");
}

std::vector<RolloutGroup> Trainer::rollouts(std::span<const tasks::TaskInstance> batch, const Rng& rng) const {
  const policy::SamplingParams sp{cfg_.temperature, cfg_.top_p, cfg_.max_new};
  std::vector<RolloutGroup> groups;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto samples = policy::sample_group(net_, batch[b].prompt, cfg_.group_size, sp, rng.substream("rollout", b));
    RolloutGroup g;
    g.prompt = batch[b].prompt;
    for (const auto& s : samples) {
      g.completions.push_back(s.completion);
      g.old_log_probs.push_back(s.log_probs);
      g.rewards.push_back(static_cast<double>(tasks::verify(s.completion, batch[b])));
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

StepReport Trainer::step(std::span<const tasks::TaskInstance> batch, const Rng& rng) {
  if (batch.empty()) throw ContractError("train_step: empty batch");
  StepReport report;
  report.step = step_;
  std::vector<RolloutGroup> groups = rollouts(batch, rng);
  double reward_sum = 0.0;
  std::size_t n = 0;
  for (const auto& g : groups) {
    for (double r : g.rewards) reward_sum += r;
    n += g.size();
  }
  report.mean_reward = reward_sum / static_cast<double>(n);
  report.groups_total = groups.size();
  if (cfg_.surrogate.variant == Variant::kDAPO) groups = dynamic_filter(std::move(groups));
  report.groups_used = groups.size();

  if (groups.empty()) {
    report.skipped = true;
  } else {
    std::vector<tasks::Sequence> prompts, completions;
    for (const auto& g : groups) {
      for (const auto& c : g.completions) {
        prompts.push_back(g.prompt);
        completions.push_back(c);
      }
    }
    Rng dropout = rng.substream("dropout");
    adam_.zero_grad();
    const Var lp = policy::completion_log_probs(net_, prompts, completions, cfg_.temperature, true, &dropout);
    const Var loss = batch_loss(groups, lp, cfg_.surrogate, cfg_.max_new);
    report.loss = loss.value()[0];
    if (!std::isfinite(report.loss)) throw NumericError("train_step: non-finite loss at step " + std::to_string(step_));
    backward(loss);
    report.grad_norm = adam_.grad_norm();
    adam_.step();
    adam_.zero_grad();
  }
  ++step_;
  apply_adalora_budget();
  for (const auto* l : std::as_const(net_).linears()) report.delta_norms.push_back(update_norm(*l));
  return report;
}

void Trainer::apply_adalora_budget() {
  const auto& acfg = net_.adapter_config();
  if (acfg.kind != AdapterKind::kAdaLoRA) return;
  const adapters::PruneSchedule schedule{acfg.adalora_t_init, acfg.adalora_t_final};
  const std::size_t budget = adapters::adalora_budget(acfg.rank, acfg.effective_adalora_target(), step_, schedule);
  for (auto* l : net_.linears()) {
    if (auto* s = std::get_if<adapters::AdaLoraState>(&l->state())) adapters::adalora_apply_budget(*s, budget);
  }
}

}  // namespace rlpeft::rlvr
