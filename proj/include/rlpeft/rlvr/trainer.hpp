// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rlpeft/policy/policy.hpp"
#include "rlpeft/rlvr/objective.hpp"
#include "rlpeft/rlvr/optimizer.hpp"
#include "rlpeft/tasks/tasks.hpp"
#include "rlpeft/tensor/rng.hpp"

namespace rlpeft::rlvr {

struct TrainerConfig {
  SurrogateParams surrogate;
  std::size_t group_size = 8;
  /// Longest completion sampled; also Dr. GRPO's L_max.
  std::size_t max_new = 8;
  double temperature = 1.0;
  double top_p = 1.0;
  double lr = 1e-3;
  AdamParams adam;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct StepReport {
  std::size_t step = 0;
  double mean_reward = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  bool skipped = false;
  std::size_t groups_used = 0;
  std::size_t groups_total = 0;
  /// ||delta W||_F per projection, in PolicyNet::linears() order.
  std::vector<double> delta_norms;
};

/// Frobenius norm of the layer's effective weight change; 0 for untouched
/// layers. IA3's rescaling is expressed as the equivalent dense delta.
double update_norm(const adapters::LinearWithAdapter& layer);

/// On-policy trainer: one optimizer step per rollout batch.
class Trainer {
 public:
  /// `net` must have adapters attached and must outlive the trainer.
  Trainer(policy::PolicyNet& net, TrainerConfig cfg);

  /// Samples G completions per instance from the current policy, scores
  /// them, and takes one step. Deterministic given `rng`.
  StepReport step(std::span<const tasks::TaskInstance> batch, const Rng& rng);

  /// Collects scored groups without updating anything.
  std::vector<RolloutGroup> rollouts(std::span<const tasks::TaskInstance> batch, const Rng& rng) const;

  const Adam& optimizer() const { return adam_; }
  std::size_t steps_taken() const { return step_; }

 private:
  void apply_adalora_budget();

  policy::PolicyNet& net_;
  TrainerConfig cfg_;
  Adam adam_;
  std::size_t step_ = 0;
};

}  // namespace rlpeft::rlvr
