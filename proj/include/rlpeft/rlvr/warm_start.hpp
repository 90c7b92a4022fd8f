// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "rlpeft/policy/policy.hpp"
#include "rlpeft/tasks/tasks.hpp"
#include "rlpeft/tensor/rng.hpp"

namespace rlpeft::rlvr {

struct WarmStartConfig {
  std::size_t steps = 300;
  double lr = 3e-3;
  std::size_t batch = 32;
  /// Share of each batch drawn from the related skill (gen_auxiliary) with
  /// correct answers; the rest are task prompts with random answers.
  double auxiliary_fraction = 0.5;
};

/// Supervised pass over the base weights teaching the answer format
/// [kAns, answer, kEos]. Task prompts get answers drawn independently of the
/// prompt, so the policy is well formed but at chance on the task itself;
/// auxiliary prompts carry correct answers.
/// Must run before adapters are attached; returns the final batch loss.
double warm_start(policy::PolicyNet& net, tasks::TaskId task, int difficulty,
                  const WarmStartConfig& cfg, const Rng& rng);

}  // namespace rlpeft::rlvr
