// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "rlpeft/tasks/tasks.hpp"
#include "rlpeft/tensor/autodiff.hpp"

namespace rlpeft::rlvr {

enum class Variant { kGRPO, kDAPO, kDrGRPO };

std::string_view variant_name(Variant v);
/// Throws ConfigError on an unknown name.
Variant parse_variant(std::string_view name);

struct SurrogateParams {
  Variant variant = Variant::kDAPO;
  double eps_low = 0.2;
  double eps_high = 0.28;
  double std_floor = 1e-6;

  static SurrogateParams defaults(Variant v);
  /// Throws ConfigError unless 0 < eps_low <= eps_high < 1 (equal for GRPO).
  void validate() const;
};

struct RolloutGroup {
  tasks::Sequence prompt;
  std::vector<tasks::Sequence> completions;
  std::vector<double> rewards;
  std::vector<std::vector<double>> old_log_probs;

  std::size_t size() const { return completions.size(); }
  std::size_t total_tokens() const;
  /// Throws ContractError on G < 2, shape mismatch or non-binary rewards.
  void validate() const;
};

/// GRPO/DAPO: (R - mean) / max(std, floor) with population std.
/// DrGRPO: R - mean.
std::vector<double> group_advantages(std::span<const double> rewards, Variant variant,
                                     double std_floor = 1e-6);

/// min(ratio * adv, clip(ratio, 1 - eps_low, 1 + eps_high) * adv).
double clipped_surrogate(double ratio, double adv, const SurrogateParams& params);

/// Drops groups whose rewards are all equal; survivors keep their order.
std::vector<RolloutGroup> dynamic_filter(std::vector<RolloutGroup> groups);

/// Per-response weight on the summed token surrogate: 1 / (G |o_i|) for
/// GRPO and DAPO, 1 / (G L_max) for DrGRPO. Empty responses weigh 0.
std::vector<double> token_weights(std::span<const std::size_t> lengths, Variant variant,
                                  std::size_t l_max);

/// weight_i * sum_t surrogate(ratio_it, adv_i) for each response.
std::vector<double> response_contributions(std::span<const std::vector<double>> ratios,
                                           std::span<const double> advantages,
                                           const SurrogateParams& params, std::size_t l_max);

/// Negated objective averaged over groups. `new_log_probs` is 1 x T with the
/// tokens of every group's completions concatenated in order.
Var batch_loss(std::span<const RolloutGroup> groups, const Var& new_log_probs,
               const SurrogateParams& params, std::size_t l_max);

}  // namespace rlpeft::rlvr
