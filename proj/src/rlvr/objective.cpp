// SPDX-License-Identifier: Apache-2.0
#include "rlpeft/rlvr/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rlpeft/errors.hpp"

namespace rlpeft::rlvr {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kGRPO: return "GRPO";
    case Variant::kDAPO: return "DAPO";
    case Variant::kDrGRPO: return "DrGRPO";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::kGRPO, Variant::kDAPO, Variant::kDrGRPO})
    if (variant_name(v) == name) return v;
  throw ConfigError("rlvr.variant: unknown variant '" + std::string(name) + "'");
}

SurrogateParams SurrogateParams::defaults(Variant v) {
  SurrogateParams p;
  p.variant = v;
  p.eps_high = v == Variant::kDAPO ? 0.28 : 0.2;
  return p;
}

void SurrogateParams::validate() const {
  if (!(eps_low > 0.0 && eps_low <= eps_high && eps_high < 1.0)) {
    throw ConfigError("rlvr.eps_low/eps_high: need 0 < eps_low <= eps_high < 1, got " +
                      std::to_string(eps_low) + ", " + std::to_string(eps_high));
  }
  if (variant == Variant::kGRPO && eps_low != eps_high) {
    throw ConfigError("rlvr.eps_high: GRPO clips symmetrically; eps_high must equal eps_low");
  }
  if (!(std_floor > 0.0) || !std::isfinite(std_floor)) throw ConfigError("rlvr.std_floor: must be positive");
}

std::size_t RolloutGroup::total_tokens() const {
  std::size_t n = 0;
  for (const auto& c : completions) n += c.size();
  return n;
}

void RolloutGroup::validate() const {
  const std::size_t g = completions.size();
  if (g < 2) throw ContractError("rollout group needs G >= 2, got " + std::to_string(g));
  if (rewards.size() != g || old_log_probs.size() != g) {
    throw ContractError("rollout group: " + std::to_string(g) + " completions, " +
                        std::to_string(rewards.size()) + " rewards, " +
                        std::to_string(old_log_probs.size()) + " log-prob rows");
  }
  for (std::size_t i = 0; i < g; ++i) {
    if (old_log_probs[i].size() != completions[i].size()) {
      throw ContractError("rollout group: completion " + std::to_string(i) + " has " +
                          std::to_string(completions[i].size()) + " tokens but " +
                          std::to_string(old_log_probs[i].size()) + " log-probs");
    }
    if (rewards[i] != 0.0 && rewards[i] != 1.0) throw ContractError("rollout group: non-binary reward");
  }
}

std::vector<double> group_advantages(std::span<const double> rewards, Variant variant, double std_floor) {
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = rewards[i] - mean;
  if (variant == Variant::kDrGRPO) return adv;
  double var = 0.0;
  for (double a : adv) var += a * a;
  const double sd = std::max(std::sqrt(var / n), std_floor);
  for (double& a : adv) a /= sd;
  return adv;
}

double clipped_surrogate(double ratio, double adv, const SurrogateParams& params) {
  const double clipped = std::clamp(ratio, 1.0 - params.eps_low, 1.0 + params.eps_high);
  return std::min(ratio * adv, clipped * adv);
}

std::vector<RolloutGroup> dynamic_filter(std::vector<RolloutGroup> groups) {
  std::erase_if(groups, [](const RolloutGroup& g) {
    return std::adjacent_find(g.rewards.begin(), g.rewards.end(), std::not_equal_to<>()) == g.rewards.end();
  });
  return groups;
}

std::vector<double> token_weights(std::span<const std::size_t> lengths, Variant variant, std::size_t l_max) {
  const double g = static_cast<double>(lengths.size());
  std::vector<double> w(lengths.size(), 0.0);
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] == 0) continue;
    const double norm = variant == Variant::kDrGRPO ? static_cast<double>(l_max) : static_cast<double>(lengths[i]);
    w[i] = 1.0 / (g * norm);
  }
  return w;
}

std::vector<double> response_contributions(std::span<const std::vector<double>> ratios,
                                           std::span<const double> advantages,
                                           const SurrogateParams& params, std::size_t l_max) {
  if (ratios.size() != advantages.size()) throw ContractError("response_contributions: size mismatch");
  std::vector<std::size_t> lengths;
  for (const auto& r : ratios) lengths.push_back(r.size());
  const auto w = token_weights(lengths, params.variant, l_max);
  std::vector<double> out(ratios.size(), 0.0);
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    double s = 0.0;
    for (double r : ratios[i]) s += clipped_surrogate(r, advantages[i], params);
    out[i] = w[i] * s;
  }
  return out;
}

Var batch_loss(std::span<const RolloutGroup> groups, const Var& new_log_probs,
               const SurrogateParams& params, std::size_t l_max) {
  if (groups.empty()) throw ContractError("batch_loss: no groups");
  std::size_t total = 0;
  for (const auto& g : groups) {
    g.validate();
    total += g.total_tokens();
  }
  if (new_log_probs.rows() != 1 || new_log_probs.cols() != total) {
    throw ContractError("batch_loss: expected 1x" + std::to_string(total) + " log-probs, got " +
                        shape_string(new_log_probs.value()));
  }
  Matrix old(1, total), adv(1, total), weight(1, total);
  std::size_t t = 0;
  const double inv_groups = 1.0 / static_cast<double>(groups.size());
  for (const auto& g : groups) {
    const auto a = group_advantages(g.rewards, params.variant, params.std_floor);
    std::vector<std::size_t> lengths;
    for (const auto& c : g.completions) lengths.push_back(c.size());
    const auto w = token_weights(lengths, params.variant, l_max);
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (double lp : g.old_log_probs[i]) {
        old[t] = lp;
        adv[t] = a[i];
        weight[t] = -w[i] * inv_groups;
        ++t;
      }
    }
  }
  const Var ratio = exp(sub(new_log_probs, Var::constant(old)));
  const Var advv = Var::constant(adv);
  const Var surrogate = minimum(hadamard(ratio, advv),
                                hadamard(clip(ratio, 1.0 - params.eps_low, 1.0 + params.eps_high), advv));
  return weighted_sum(surrogate, weight);
}

}  // namespace rlpeft::rlvr
