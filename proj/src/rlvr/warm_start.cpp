// SPDX-License-Identifier: Apache-2.0
#include "rlpeft/rlvr/warm_start.hpp"

#include "rlpeft/errors.hpp"
#include "rlpeft/rlvr/optimizer.hpp"

namespace rlpeft::rlvr {

double warm_start(policy::PolicyNet& net, tasks::TaskId task, int difficulty,
                  const WarmStartConfig& cfg, const Rng& rng) {
  if (net.attached()) throw ContractError("warm_start: adapters already attached");
  if (cfg.steps == 0) return 0.0;
  if (cfg.batch == 0 || !(cfg.lr > 0.0)) throw ConfigError("policy.warm_start: batch and lr must be positive");
  if (!(cfg.auxiliary_fraction >= 0.0 && cfg.auxiliary_fraction <= 1.0)) {
    throw ConfigError("policy.warm_start.auxiliary_fraction: must be in [0, 1]");
  }
  net.set_base_trainable(true);
  adapters::AdapterConfig none;
  none.kind = adapters::AdapterKind::kFull;
  Adam adam(adapters::lr_groups(net.parameters(), cfg.lr, none));
  double last = 0.0;
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    Rng r = rng.substream("warm_start", s);
    std::vector<tasks::Sequence> prompts, completions;
    std::size_t tokens = 0;
    const auto n_aux = static_cast<std::size_t>(cfg.auxiliary_fraction * static_cast<double>(cfg.batch));
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      if (b < n_aux) {
        const tasks::TaskInstance aux = tasks::gen_auxiliary(task, difficulty, r);
        prompts.push_back(aux.prompt);
        completions.push_back(tasks::format_completion(aux.ground_truth));
      } else {
        prompts.push_back(tasks::gen_instance(task, difficulty, r).prompt);
        completions.push_back(tasks::format_completion(tasks::random_answer(task, difficulty, r)));
      }
      tokens += completions.back().size();
    }
    adam.zero_grad();
    const Var lp = policy::completion_log_probs(net, prompts, completions, 1.0);
    const Var loss = weighted_sum(lp, Matrix(1, tokens, -1.0 / static_cast<double>(tokens)));
    last = loss.value()[0];
    backward(loss);
    adam.step();
  }
  adam.zero_grad();
  net.set_base_trainable(false);
  return last;
}

}  // namespace rlpeft::rlvr
