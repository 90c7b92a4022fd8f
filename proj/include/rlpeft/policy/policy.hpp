// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rlpeft/adapters/adapter.hpp"
#include "rlpeft/tasks/tasks.hpp"
#include "rlpeft/tensor/autodiff.hpp"
#include "rlpeft/tensor/rng.hpp"

namespace rlpeft::policy {

using tasks::Sequence;
using tasks::Token;

struct PolicyConfig {
  std::size_t vocab = 64;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 128;
  std::size_t max_seq = 64;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct Block {
  Var ln1_gain, ln1_bias;
  adapters::LinearWithAdapter q, k, v, o;
  Var ln2_gain, ln2_bias;
  adapters::LinearWithAdapter gate, up, down;
};

/// Pre-LayerNorm decoder-only transformer with learned absolute positions.
/// Activations are laid out features x tokens.
class PolicyNet {
 public:
  /// Random base weights drawn from `rng`; no adapters attached.
  PolicyNet(const PolicyConfig& cfg, Rng& rng);
  PolicyNet(const PolicyNet&) = delete;
  PolicyNet& operator=(const PolicyNet&) = delete;

  const PolicyConfig& config() const { return cfg_; }

  /// Attaches `cfg` to every projection and sets which non-adapter tensors
  /// train: embeddings and head only under Full, LayerNorms under Full and
  /// LNTuning.
  void attach(const adapters::AdapterConfig& cfg, Rng& rng);
  bool attached() const { return attached_; }
  const adapters::AdapterConfig& adapter_config() const { return adapter_cfg_; }

  /// Marks every base tensor (embeddings, W0, LayerNorms, head) trainable or
  /// frozen. Only valid before attach().
  void set_base_trainable(bool flag);

  /// Every tensor, including the frozen base and VeRA's shared pair.
  std::vector<adapters::NamedParam> parameters() const;
  std::vector<adapters::LinearWithAdapter*> linears();
  std::vector<const adapters::LinearWithAdapter*> linears() const;

  /// Logits (vocab x N) for the concatenation of `seqs`; attention stays
  /// within each sequence.
  Var forward(std::span<const Sequence> seqs, bool training = false, Rng* rng = nullptr) const;

  std::vector<Block>& blocks() { return blocks_; }
  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  void check_tokens(const Sequence& seq) const;

  PolicyConfig cfg_;
  Var embed_;  // d x vocab
  Var pos_;    // d x max_seq
  std::vector<Block> blocks_;
  Var lnf_gain_, lnf_bias_;
  Var head_;  // vocab x d
  adapters::AdapterConfig adapter_cfg_;
  std::unique_ptr<adapters::VeraBank> vera_bank_ = std::make_unique<adapters::VeraBank>();
  bool attached_ = false;
};

/// seq x vocab logits for one sequence.
Matrix forward_logits(const PolicyNet& net, const Sequence& tokens);

/// Per-token log-probs of `completion` given `prompt`, from logits / temperature.
std::vector<double> sequence_log_prob(const PolicyNet& net, const Sequence& prompt,
                                      const Sequence& completion, double temperature = 1.0);

/// Differentiable per-token log-probs for a batch of (prompt, completion)
/// pairs, concatenated in order into a 1 x sum(|completion|) node.
Var completion_log_probs(const PolicyNet& net, std::span<const Sequence> prompts,
                         std::span<const Sequence> completions, double temperature,
                         bool training = false, Rng* rng = nullptr);

struct Sample {
  Sequence completion;
  /// log softmax(logits / temperature) of each emitted token, before top-p
  /// truncation; with temperature 0 these are the untempered log-probs.
  std::vector<double> log_probs;
};

struct SamplingParams {
  double temperature = 1.0;
  double top_p = 1.0;
  std::size_t max_new = 8;
};

/// Draws `count` completions of `prompt` in one batched decode. Sample i uses
/// rng.substream("sample", i), so results do not depend on `count`.
std::vector<Sample> sample_group(const PolicyNet& net, const Sequence& prompt, std::size_t count,
                                 const SamplingParams& params, const Rng& rng);

Sequence sample_completion(const PolicyNet& net, const Sequence& prompt, double temperature,
                           double top_p, std::size_t max_new, Rng& rng);

/// Chooses a token from `logits` (vocab values). temperature 0 is argmax;
/// top-p keeps the most likely tokens up to and including the one whose
/// cumulative mass first reaches top_p. Throws ContractError on bad params.
Token sample_token(std::span<const double> logits, double temperature, double top_p, Rng& rng);

/// The distribution sample_token draws from.
std::vector<double> sampling_distribution(std::span<const double> logits, double temperature,
                                          double top_p);

}  // namespace rlpeft::policy
