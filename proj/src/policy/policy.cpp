// SPDX-License-Identifier: Apache-2.0
#include "rlpeft/policy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rlpeft/errors.hpp"

namespace rlpeft::policy {

using adapters::AdapterKind;
using adapters::LinearWithAdapter;
using adapters::ModuleRole;
using adapters::NamedParam;
using adapters::ParamRole;

namespace {

constexpr double kLnEps = 1e-5;

void require_positive(std::size_t v, const char* field) {
  if (v == 0) throw ConfigError(std::string("policy.") + field + ": must be positive");
}

LinearWithAdapter make_linear(const std::string& prefix, const char* module, ModuleRole role,
                              std::size_t d_out, std::size_t d_in, double gain, Rng& rng) {
  const double sigma = gain / std::sqrt(static_cast<double>(d_in));
  return LinearWithAdapter(prefix + module, role, rng.normal_matrix(d_out, d_in, sigma));
}

Var ones(std::size_t d) { return Var::leaf(Matrix(d, 1, 1.0), true); }
Var zeros(std::size_t d) { return Var::leaf(Matrix(d, 1, 0.0), true); }

}  // namespace

void PolicyConfig::validate() const {
  require_positive(vocab, "vocab");
  require_positive(d_model, "d_model");
  require_positive(n_layers, "n_layers");
  require_positive(n_heads, "n_heads");
  require_positive(d_ff, "d_ff");
  require_positive(max_seq, "max_seq");
  if (vocab < tasks::kReservedTokens) {
    throw ConfigError("policy.vocab: must be at least " + std::to_string(tasks::kReservedTokens));
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("policy.d_model: " + std::to_string(d_model) + " is not divisible by n_heads " +
                      std::to_string(n_heads));
  }
}

PolicyNet::PolicyNet(const PolicyConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t d = cfg.d_model;
  const double out_gain = 1.0 / std::sqrt(2.0 * static_cast<double>(cfg.n_layers));
  embed_ = Var::leaf(rng.normal_matrix(d, cfg.vocab, 0.3), false);
  pos_ = Var::leaf(rng.normal_matrix(d, cfg.max_seq, 0.3), false);
  blocks_.reserve(cfg.n_layers);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    blocks_.push_back(Block{
        ones(d), zeros(d),
        make_linear(p, "self_attn.q_proj", ModuleRole::kQ, d, d, 1.0, rng),
        make_linear(p, "self_attn.k_proj", ModuleRole::kK, d, d, 1.0, rng),
        make_linear(p, "self_attn.v_proj", ModuleRole::kV, d, d, 1.0, rng),
        make_linear(p, "self_attn.o_proj", ModuleRole::kO, d, d, out_gain, rng),
        ones(d), zeros(d),
        make_linear(p, "mlp.gate_proj", ModuleRole::kGate, cfg.d_ff, d, 1.0, rng),
        make_linear(p, "mlp.up_proj", ModuleRole::kUp, cfg.d_ff, d, 1.0, rng),
        make_linear(p, "mlp.down_proj", ModuleRole::kDown, d, cfg.d_ff, out_gain, rng),
    });
  }
  lnf_gain_ = ones(d);
  lnf_bias_ = zeros(d);
  head_ = Var::leaf(rng.normal_matrix(cfg.vocab, d, 1.0 / std::sqrt(static_cast<double>(d))), false);
  set_base_trainable(false);
}

void PolicyNet::set_base_trainable(bool flag) {
  if (attached_) throw ContractError("set_base_trainable: adapters already attached");
  for (const NamedParam& p : parameters()) {
    Var v = p.var;
    v.set_requires_grad(flag);
  }
}

void PolicyNet::attach(const adapters::AdapterConfig& cfg, Rng& rng) {
  if (attached_) throw ContractError("attach: adapters already attached");
  set_base_trainable(false);
  adapters::validate(cfg);
  adapter_cfg_ = cfg;
  adapters::AttachOptions opts;
  opts.vera_bank = vera_bank_.get();
  for (LinearWithAdapter* l : linears()) {
    Rng layer_rng = rng.substream(l->name());
    l->attach(cfg, layer_rng, opts);
  }
  const bool full = cfg.kind == AdapterKind::kFull;
  const bool ln = full || cfg.kind == AdapterKind::kLNTuning;
  embed_.set_requires_grad(full);
  pos_.set_requires_grad(full);
  head_.set_requires_grad(full);
  for (Block& b : blocks_) {
    for (Var* v : {&b.ln1_gain, &b.ln1_bias, &b.ln2_gain, &b.ln2_bias}) v->set_requires_grad(ln);
  }
  lnf_gain_.set_requires_grad(ln);
  lnf_bias_.set_requires_grad(ln);
  attached_ = true;
}

std::vector<LinearWithAdapter*> PolicyNet::linears() {
  std::vector<LinearWithAdapter*> out;
  for (Block& b : blocks_) {
    for (LinearWithAdapter* l : {&b.q, &b.k, &b.v, &b.o, &b.gate, &b.up, &b.down}) out.push_back(l);
  }
  return out;
}

std::vector<const LinearWithAdapter*> PolicyNet::linears() const {
  std::vector<const LinearWithAdapter*> out;
  for (const Block& b : blocks_) {
    for (const LinearWithAdapter* l : {&b.q, &b.k, &b.v, &b.o, &b.gate, &b.up, &b.down}) out.push_back(l);
  }
  return out;
}

std::vector<NamedParam> PolicyNet::parameters() const {
  std::vector<NamedParam> out;
  out.push_back({"embed", embed_, ParamRole::kEmbedding});
  out.push_back({"pos", pos_, ParamRole::kEmbedding});
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const Block& b = blocks_[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    out.push_back({p + "ln1.gain", b.ln1_gain, ParamRole::kLayerNorm});
    out.push_back({p + "ln1.bias", b.ln1_bias, ParamRole::kLayerNorm});
    for (const LinearWithAdapter* lin : {&b.q, &b.k, &b.v, &b.o}) {
      for (NamedParam& np : lin->parameters()) out.push_back(std::move(np));
    }
    out.push_back({p + "ln2.gain", b.ln2_gain, ParamRole::kLayerNorm});
    out.push_back({p + "ln2.bias", b.ln2_bias, ParamRole::kLayerNorm});
    for (const LinearWithAdapter* lin : {&b.gate, &b.up, &b.down}) {
      for (NamedParam& np : lin->parameters()) out.push_back(std::move(np));
    }
  }
  out.push_back({"ln_f.gain", lnf_gain_, ParamRole::kLayerNorm});
  out.push_back({"ln_f.bias", lnf_bias_, ParamRole::kLayerNorm});
  out.push_back({"head", head_, ParamRole::kOther});
  for (const auto& [shape, pair] : vera_bank_->pairs()) {
    out.push_back({adapters::VeraBank::tensor_name(shape.first, shape.second, 'A'), pair.A,
                   ParamRole::kSharedFrozen});
    out.push_back({adapters::VeraBank::tensor_name(shape.first, shape.second, 'B'), pair.B,
                   ParamRole::kSharedFrozen});
  }
  return out;
}

void PolicyNet::check_tokens(const Sequence& seq) const {
  if (seq.size() > cfg_.max_seq) {
    throw DimensionError("sequence length " + std::to_string(seq.size()) + " exceeds max_seq " +
                         std::to_string(cfg_.max_seq));
  }
  for (Token t : seq) {
    if (t >= cfg_.vocab) {
      throw ContractError("token id " + std::to_string(t) + " outside vocab " + std::to_string(cfg_.vocab));
    }
  }
}

Var PolicyNet::forward(std::span<const Sequence> seqs, bool training, Rng* rng) const {
  std::vector<std::size_t> ids, positions, segments;
  for (const Sequence& s : seqs) {
    check_tokens(s);
    if (s.empty()) throw ContractError("forward: empty sequence");
    segments.push_back(s.size());
    for (std::size_t t = 0; t < s.size(); ++t) {
      ids.push_back(s[t]);
      positions.push_back(t);
    }
  }
  auto lin = [&](const LinearWithAdapter& l, const Var& x) { return adapters::adapter_forward(l, x, training, rng); };
  Var x = add(embedding(embed_, ids), embedding(pos_, positions));
  for (const Block& b : blocks_) {
    const Var h = layer_norm_cols(x, b.ln1_gain, b.ln1_bias, kLnEps);
    const Var a = causal_attention(lin(b.q, h), lin(b.k, h), lin(b.v, h), segments, cfg_.n_heads);
    x = add(x, lin(b.o, a));
    const Var h2 = layer_norm_cols(x, b.ln2_gain, b.ln2_bias, kLnEps);
    x = add(x, lin(b.down, hadamard(silu(lin(b.gate, h2)), lin(b.up, h2))));
  }
  return matmul(head_, layer_norm_cols(x, lnf_gain_, lnf_bias_, kLnEps));
}

Matrix forward_logits(const PolicyNet& net, const Sequence& tokens) {
  NoGradGuard guard;
  const Sequence batch[] = {tokens};
  return net.forward(batch).value().transposed();
}

Var completion_log_probs(const PolicyNet& net, std::span<const Sequence> prompts,
                         std::span<const Sequence> completions, double temperature, bool training,
                         Rng* rng) {
  if (prompts.size() != completions.size()) {
    throw ContractError("completion_log_probs: " + std::to_string(prompts.size()) + " prompts vs " +
                        std::to_string(completions.size()) + " completions");
  }
  std::vector<Sequence> seqs;
  std::vector<std::size_t> rows, cols;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (prompts[i].empty()) throw ContractError("completion_log_probs: empty prompt");
    Sequence s = prompts[i];
    if (!completions[i].empty()) s.insert(s.end(), completions[i].begin(), completions[i].end() - 1);
    for (std::size_t t = 0; t < completions[i].size(); ++t) {
      if (completions[i][t] >= net.config().vocab) {
        throw ContractError("token id " + std::to_string(completions[i][t]) + " outside vocab " +
                            std::to_string(net.config().vocab));
      }
      rows.push_back(completions[i][t]);
      cols.push_back(offset + prompts[i].size() - 1 + t);
    }
    offset += s.size();
    seqs.push_back(std::move(s));
  }
  Var logits = net.forward(seqs, training, rng);
  if (temperature > 0.0 && temperature != 1.0) logits = scale(logits, 1.0 / temperature);
  return pick(log_softmax_cols(logits), rows, cols);
}

std::vector<double> sequence_log_prob(const PolicyNet& net, const Sequence& prompt,
                                      const Sequence& completion, double temperature) {
  if (prompt.empty()) throw ContractError("sequence_log_prob: empty prompt");
  if (completion.empty()) return {};
  NoGradGuard guard;
  const Sequence p[] = {prompt};
  const Sequence c[] = {completion};
  const Matrix lp = completion_log_probs(net, p, c, temperature).value();
  return {lp.data().begin(), lp.data().end()};
}

namespace {

void check_sampling(double temperature, double top_p) {
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw ContractError("temperature must be >= 0, got " + std::to_string(temperature));
  }
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ContractError("top_p must be in (0, 1], got " + std::to_string(top_p));
}

}  // namespace

std::vector<double> sampling_distribution(std::span<const double> logits, double temperature,
                                          double top_p) {
  check_sampling(temperature, top_p);
  if (logits.empty()) throw ContractError("sampling_distribution: empty logits");
  std::vector<double> p(logits.size(), 0.0);
  if (temperature == 0.0) {
    p[static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin())] = 1.0;
    return p;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp((logits[i] - mx) / temperature);
  for (double& v : p) v /= z;
  if (top_p < 1.0) {
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    double mass = 0.0;
    std::size_t keep = 0;
    while (keep < order.size() && mass < top_p) mass += p[order[keep++]];
    for (std::size_t i = keep; i < order.size(); ++i) p[order[i]] = 0.0;
    for (double& v : p) v /= mass;
  }
  return p;
}

Token sample_token(std::span<const double> logits, double temperature, double top_p, Rng& rng) {
  const std::vector<double> p = sampling_distribution(logits, temperature, top_p);
  if (temperature == 0.0) return static_cast<Token>(std::max_element(p.begin(), p.end()) - p.begin());
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last = i;
    acc += p[i];
    if (u < acc) return static_cast<Token>(i);
  }
  return static_cast<Token>(last);
}

namespace {

std::vector<Sample> decode(const PolicyNet& net, const Sequence& prompt, std::vector<Rng*> rngs,
                           const SamplingParams& params) {
  if (prompt.empty()) throw ContractError("sampling: empty prompt");
  check_sampling(params.temperature, params.top_p);
  const std::size_t room = net.config().max_seq >= prompt.size() ? net.config().max_seq - prompt.size() + 1 : 0;
  const std::size_t max_new = std::min(params.max_new, room);
  const std::size_t vocab = net.config().vocab;
  const double lp_temp = params.temperature > 0.0 ? params.temperature : 1.0;
  std::vector<Sample> out(rngs.size());
  std::vector<std::size_t> active(rngs.size());
  std::iota(active.begin(), active.end(), 0);
  if (max_new == 0) return out;
  NoGradGuard guard;
  std::vector<double> logits(vocab), scaled(vocab);
  while (!active.empty()) {
    std::vector<Sequence> seqs;
    seqs.reserve(active.size());
    for (std::size_t i : active) {
      Sequence s = prompt;
      s.insert(s.end(), out[i].completion.begin(), out[i].completion.end());
      seqs.push_back(std::move(s));
    }
    const Matrix all = net.forward(seqs).value();
    std::vector<std::size_t> still;
    std::size_t col = 0;
    for (std::size_t a = 0; a < active.size(); ++a) {
      col += seqs[a].size();
      const std::size_t i = active[a];
      for (std::size_t v = 0; v < vocab; ++v) logits[v] = all(v, col - 1);
      const Token t = sample_token(logits, params.temperature, params.top_p, *rngs[i]);
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (std::size_t v = 0; v < vocab; ++v) z += std::exp((logits[v] - mx) / lp_temp);
      out[i].log_probs.push_back((logits[t] - mx) / lp_temp - std::log(z));
      out[i].completion.push_back(t);
      if (t != tasks::tok::kEos && out[i].completion.size() < max_new) still.push_back(i);
    }
    active = std::move(still);
  }
  return out;
}

}  // namespace

std::vector<Sample> sample_group(const PolicyNet& net, const Sequence& prompt, std::size_t count,
                                 const SamplingParams& params, const Rng& rng) {
  std::vector<Rng> streams;
  streams.reserve(count);
  for (std::size_t i = 0; i < count; ++i) streams.push_back(rng.substream("sample", i));
  std::vector<Rng*> ptrs;
  for (Rng& r : streams) ptrs.push_back(&r);
  return decode(net, prompt, ptrs, params);
}

Sequence sample_completion(const PolicyNet& net, const Sequence& prompt, double temperature,
                           double top_p, std::size_t max_new, Rng& rng) {
  return decode(net, prompt, {&rng}, SamplingParams{temperature, top_p, max_new})[0].completion;
}

}  // namespace rlpeft::policy
