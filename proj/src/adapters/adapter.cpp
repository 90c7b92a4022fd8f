// SPDX-License-Identifier: Apache-2.0
#include "rlpeft/adapters/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "rlpeft/errors.hpp"
#include "rlpeft/tensor/svd.hpp"

namespace rlpeft::adapters {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr std::array<std::string_view, 13> kKindNames = {
    "Full",  "LoRA",   "DoRA",   "AdaLoRA", "MiSS", "PiSSA",   "MiLoRA",
    "LoRAPlus", "RsLoRA", "LoRAFA", "VeRA", "IA3", "LNTuning"};

constexpr std::array<std::string_view, 7> kRoleNames = {"q", "k", "v", "o", "gate", "up", "down"};

double lora_scale(const AdapterConfig& cfg) {
  const double r = static_cast<double>(cfg.rank);
  return cfg.kind == AdapterKind::kRsLoRA ? cfg.alpha / std::sqrt(r) : cfg.alpha / r;
}

Var branch_input(const Var& x, const AdapterConfig& cfg, bool training, Rng* rng) {
  if (!training || cfg.dropout <= 0.0) return x;
  if (rng == nullptr) throw ContractError("adapter dropout in training mode needs an rng");
  const double keep = 1.0 - cfg.dropout;
  Matrix mask(x.rows(), x.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
  return hadamard(x, Var::constant(std::move(mask)));
}

Matrix lambda_effective(const AdaLoraState& s) {
  Matrix lam = s.lambda.value();
  for (std::size_t i = 0; i < lam.size(); ++i)
    if (s.pruned[i]) lam[i] = 0.0;
  return lam;
}

Matrix scale_rows_value(Matrix m, const Matrix& v) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) *= v[i];
  return m;
}

Matrix dora_effective_weight(const Matrix& w0, const DoraState& s, double scale_factor) {
  Matrix w = w0 + scale_factor * matmul(s.B.value(), s.A.value());
  Matrix factor(w.rows(), 1);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double n = 0.0;
    for (std::size_t j = 0; j < w.cols(); ++j) n += w(i, j) * w(i, j);
    factor[i] = s.magnitude.value()[i] / std::max(std::sqrt(n), 1e-12);
  }
  return scale_rows_value(std::move(w), factor);
}

// Top-r (principal) or bottom-r (minor) truncated SVD split into B = U S^1/2, A = S^1/2 V^T.
ResidualLowRankState svd_split(const Matrix& w0, std::size_t rank, bool principal) {
  const SvdResult f = svd(w0);
  const std::size_t k = f.S.size();
  const std::size_t first = principal ? 0 : k - rank;
  Matrix B(w0.rows(), rank);
  Matrix A(rank, w0.cols());
  for (std::size_t c = 0; c < rank; ++c) {
    const double root = std::sqrt(f.S[first + c]);
    for (std::size_t i = 0; i < w0.rows(); ++i) B(i, c) = f.U(i, first + c) * root;
    for (std::size_t j = 0; j < w0.cols(); ++j) A(c, j) = f.V(j, first + c) * root;
  }
  Matrix residual = w0 - matmul(B, A);
  return ResidualLowRankState{Var::leaf(std::move(A), true), Var::leaf(std::move(B), true),
                              Var::leaf(std::move(residual), false)};
}

}  // namespace

std::string_view kind_name(AdapterKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

AdapterKind parse_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == name) return static_cast<AdapterKind>(i);
  throw ConfigError("adapter.kind: unknown adapter kind '" + std::string(name) + "'");
}

bool is_matrix_kind(AdapterKind kind) {
  return kind != AdapterKind::kIA3 && kind != AdapterKind::kLNTuning;
}

bool uses_rank(AdapterKind kind) {
  switch (kind) {
    case AdapterKind::kFull:
    case AdapterKind::kMiSS:
    case AdapterKind::kIA3:
    case AdapterKind::kLNTuning:
      return false;
    default:
      return true;
  }
}

std::string_view role_name(ModuleRole role) { return kRoleNames[static_cast<std::size_t>(role)]; }

ModuleRole parse_role(std::string_view name) {
  for (std::size_t i = 0; i < kRoleNames.size(); ++i)
    if (kRoleNames[i] == name) return static_cast<ModuleRole>(i);
  throw ConfigError("adapter.targets: unknown module '" + std::string(name) + "'");
}

std::size_t AdapterConfig::effective_adalora_target() const {
  return adalora_target_rank == 0 ? std::max<std::size_t>(1, rank / 2) : adalora_target_rank;
}

double AdapterConfig::sigma_for(std::size_t d_in) const {
  return init_sigma > 0.0 ? init_sigma : 1.0 / std::sqrt(static_cast<double>(d_in));
}

bool AdapterConfig::targets_role(ModuleRole role) const {
  return std::find(targets.begin(), targets.end(), role) != targets.end();
}

void validate(const AdapterConfig& cfg) {
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) {
    throw ConfigError("adapter.dropout: must lie in [0, 1), got " + std::to_string(cfg.dropout));
  }
  if (!(cfg.lora_plus_lambda >= 1.0)) {
    throw ConfigError("adapter.lora_plus_lambda: must be >= 1, got " +
                      std::to_string(cfg.lora_plus_lambda));
  }
  if (!std::isfinite(cfg.alpha)) throw ConfigError("adapter.alpha: must be finite");
  if (cfg.init_sigma < 0.0) throw ConfigError("adapter.init_sigma: must be >= 0");
  if ((uses_rank(cfg.kind) || cfg.kind == AdapterKind::kMiSS) && cfg.rank == 0) {
    throw ConfigError("adapter.rank: must be >= 1");
  }
  if (cfg.kind == AdapterKind::kAdaLoRA && cfg.effective_adalora_target() > cfg.rank) {
    throw ConfigError("adapter.adalora_target_rank: exceeds rank");
  }
}

void validate(const AdapterConfig& cfg, std::size_t d_out, std::size_t d_in) {
  validate(cfg);
  if (uses_rank(cfg.kind) && cfg.rank > std::min(d_in, d_out)) {
    throw ConfigError("adapter.rank: " + std::to_string(cfg.rank) + " exceeds min(d_out, d_in) = " +
                      std::to_string(std::min(d_in, d_out)) + " for " + std::string(kind_name(cfg.kind)));
  }
  if (cfg.kind == AdapterKind::kMiSS) {
    const std::size_t g = cfg.effective_miss_group();
    if (g == 0 || g > d_in || d_in % g != 0) {
      throw ConfigError("adapter.miss_group: " + std::to_string(g) + " does not divide d_in = " +
                        std::to_string(d_in));
    }
  }
}

const VeraBank::Pair& VeraBank::get(std::size_t d_out, std::size_t d_in, std::size_t rank,
                                    Rng& rng) {
  const auto key = std::make_pair(d_out, d_in);
  auto it = pairs_.find(key);
  if (it != pairs_.end()) {
    if (it->second.A.rows() != rank) throw ContractError("VeRA bank rank mismatch");
    return it->second;
  }
  const double ba = std::sqrt(6.0 / static_cast<double>(d_in));
  const double bb = std::sqrt(6.0 / static_cast<double>(rank));
  Pair p{Var::leaf(rng.uniform_matrix(rank, d_in, -ba, ba), false),
         Var::leaf(rng.uniform_matrix(d_out, rank, -bb, bb), false)};
  return pairs_.emplace(key, std::move(p)).first->second;
}

std::string VeraBank::tensor_name(std::size_t d_out, std::size_t d_in, char which) {
  return "vera." + std::to_string(d_out) + "x" + std::to_string(d_in) + "." + which;
}

AdapterState make_adapter(const Matrix& w0, const AdapterConfig& cfg, Rng& rng,
                          const AttachOptions& options) {
  const std::size_t d_out = w0.rows();
  const std::size_t d_in = w0.cols();
  validate(cfg, d_out, d_in);
  const std::size_t r = cfg.rank;
  const double sigma = cfg.sigma_for(d_in);

  switch (cfg.kind) {
    case AdapterKind::kFull:
      return FullState{Var::leaf(w0, true)};
    case AdapterKind::kLoRA:
    case AdapterKind::kRsLoRA:
    case AdapterKind::kLoRAPlus:
      return LowRankState{Var::leaf(rng.normal_matrix(r, d_in, sigma), true),
                          Var::leaf(Matrix(d_out, r), true)};
    case AdapterKind::kLoRAFA:
      return LowRankState{Var::leaf(rng.normal_matrix(r, d_in, sigma), false),
                          Var::leaf(Matrix(d_out, r), true)};
    case AdapterKind::kDoRA: {
      const double bound = std::sqrt(6.0 / static_cast<double>(d_in));
      std::vector<double> norms = column_norms(w0.transposed());
      return DoraState{Var::leaf(rng.uniform_matrix(r, d_in, -bound, bound), true),
                       Var::leaf(Matrix(d_out, r), true),
                       Var::leaf(Matrix::column(norms), true)};
    }
    case AdapterKind::kAdaLoRA: {
      Matrix P = rng.normal_matrix(d_out, r, sigma);
      Matrix Q = rng.normal_matrix(r, d_in, sigma);
      return AdaLoraState{Var::leaf(std::move(P), true), Var::leaf(Matrix(r, 1), true),
                          Var::leaf(std::move(Q), true), std::vector<bool>(r, false)};
    }
    case AdapterKind::kMiSS:
      return MissState{Var::leaf(Matrix(d_out, cfg.effective_miss_group()), true)};
    case AdapterKind::kPiSSA:
      return svd_split(w0, r, true);
    case AdapterKind::kMiLoRA:
      return svd_split(w0, r, false);
    case AdapterKind::kVeRA: {
      VeraBank local;
      VeraBank& bank = options.vera_bank ? *options.vera_bank : local;
      const VeraBank::Pair& pair = bank.get(d_out, d_in, r, rng);
      return VeraState{pair.A, pair.B, Var::leaf(Matrix(r, 1, 0.1), true),
                       Var::leaf(Matrix(d_out, 1), true)};
    }
    case AdapterKind::kIA3: {
      const std::size_t n = options.ia3_scales_input ? d_in : d_out;
      return Ia3State{Var::leaf(Matrix(n, 1, 1.0), true), options.ia3_scales_input};
    }
    case AdapterKind::kLNTuning:
      return FrozenState{};
  }
  throw UnsupportedKindError(std::string(kind_name(cfg.kind)));
}

LinearWithAdapter::LinearWithAdapter(std::string name, ModuleRole role, Matrix w0)
    : name_(std::move(name)), role_(role), w0_(Var::leaf(std::move(w0), false)) {}

void LinearWithAdapter::attach(const AdapterConfig& cfg, Rng& rng, const AttachOptions& options) {
  config_ = cfg;
  bool targeted = cfg.kind == AdapterKind::kFull || cfg.targets_role(role_);
  if (cfg.kind == AdapterKind::kIA3) {
    targeted = targeted && (role_ == ModuleRole::kK || role_ == ModuleRole::kV ||
                            role_ == ModuleRole::kDown);
  }
  if (cfg.kind == AdapterKind::kLNTuning) targeted = false;
  if (!targeted) {
    validate(cfg);
    state_ = FrozenState{};
    return;
  }
  AttachOptions opts = options;
  opts.ia3_scales_input = role_ == ModuleRole::kDown;
  state_ = make_adapter(w0_.value(), cfg, rng, opts);
}

std::vector<NamedParam> LinearWithAdapter::parameters() const {
  std::vector<NamedParam> out;
  auto add = [&](const char* suffix, const Var& v, ParamRole role) {
    out.push_back(NamedParam{name_ + "." + suffix, v, role});
  };
  const bool w0_is_reference = std::holds_alternative<FullState>(state_) ||
                               std::holds_alternative<ResidualLowRankState>(state_);
  add("W0", w0_, w0_is_reference ? ParamRole::kReference : ParamRole::kBase);
  std::visit(Overloaded{
                 [](const FrozenState&) {},
                 [&](const FullState& s) { add("weight", s.weight, ParamRole::kBase); },
                 [&](const LowRankState& s) {
                   add("lora_A", s.A, ParamRole::kLowRankA);
                   add("lora_B", s.B, ParamRole::kLowRankB);
                 },
                 [&](const ResidualLowRankState& s) {
                   add("residual", s.residual, ParamRole::kBase);
                   add("lora_A", s.A, ParamRole::kLowRankA);
                   add("lora_B", s.B, ParamRole::kLowRankB);
                 },
                 [&](const DoraState& s) {
                   add("lora_A", s.A, ParamRole::kLowRankA);
                   add("lora_B", s.B, ParamRole::kLowRankB);
                   add("magnitude", s.magnitude, ParamRole::kVector);
                 },
                 [&](const AdaLoraState& s) {
                   add("P", s.P, ParamRole::kOther);
                   add("lambda", s.lambda, ParamRole::kVector);
                   add("Q", s.Q, ParamRole::kOther);
                 },
                 [&](const MissState& s) { add("miss_D", s.D, ParamRole::kOther); },
                 [&](const VeraState& s) {
                   add("vera_d", s.d, ParamRole::kVector);
                   add("vera_b", s.b, ParamRole::kVector);
                 },
                 [&](const Ia3State& s) { add("ia3_l", s.scale, ParamRole::kVector); },
             },
             state_);
  return out;
}

Var adapter_forward(const LinearWithAdapter& layer, const Var& x, bool training, Rng* rng) {
  if (x.rows() != layer.d_in()) {
    throw DimensionError("adapter_forward on " + layer.name() + ": input " +
                         shape_string(x.value()) + " but d_in = " + std::to_string(layer.d_in()));
  }
  const AdapterConfig& cfg = layer.config();
  const Var& w0 = layer.base();
  return std::visit(
      Overloaded{
          [&](const FrozenState&) { return matmul(w0, x); },
          [&](const FullState& s) { return matmul(s.weight, x); },
          [&](const LowRankState& s) {
            const Var xb = branch_input(x, cfg, training, rng);
            return add(matmul(w0, x), scale(matmul(s.B, matmul(s.A, xb)), lora_scale(cfg)));
          },
          [&](const ResidualLowRankState& s) {
            const Var xb = branch_input(x, cfg, training, rng);
            return add(matmul(s.residual, x), matmul(s.B, matmul(s.A, xb)));
          },
          [&](const DoraState& s) {
            const double sc = lora_scale(cfg);
            const Var xb = branch_input(x, cfg, training, rng);
            const Var weight = add(w0, scale(matmul(s.B, s.A), sc));
            const Var factor = divide(s.magnitude, row_norms(weight, 1e-12));
            const Var pre = add(matmul(w0, x), scale(matmul(s.B, matmul(s.A, xb)), sc));
            return scale_rows(pre, factor);
          },
          [&](const AdaLoraState& s) {
            Matrix keep(s.pruned.size(), 1, 1.0);
            for (std::size_t i = 0; i < s.pruned.size(); ++i)
              if (s.pruned[i]) keep[i] = 0.0;
            const Var lam = hadamard(s.lambda, Var::constant(std::move(keep)));
            const Var xb = branch_input(x, cfg, training, rng);
            return add(matmul(w0, x), matmul(s.P, scale_rows(matmul(s.Q, xb), lam)));
          },
          [&](const MissState& s) {
            const Var xb = branch_input(x, cfg, training, rng);
            return add(matmul(w0, x), matmul(s.D, fold_rows(xb, s.D.cols())));
          },
          [&](const VeraState& s) {
            const Var xb = branch_input(x, cfg, training, rng);
            const Var inner = scale_rows(matmul(s.A_shared, xb), s.d);
            return add(matmul(w0, x), scale_rows(matmul(s.B_shared, inner), s.b));
          },
          [&](const Ia3State& s) {
            if (s.scales_input) return matmul(w0, scale_rows(x, s.scale));
            return scale_rows(matmul(w0, x), s.scale);
          },
      },
      layer.state());
}

Matrix merge_delta(const LinearWithAdapter& layer) {
  const Matrix& w0 = layer.base().value();
  const AdapterConfig& cfg = layer.config();
  return std::visit(
      Overloaded{
          [&](const FrozenState&) -> Matrix {
            throw UnsupportedKindError("merge_delta on untouched layer " + layer.name());
          },
          [&](const FullState& s) { return s.weight.value() - w0; },
          [&](const LowRankState& s) {
            return lora_scale(cfg) * matmul(s.B.value(), s.A.value());
          },
          [&](const ResidualLowRankState& s) {
            return s.residual.value() + matmul(s.B.value(), s.A.value()) - w0;
          },
          [&](const DoraState& s) { return dora_effective_weight(w0, s, lora_scale(cfg)) - w0; },
          [&](const AdaLoraState& s) {
            return matmul(s.P.value(), scale_rows_value(s.Q.value(), lambda_effective(s)));
          },
          [&](const MissState& s) {
            const std::size_t g = s.D.cols();
            Matrix delta(w0.rows(), w0.cols());
            for (std::size_t i = 0; i < delta.rows(); ++i)
              for (std::size_t j = 0; j < delta.cols(); ++j) delta(i, j) = s.D.value()(i, j % g);
            return delta;
          },
          [&](const VeraState& s) {
            const Matrix inner = scale_rows_value(s.A_shared.value(), s.d.value());
            return scale_rows_value(matmul(s.B_shared.value(), inner), s.b.value());
          },
          [&](const Ia3State&) -> Matrix {
            throw UnsupportedKindError("merge_delta is undefined for IA3 (" + layer.name() + ")");
          },
      },
      layer.state());
}

Matrix effective_delta(const LinearWithAdapter& layer) {
  const Matrix& w0 = layer.base().value();
  if (const auto* ia3 = std::get_if<Ia3State>(&layer.state())) {
    const Matrix& l = ia3->scale.value();
    Matrix d(w0.rows(), w0.cols());
    for (std::size_t i = 0; i < w0.rows(); ++i)
      for (std::size_t j = 0; j < w0.cols(); ++j) d(i, j) = ((ia3->scales_input ? l[j] : l[i]) - 1.0) * w0(i, j);
    return d;
  }
  if (std::holds_alternative<FrozenState>(layer.state())) return Matrix(w0.rows(), w0.cols());
  return merge_delta(layer);
}

ParamCount count_parameters(std::span<const NamedParam> params) {
  ParamCount c;
  std::unordered_set<const Node*> seen;
  for (const NamedParam& p : params) {
    if (!p.counted() || !seen.insert(p.var.get()).second) continue;
    c.total += p.var.value().size();
    if (p.trainable()) c.trainable += p.var.value().size();
  }
  return c;
}

double trainable_fraction(std::span<const NamedParam> params) {
  return count_parameters(params).fraction();
}

std::vector<LrGroup> lr_groups(std::span<const NamedParam> params, double base_lr,
                               const AdapterConfig& cfg) {
  if (!(base_lr > 0.0)) throw ContractError("lr_groups requires base_lr > 0");
  const bool split = cfg.kind == AdapterKind::kLoRAPlus && cfg.lora_plus_lambda != 1.0;
  LrGroup base{"default", base_lr, {}};
  LrGroup b_group{"lora_B", cfg.lora_plus_lambda * base_lr, {}};
  std::unordered_set<const Node*> seen;
  for (const NamedParam& p : params) {
    if (!p.trainable() || !seen.insert(p.var.get()).second) continue;
    if (split && p.role == ParamRole::kLowRankB) {
      b_group.params.push_back(p);
    } else {
      base.params.push_back(p);
    }
  }
  std::vector<LrGroup> out;
  if (!base.params.empty()) out.push_back(std::move(base));
  if (!b_group.params.empty()) out.push_back(std::move(b_group));
  return out;
}

std::size_t adalora_budget(std::size_t rank, std::size_t target, std::size_t step,
                           const PruneSchedule& schedule) {
  if (step <= schedule.t_init) return rank;
  if (step >= schedule.t_final || schedule.t_final <= schedule.t_init) return target;
  const double span = static_cast<double>(schedule.t_final - schedule.t_init);
  const double frac = 1.0 - static_cast<double>(step - schedule.t_init) / span;
  const double extra = static_cast<double>(rank - target) * frac * frac * frac;
  return target + static_cast<std::size_t>(extra);
}

void adalora_apply_budget(AdaLoraState& state, std::size_t budget) {
  const std::size_t r = state.pruned.size();
  const std::size_t drop = budget >= r ? 0 : r - budget;
  std::vector<std::size_t> order(r);
  std::iota(order.begin(), order.end(), 0);
  const Matrix& lam = state.lambda.value();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(lam[a]) < std::abs(lam[b]); });
  std::fill(state.pruned.begin(), state.pruned.end(), false);
  for (std::size_t i = 0; i < drop; ++i) state.pruned[order[i]] = true;
}

AdapterState adalora_prune(const AdapterState& state, std::size_t target_rank, std::size_t step,
                           const PruneSchedule& schedule) {
  const auto* s = std::get_if<AdaLoraState>(&state);
  if (s == nullptr) throw UnsupportedKindError("adalora_prune on a non-AdaLoRA adapter");
  if (target_rank > s->pruned.size()) throw ContractError("adalora target rank exceeds rank");
  AdaLoraState out = *s;
  adalora_apply_budget(out, adalora_budget(out.pruned.size(), target_rank, step, schedule));
  return out;
}

}  // namespace rlpeft::adapters
