// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "rlpeft/tensor/autodiff.hpp"
#include "rlpeft/tensor/matrix.hpp"
#include "rlpeft/tensor/rng.hpp"

namespace rlpeft::adapters {

enum class AdapterKind {
  kFull,
  kLoRA,
  kDoRA,
  kAdaLoRA,
  kMiSS,
  kPiSSA,
  kMiLoRA,
  kLoRAPlus,
  kRsLoRA,
  kLoRAFA,
  kVeRA,
  kIA3,
  kLNTuning,
};

inline constexpr std::array<AdapterKind, 13> kAllKinds = {
    AdapterKind::kFull,    AdapterKind::kLoRA,   AdapterKind::kDoRA,     AdapterKind::kAdaLoRA,
    AdapterKind::kMiSS,    AdapterKind::kPiSSA,  AdapterKind::kMiLoRA,   AdapterKind::kLoRAPlus,
    AdapterKind::kRsLoRA,  AdapterKind::kLoRAFA, AdapterKind::kVeRA,     AdapterKind::kIA3,
    AdapterKind::kLNTuning,
};

std::string_view kind_name(AdapterKind kind);
/// Throws ConfigError on an unknown name.
AdapterKind parse_kind(std::string_view name);
/// True for kinds whose update is a dense d_out x d_in matrix (everything but IA3/LNTuning).
bool is_matrix_kind(AdapterKind kind);
/// True for kinds with the rank-r A/B factor pair.
bool uses_rank(AdapterKind kind);

/// The seven projection roles adapters may attach to.
enum class ModuleRole { kQ, kK, kV, kO, kGate, kUp, kDown };
inline constexpr std::array<ModuleRole, 7> kAllRoles = {ModuleRole::kQ,    ModuleRole::kK,
                                                        ModuleRole::kV,    ModuleRole::kO,
                                                        ModuleRole::kGate, ModuleRole::kUp,
                                                        ModuleRole::kDown};
std::string_view role_name(ModuleRole role);
ModuleRole parse_role(std::string_view name);

struct AdapterConfig {
  AdapterKind kind = AdapterKind::kLoRA;
  std::size_t rank = 4;
  double alpha = 8.0;
  double dropout = 0.05;
  double lora_plus_lambda = 16.0;
  /// MiSS shard width; 0 means "same as rank".
  std::size_t miss_group = 0;
  /// Std-dev of Gaussian inits; 0 means 1/sqrt(d_in).
  double init_sigma = 0.0;
  /// AdaLoRA final budget; 0 means max(1, rank / 2).
  std::size_t adalora_target_rank = 0;
  std::size_t adalora_t_init = 0;
  std::size_t adalora_t_final = 0;
  std::vector<ModuleRole> targets = {kAllRoles.begin(), kAllRoles.end()};

  std::size_t effective_miss_group() const { return miss_group == 0 ? rank : miss_group; }
  std::size_t effective_adalora_target() const;
  double sigma_for(std::size_t d_in) const;
  bool targets_role(ModuleRole role) const;
};

/// Throws ConfigError when `cfg` cannot attach to a d_out x d_in weight.
void validate(const AdapterConfig& cfg, std::size_t d_out, std::size_t d_in);
/// Shape-independent checks (probabilities, ratios, rank >= 1).
void validate(const AdapterConfig& cfg);

// ---- adapter states -------------------------------------------------------

/// Layer left untouched by the chosen kind (e.g. q_proj under IA3).
struct FrozenState {};
/// Full fine-tuning: a trainable copy of W0.
struct FullState {
  Var weight;
};
/// LoRA, rsLoRA, LoRA+ and LoRA-FA. A is r x d_in, B is d_out x r.
struct LowRankState {
  Var A;
  Var B;
};
/// PiSSA and MiLoRA: the frozen residual replaces W0 in the forward pass.
struct ResidualLowRankState {
  Var A;
  Var B;
  Var residual;
};
struct DoraState {
  Var A;
  Var B;
  Var magnitude;  // d_out x 1
};
struct AdaLoraState {
  Var P;       // d_out x r
  Var lambda;  // r x 1
  Var Q;       // r x d_in
  std::vector<bool> pruned;
};
struct MissState {
  Var D;  // d_out x g
};
struct VeraState {
  Var A_shared;  // r x d_in, frozen
  Var B_shared;  // d_out x r, frozen
  Var d;         // r x 1
  Var b;         // d_out x 1
};
struct Ia3State {
  Var scale;
  bool scales_input = false;
};

using AdapterState = std::variant<FrozenState, FullState, LowRankState, ResidualLowRankState,
                                  DoraState, AdaLoraState, MissState, VeraState, Ia3State>;

/// One frozen random (A, B) pair per distinct layer shape, shared by every VeRA layer.
class VeraBank {
 public:
  struct Pair {
    Var A;
    Var B;
  };
  /// Returns the pair for (d_out, d_in), drawing it from `rng` on first use.
  const Pair& get(std::size_t d_out, std::size_t d_in, std::size_t rank, Rng& rng);
  const std::map<std::pair<std::size_t, std::size_t>, Pair>& pairs() const { return pairs_; }
  static std::string tensor_name(std::size_t d_out, std::size_t d_in, char which);

 private:
  std::map<std::pair<std::size_t, std::size_t>, Pair> pairs_;
};

struct AttachOptions {
  VeraBank* vera_bank = nullptr;
  /// IA3 rescales the layer input (FFN down projection) instead of its output.
  bool ia3_scales_input = false;
};

/// Initializes the adapter for `cfg.kind` on frozen weight `w0` (d_out x d_in).
AdapterState make_adapter(const Matrix& w0, const AdapterConfig& cfg, Rng& rng,
                          const AttachOptions& options = {});

// ---- parameters -----------------------------------------------------------

enum class ParamRole {
  kBase,       // frozen or trainable base weight that the forward pass reads
  kReference,  // original W0 kept for delta extraction; not a model parameter
  kLowRankA,
  kLowRankB,
  kVector,
  kSharedFrozen,
  kLayerNorm,
  kEmbedding,
  kOther,
};

struct NamedParam {
  std::string name;
  Var var;
  ParamRole role;

  bool counted() const { return role != ParamRole::kReference; }
  bool trainable() const { return var.requires_grad(); }
};

class LinearWithAdapter {
 public:
  LinearWithAdapter(std::string name, ModuleRole role, Matrix w0);

  const std::string& name() const { return name_; }
  ModuleRole role() const { return role_; }
  std::size_t d_out() const { return w0_.rows(); }
  std::size_t d_in() const { return w0_.cols(); }
  /// The pretrained weight W0. Never modified by training.
  const Var& base() const { return w0_; }
  Var& base() { return w0_; }

  void attach(const AdapterConfig& cfg, Rng& rng, const AttachOptions& options = {});
  bool attached() const { return !std::holds_alternative<FrozenState>(state_); }
  AdapterKind kind() const { return config_.kind; }
  const AdapterConfig& config() const { return config_; }
  const AdapterState& state() const { return state_; }
  AdapterState& state() { return state_; }

  /// Parameters owned by this layer, named "<layer>.<tensor>". VeRA's shared
  /// matrices belong to the bank and are not listed.
  std::vector<NamedParam> parameters() const;

 private:
  std::string name_;
  ModuleRole role_;
  Var w0_;
  AdapterConfig config_;
  AdapterState state_ = FrozenState{};
};

/// y = adapted layer applied to x (d_in x n). Dropout hits only the adapter
/// branch input and only when `training` is set (rng must then be non-null).
Var adapter_forward(const LinearWithAdapter& layer, const Var& x, bool training = false,
                    Rng* rng = nullptr);

/// Delta such that the adapted forward equals (W0 + delta) x.
/// Throws UnsupportedKindError for IA3, LNTuning and untouched layers.
Matrix merge_delta(const LinearWithAdapter& layer);

/// Dense change of the effective weight for any layer: merge_delta for
/// matrix kinds, the equivalent rescaling delta for IA3, zeros otherwise.
Matrix effective_delta(const LinearWithAdapter& layer);

/// Exact count ratio of trainable to total parameters (references excluded,
/// shared tensors counted once by identity).
struct ParamCount {
  std::size_t trainable = 0;
  std::size_t total = 0;
  double fraction() const {
    return total == 0 ? 0.0 : static_cast<double>(trainable) / static_cast<double>(total);
  }
};
ParamCount count_parameters(std::span<const NamedParam> params);
double trainable_fraction(std::span<const NamedParam> params);

struct LrGroup {
  std::string label;
  double lr = 0.0;
  std::vector<NamedParam> params;
};
/// LoRA+ puts every B factor at lambda * base_lr; all other kinds get one group.
/// Only trainable parameters are included.
std::vector<LrGroup> lr_groups(std::span<const NamedParam> params, double base_lr,
                               const AdapterConfig& cfg);

// ---- AdaLoRA budget -------------------------------------------------------

struct PruneSchedule {
  std::size_t t_init = 0;
  std::size_t t_final = 0;
};

/// Cubic budget decay from `rank` at t_init to `target` at t_final.
std::size_t adalora_budget(std::size_t rank, std::size_t target, std::size_t step,
                           const PruneSchedule& schedule);
/// Prunes the (r - budget) smallest-|lambda| entries; the rest are unpruned.
void adalora_apply_budget(AdaLoraState& state, std::size_t budget);
/// Returns `state` with its mask set for `step`. Parameter tensors are shared
/// with the input. Throws UnsupportedKindError for non-AdaLoRA states.
AdapterState adalora_prune(const AdapterState& state, std::size_t target_rank, std::size_t step,
                           const PruneSchedule& schedule);

}  // namespace rlpeft::adapters
