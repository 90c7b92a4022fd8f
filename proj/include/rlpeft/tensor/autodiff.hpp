// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "rlpeft/tensor/matrix.hpp"

namespace rlpeft {

/// A value in the reverse-mode tape. Leaves persist across graphs and
/// accumulate gradients; interior nodes are released by backward().
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  /// Gradient buffer, zero-initialized on first access.
  Matrix& grad_buffer();
};

/// Shared handle to a tape node. Copies alias the same node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  /// Leaf that accumulates gradients when `requires_grad` is set.
  static Var leaf(Matrix value, bool requires_grad);
  static Var constant(Matrix value) { return leaf(std::move(value), false); }

  explicit operator bool() const noexcept { return static_cast<bool>(node_); }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  /// Accumulated gradient (zeros if nothing has flowed yet).
  const Matrix& grad() const { return node_->grad_buffer(); }
  Matrix& mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();

  bool requires_grad() const noexcept { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }

  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  Node* get() const noexcept { return node_.get(); }
  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

/// Propagates d(loss)/d(leaf) into every requires-grad leaf reachable from
/// `loss`, visiting each node once in reverse topological order, then frees
/// the interior of the graph. Throws ContractError unless loss is 1x1.
void backward(const Var& loss);

// Differentiable primitives.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var hadamard(const Var& a, const Var& b);
Var divide(const Var& a, const Var& b);
Var transpose(const Var& a);
/// out(i, j) = m(i, j) * v(i); v is rows x 1.
Var scale_rows(const Var& m, const Var& v);
/// Euclidean norm of each row, floored at `guard`; result is rows x 1.
Var row_norms(const Var& m, double guard);
/// Sums consecutive blocks of `group` rows: (b*group) x n -> group x n.
Var fold_rows(const Var& x, std::size_t group);
Var silu(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var clip(const Var& a, double lo, double hi);
Var minimum(const Var& a, const Var& b);
Var softmax_cols(const Var& a);
Var log_softmax_cols(const Var& a);
/// Column-wise layer norm: gain * (x - mean) / sqrt(var + eps) + bias.
Var layer_norm_cols(const Var& x, const Var& gain, const Var& bias, double eps);
/// Gathers columns of `table` (d x V) for each id: result d x ids.size().
Var embedding(const Var& table, std::span<const std::size_t> ids);
/// Multi-head causal self-attention over concatenated segments.
/// q, k, v are d x N with N == sum(segments); attention never crosses a segment.
Var causal_attention(const Var& q, const Var& k, const Var& v,
                     std::span<const std::size_t> segments, std::size_t heads);
/// out(0, m) = a(rows[m], cols[m]).
Var pick(const Var& a, std::span<const std::size_t> rows, std::span<const std::size_t> cols);
Var sum(const Var& a);
/// sum(a .* weights) as a 1x1 node.
Var weighted_sum(const Var& a, const Matrix& weights);

}  // namespace rlpeft
