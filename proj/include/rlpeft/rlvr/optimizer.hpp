// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rlpeft/adapters/adapter.hpp"
#include "rlpeft/tensor/matrix.hpp"

namespace rlpeft::rlvr {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over learning-rate groups. Frozen tensors are
/// skipped even if they appear in a group or carry a gradient.
class Adam {
 public:
  explicit Adam(std::vector<adapters::LrGroup> groups, AdamParams params = {});

  /// Applies one update from the accumulated gradients. Throws NumericError
  /// naming the first parameter whose gradient is not finite; nothing is
  /// modified in that case.
  void step();
  void zero_grad();

  std::size_t step_count() const { return t_; }
  const std::vector<adapters::LrGroup>& groups() const { return groups_; }
  /// L2 norm over every gradient that step() would consume.
  double grad_norm() const;

 private:
  std::vector<adapters::LrGroup> groups_;
  AdamParams params_;
  std::vector<std::vector<Matrix>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace rlpeft::rlvr
