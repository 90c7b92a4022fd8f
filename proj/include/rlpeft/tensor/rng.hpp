// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

#include "rlpeft/tensor/matrix.hpp"

namespace rlpeft {

/// Counter-based generator: draw n is a pure function of (key, n).
///
/// Substreams are keyed by name and index, so independent consumers
/// (rollouts per prompt, evaluation, dropout) never perturb each other.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "splitmix64-ctr";

  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t position() const noexcept { return counter_; }

  Rng substream(std::string_view name, std::uint64_t index = 0) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  bool bernoulli(double p);

  Matrix normal_matrix(std::size_t rows, std::size_t cols, double sigma);
  Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi);

 private:
  Rng(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace rlpeft
