// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "rlpeft/tensor/autodiff.hpp"
#include "rlpeft/tensor/matrix.hpp"

namespace rlpeft::testing {

inline double relative_error(const Matrix& got, const Matrix& want) {
  const double diff = frobenius_norm(got - want);
  const double scale = std::max({frobenius_norm(got), frobenius_norm(want), 1e-12});
  return diff / scale;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Worst relative error between autodiff and central differences over every
/// leaf in `leaves`. `loss` rebuilds the scalar graph from the current leaf values.
inline double gradcheck(std::vector<Var> leaves, const std::function<Var()>& loss,
                        double h = 1e-6) {
  for (Var& v : leaves) v.zero_grad();
  backward(loss());
  double worst = 0.0;
  for (Var& v : leaves) {
    const Matrix analytic = v.grad();
    const Matrix saved = v.value();
    auto f = [&](const Matrix& at) {
      v.mutable_value() = at;
      NoGradGuard guard;
      return loss().value()[0];
    };
    const Matrix numeric = finite_diff_grad(f, saved, h);
    v.mutable_value() = saved;
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  return worst;
}

}  // namespace rlpeft::testing
