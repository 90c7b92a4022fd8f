// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "rlpeft/tensor/matrix.hpp"

namespace rlpeft {

struct SvdOptions {
  int max_sweeps = 100;
  /// A column pair counts as orthogonal once |<a_p, a_q>| <= tolerance * |a_p| |a_q|.
  double tolerance = 1e-12;
};

/// Thin SVD a = U diag(S) V^T with k = min(rows, cols).
///
/// U is rows x k and V is cols x k, both column-orthonormal. S is sorted
/// descending. Each column of U has its largest-magnitude entry positive,
/// with the paired V column flipped to compensate.
struct SvdResult {
  Matrix U;
  std::vector<double> S;
  Matrix V;
  int sweeps = 0;

  Matrix reconstruct() const;
};

/// One-sided (Hestenes) Jacobi SVD. Throws NumericError if the sweep cap
/// is reached before every column pair is orthogonal.
SvdResult svd(const Matrix& a, const SvdOptions& options = {});

}  // namespace rlpeft
