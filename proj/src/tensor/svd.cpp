// SPDX-License-Identifier: Apache-2.0
#include "rlpeft/tensor/svd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rlpeft/errors.hpp"

namespace rlpeft {

namespace {

using Columns = std::vector<std::vector<double>>;

double dot(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

void rotate(std::vector<double>& x, std::vector<double>& y, double c, double s) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

// Replaces u[j] with a unit vector orthogonal to every column flagged valid.
void complete_column(Columns& u, std::vector<bool>& valid, std::size_t j) {
  const std::size_t m = u[j].size();
  std::vector<double> best;
  double best_norm = -1.0;
  for (std::size_t e = 0; e < m; ++e) {
    std::vector<double> cand(m, 0.0);
    cand[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < u.size(); ++k) {
        if (!valid[k]) continue;
        const double p = dot(cand, u[k]);
        for (std::size_t i = 0; i < m; ++i) cand[i] -= p * u[k][i];
      }
    }
    const double n = std::sqrt(dot(cand, cand));
    if (n > best_norm) {
      best_norm = n;
      best = std::move(cand);
    }
  }
  for (double& v : best) v /= best_norm;
  u[j] = std::move(best);
  valid[j] = true;
}

// Requires rows >= cols.
SvdResult jacobi_tall(const Matrix& a, const SvdOptions& opt) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Columns cols(n, std::vector<double>(m));
  Columns v(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) cols[j][i] = a(i, j);
    v[j][j] = 1.0;
  }

  int sweep = 0;
  bool converged = false;
  while (!converged) {
    if (sweep >= opt.max_sweeps) {
      throw NumericError("one-sided Jacobi SVD did not converge after " +
                         std::to_string(sweep) + " sweeps on " + shape_string(a));
    }
    ++sweep;
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(cols[p], cols[p]);
        const double beta = dot(cols[q], cols[q]);
        const double gamma = dot(cols[p], cols[q]);
        if (gamma == 0.0 || std::abs(gamma) <= opt.tolerance * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(cols[p], cols[q], c, s);
        rotate(v[p], v[q], c, s);
      }
    }
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(dot(cols[j], cols[j]));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  const double smax = n == 0 ? 0.0 : sigma[order[0]];
  const double cutoff =
      smax * std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(m, n));

  Columns u(n);
  std::vector<bool> valid(n, false);
  SvdResult out;
  out.S.resize(n);
  out.V = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.S[k] = sigma[j];
    u[k] = cols[j];
    if (sigma[j] > cutoff && sigma[j] > 0.0) {
      for (double& x : u[k]) x /= sigma[j];
      valid[k] = true;
    }
    for (std::size_t i = 0; i < n; ++i) out.V(i, k) = v[j][i];
  }
  for (std::size_t k = 0; k < n; ++k)
    if (!valid[k]) complete_column(u, valid, k);

  out.U = Matrix(m, n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < m; ++i) out.U(i, k) = u[k][i];
  out.sweeps = sweep;
  return out;
}

void fix_signs(SvdResult& r) {
  for (std::size_t k = 0; k < r.U.cols(); ++k) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < r.U.rows(); ++i) {
      if (std::abs(r.U(i, k)) > best) {
        best = std::abs(r.U(i, k));
        arg = i;
      }
    }
    if (r.U(arg, k) < 0.0) {
      for (std::size_t i = 0; i < r.U.rows(); ++i) r.U(i, k) = -r.U(i, k);
      for (std::size_t i = 0; i < r.V.rows(); ++i) r.V(i, k) = -r.V(i, k);
    }
  }
}

}  // namespace

Matrix SvdResult::reconstruct() const {
  Matrix us = U;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t k = 0; k < us.cols(); ++k) us(i, k) *= S[k];
  return matmul_nt(us, V);
}

SvdResult svd(const Matrix& a, const SvdOptions& options) {
  if (a.rows() == 0 || a.cols() == 0) throw DimensionError("svd of empty matrix " + shape_string(a));
  SvdResult r;
  if (a.rows() >= a.cols()) {
    r = jacobi_tall(a, options);
  } else {
    SvdResult t = jacobi_tall(a.transposed(), options);
    r.U = std::move(t.V);
    r.V = std::move(t.U);
    r.S = std::move(t.S);
    r.sweeps = t.sweeps;
  }
  fix_signs(r);
  return r;
}

}  // namespace rlpeft
