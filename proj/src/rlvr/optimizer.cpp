// SPDX-License-Identifier: Apache-2.0
#include "rlpeft/rlvr/optimizer.hpp"

#include <cmath>

#include "rlpeft/errors.hpp"

namespace rlpeft::rlvr {

Adam::Adam(std::vector<adapters::LrGroup> groups, AdamParams params)
    : groups_(std::move(groups)), params_(params) {
  for (const auto& g : groups_) {
    std::vector<Matrix> m, v;
    for (const auto& p : g.params) {
      m.emplace_back(p.var.rows(), p.var.cols());
      v.emplace_back(p.var.rows(), p.var.cols());
    }
    m_.push_back(std::move(m));
    v_.push_back(std::move(v));
  }
}

void Adam::step() {
  for (const auto& g : groups_) {
    for (const auto& p : g.params) {
      if (p.trainable() && !p.var.grad().all_finite()) {
        throw NumericError("non-finite gradient in parameter '" + p.name + "'");
      }
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(params_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(params_.beta2, static_cast<double>(t_));
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const double lr = groups_[gi].lr;
    for (std::size_t pi = 0; pi < groups_[gi].params.size(); ++pi) {
      adapters::NamedParam p = groups_[gi].params[pi];
      if (!p.trainable()) continue;
      const auto grad = p.var.grad().data();
      auto m = m_[gi][pi].data();
      auto v = v_[gi][pi].data();
      auto w = p.var.mutable_value().data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = params_.beta1 * m[i] + (1.0 - params_.beta1) * grad[i];
        v[i] = params_.beta2 * v[i] + (1.0 - params_.beta2) * grad[i] * grad[i];
        w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + params_.eps);
      }
    }
  }
}

void Adam::zero_grad() {
  for (auto& g : groups_)
    for (auto& p : g.params) p.var.zero_grad();
}

double Adam::grad_norm() const {
  double s = 0.0;
  for (const auto& g : groups_)
    for (const auto& p : g.params)
      if (p.trainable())
        for (double x : p.var.grad().data()) s += x * x;
  return std::sqrt(s);
}

}  // namespace rlpeft::rlvr
