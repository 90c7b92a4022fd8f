// SPDX-License-Identifier: Apache-2.0
#include "rlpeft/tensor/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "rlpeft/errors.hpp"

namespace rlpeft {

namespace {

thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<Node>;

Var make_node(Matrix value, std::initializer_list<Var> parents,
              std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const Var& p : parents) any = any || p.requires_grad();
    if (any) {
      node->requires_grad = true;
      for (const Var& p : parents) node->parents.push_back(p.node());
      node->backward = std::move(fn);
    }
  }
  return Var(std::move(node));
}

void accumulate(const NodePtr& p, const Matrix& g) {
  if (!p->requires_grad) return;
  if (p->grad.empty()) {
    p->grad = g;
  } else {
    p->grad += g;
  }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw DimensionError(std::string(op) + ": " + shape_string(a.value()) + " vs " +
                         shape_string(b.value()));
  }
}

}  // namespace

Matrix& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Matrix(value.rows(), value.cols());
  return grad;
}

Var Var::leaf(Matrix value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

void Var::zero_grad() {
  if (!node_->grad.empty()) node_->grad.fill(0.0);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() noexcept { return g_grad_enabled; }

void backward(const Var& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ContractError("backward on non-scalar node of shape " + shape_string(loss.value()));
  }
  if (!loss.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.get()->grad = Matrix(1, 1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
  for (Node* n : order) {
    if (n->backward) {
      n->backward = nullptr;
      n->parents.clear();
      n->grad = Matrix();
    }
  }
}

Var matmul(const Var& a, const Var& b) {
  return make_node(rlpeft::matmul(a.value(), b.value()), {a, b}, [](Node& self) {
    const NodePtr& pa = self.parents[0];
    const NodePtr& pb = self.parents[1];
    if (pa->requires_grad) accumulate(pa, matmul_nt(self.grad, pb->value));
    if (pb->requires_grad) accumulate(pb, matmul_tn(pa->value, self.grad));
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make_node(a.value() + b.value(), {a, b}, [](Node& self) {
    accumulate(self.parents[0], self.grad);
    accumulate(self.parents[1], self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make_node(a.value() - b.value(), {a, b}, [](Node& self) {
    accumulate(self.parents[0], self.grad);
    if (self.parents[1]->requires_grad) accumulate(self.parents[1], -1.0 * self.grad);
  });
}

Var scale(const Var& a, double s) {
  return make_node(s * a.value(), {a}, [s](Node& self) { accumulate(self.parents[0], s * self.grad); });
}

Var hadamard(const Var& a, const Var& b) {
  require_same_shape(a, b, "hadamard");
  return make_node(rlpeft::hadamard(a.value(), b.value()), {a, b}, [](Node& self) {
    const NodePtr& pa = self.parents[0];
    const NodePtr& pb = self.parents[1];
    if (pa->requires_grad) accumulate(pa, rlpeft::hadamard(self.grad, pb->value));
    if (pb->requires_grad) accumulate(pb, rlpeft::hadamard(self.grad, pa->value));
  });
}

Var divide(const Var& a, const Var& b) {
  require_same_shape(a, b, "divide");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] / b.value()[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    const NodePtr& pa = self.parents[0];
    const NodePtr& pb = self.parents[1];
    const std::size_t n = self.value.size();
    if (pa->requires_grad) {
      Matrix g(self.value.rows(), self.value.cols());
      for (std::size_t i = 0; i < n; ++i) g[i] = self.grad[i] / pb->value[i];
      accumulate(pa, g);
    }
    if (pb->requires_grad) {
      Matrix g(self.value.rows(), self.value.cols());
      for (std::size_t i = 0; i < n; ++i) g[i] = -self.grad[i] * self.value[i] / pb->value[i];
      accumulate(pb, g);
    }
  });
}

Var transpose(const Var& a) {
  return make_node(a.value().transposed(), {a},
                   [](Node& self) { accumulate(self.parents[0], self.grad.transposed()); });
}

Var scale_rows(const Var& m, const Var& v) {
  if (v.cols() != 1 || v.rows() != m.rows()) {
    throw DimensionError("scale_rows " + shape_string(m.value()) + " by " + shape_string(v.value()));
  }
  Matrix out = m.value();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* row = out.row_ptr(i);
    const double s = v.value()[i];
    for (std::size_t j = 0; j < out.cols(); ++j) row[j] *= s;
  }
  return make_node(std::move(out), {m, v}, [](Node& self) {
    const NodePtr& pm = self.parents[0];
    const NodePtr& pv = self.parents[1];
    const std::size_t rows = self.value.rows();
    const std::size_t cols = self.value.cols();
    if (pm->requires_grad) {
      Matrix g = self.grad;
      for (std::size_t i = 0; i < rows; ++i) {
        double* row = g.row_ptr(i);
        for (std::size_t j = 0; j < cols; ++j) row[j] *= pv->value[i];
      }
      accumulate(pm, g);
    }
    if (pv->requires_grad) {
      Matrix g(rows, 1);
      for (std::size_t i = 0; i < rows; ++i) {
        const double* gr = self.grad.row_ptr(i);
        const double* mr = pm->value.row_ptr(i);
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += gr[j] * mr[j];
        g[i] = s;
      }
      accumulate(pv, g);
    }
  });
}

Var row_norms(const Var& m, double guard) {
  Matrix out(m.rows(), 1);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* r = m.value().row_ptr(i);
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += r[j] * r[j];
    out[i] = std::max(std::sqrt(s), guard);
  }
  return make_node(std::move(out), {m}, [guard](Node& self) {
    const NodePtr& pm = self.parents[0];
    Matrix g(pm->value.rows(), pm->value.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const double norm = self.value[i];
      if (norm <= guard) continue;
      const double f = self.grad[i] / norm;
      const double* r = pm->value.row_ptr(i);
      double* gr = g.row_ptr(i);
      for (std::size_t j = 0; j < g.cols(); ++j) gr[j] = f * r[j];
    }
    accumulate(pm, g);
  });
}

Var fold_rows(const Var& x, std::size_t group) {
  if (group == 0 || x.rows() % group != 0) {
    throw DimensionError("fold_rows: group " + std::to_string(group) + " does not divide " +
                         std::to_string(x.rows()));
  }
  const std::size_t cols = x.cols();
  Matrix out(group, cols);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* src = x.value().row_ptr(r);
    double* dst = out.row_ptr(r % group);
    for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
  }
  return make_node(std::move(out), {x}, [group](Node& self) {
    const NodePtr& px = self.parents[0];
    Matrix g(px->value.rows(), px->value.cols());
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const double* src = self.grad.row_ptr(r % group);
      std::copy(src, src + g.cols(), g.row_ptr(r));
    }
    accumulate(px, g);
  });
}

Var silu(const Var& a) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a.value()[i];
    out[i] = x / (1.0 + std::exp(-x));
  }
  return make_node(std::move(out), {a}, [](Node& self) {
    const NodePtr& pa = self.parents[0];
    Matrix g(self.value.rows(), self.value.cols());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = pa->value[i];
      const double s = 1.0 / (1.0 + std::exp(-x));
      g[i] = self.grad[i] * s * (1.0 + x * (1.0 - s));
    }
    accumulate(pa, g);
  });
}

Var exp(const Var& a) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.value()[i]);
  return make_node(std::move(out), {a}, [](Node& self) {
    accumulate(self.parents[0], rlpeft::hadamard(self.grad, self.value));
  });
}

Var log(const Var& a) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(a.value()[i]);
  return make_node(std::move(out), {a}, [](Node& self) {
    const NodePtr& pa = self.parents[0];
    Matrix g(self.value.rows(), self.value.cols());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] / pa->value[i];
    accumulate(pa, g);
  });
}

Var clip(const Var& a, double lo, double hi) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(a.value()[i], lo, hi);
  return make_node(std::move(out), {a}, [lo, hi](Node& self) {
    const NodePtr& pa = self.parents[0];
    Matrix g(self.value.rows(), self.value.cols());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = pa->value[i];
      g[i] = (x >= lo && x <= hi) ? self.grad[i] : 0.0;
    }
    accumulate(pa, g);
  });
}

Var minimum(const Var& a, const Var& b) {
  require_same_shape(a, b, "minimum");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(a.value()[i], b.value()[i]);
  return make_node(std::move(out), {a, b}, [](Node& self) {
    const NodePtr& pa = self.parents[0];
    const NodePtr& pb = self.parents[1];
    Matrix ga(self.value.rows(), self.value.cols());
    Matrix gb(self.value.rows(), self.value.cols());
    for (std::size_t i = 0; i < ga.size(); ++i) {
      if (pa->value[i] <= pb->value[i]) {
        ga[i] = self.grad[i];
      } else {
        gb[i] = self.grad[i];
      }
    }
    accumulate(pa, ga);
    accumulate(pb, gb);
  });
}

Var softmax_cols(const Var& a) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  Matrix out(rows, cols);
  for (std::size_t j = 0; j < cols; ++j) {
    double mx = -INFINITY;
    for (std::size_t i = 0; i < rows; ++i) mx = std::max(mx, a.value()(i, j));
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      out(i, j) = std::exp(a.value()(i, j) - mx);
      s += out(i, j);
    }
    for (std::size_t i = 0; i < rows; ++i) out(i, j) /= s;
  }
  return make_node(std::move(out), {a}, [](Node& self) {
    const std::size_t rows = self.value.rows();
    const std::size_t cols = self.value.cols();
    Matrix g(rows, cols);
    for (std::size_t j = 0; j < cols; ++j) {
      double dot = 0.0;
      for (std::size_t i = 0; i < rows; ++i) dot += self.grad(i, j) * self.value(i, j);
      for (std::size_t i = 0; i < rows; ++i) g(i, j) = self.value(i, j) * (self.grad(i, j) - dot);
    }
    accumulate(self.parents[0], g);
  });
}

Var log_softmax_cols(const Var& a) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  Matrix out(rows, cols);
  for (std::size_t j = 0; j < cols; ++j) {
    double mx = -INFINITY;
    for (std::size_t i = 0; i < rows; ++i) mx = std::max(mx, a.value()(i, j));
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) s += std::exp(a.value()(i, j) - mx);
    const double lse = mx + std::log(s);
    for (std::size_t i = 0; i < rows; ++i) out(i, j) = a.value()(i, j) - lse;
  }
  return make_node(std::move(out), {a}, [](Node& self) {
    const std::size_t rows = self.value.rows();
    const std::size_t cols = self.value.cols();
    Matrix g(rows, cols);
    for (std::size_t j = 0; j < cols; ++j) {
      double gs = 0.0;
      for (std::size_t i = 0; i < rows; ++i) gs += self.grad(i, j);
      for (std::size_t i = 0; i < rows; ++i)
        g(i, j) = self.grad(i, j) - std::exp(self.value(i, j)) * gs;
    }
    accumulate(self.parents[0], g);
  });
}

Var layer_norm_cols(const Var& x, const Var& gain, const Var& bias, double eps) {
  const std::size_t d = x.rows();
  const std::size_t n = x.cols();
  if (gain.rows() != d || gain.cols() != 1 || bias.rows() != d || bias.cols() != 1) {
    throw DimensionError("layer_norm " + shape_string(x.value()) + " with gain " +
                         shape_string(gain.value()) + " and bias " + shape_string(bias.value()));
  }
  auto normalized = std::make_shared<Matrix>(d, n);
  auto inv_std = std::make_shared<std::vector<double>>(n);
  Matrix out(d, n);
  for (std::size_t j = 0; j < n; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += x.value()(i, j);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double c = x.value()(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[j] = is;
    for (std::size_t i = 0; i < d; ++i) {
      const double xh = (x.value()(i, j) - mean) * is;
      (*normalized)(i, j) = xh;
      out(i, j) = gain.value()[i] * xh + bias.value()[i];
    }
  }
  return make_node(std::move(out), {x, gain, bias}, [normalized, inv_std](Node& self) {
    const NodePtr& px = self.parents[0];
    const NodePtr& pg = self.parents[1];
    const NodePtr& pb = self.parents[2];
    const Matrix& xh = *normalized;
    const std::size_t d = xh.rows();
    const std::size_t n = xh.cols();
    if (pg->requires_grad || pb->requires_grad) {
      Matrix gg(d, 1);
      Matrix gb(d, 1);
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          gg[i] += self.grad(i, j) * xh(i, j);
          gb[i] += self.grad(i, j);
        }
      }
      accumulate(pg, gg);
      accumulate(pb, gb);
    }
    if (px->requires_grad) {
      Matrix gx(d, n);
      const double inv_d = 1.0 / static_cast<double>(d);
      for (std::size_t j = 0; j < n; ++j) {
        double mean_g = 0.0;
        double mean_gx = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const double gh = self.grad(i, j) * pg->value[i];
          mean_g += gh;
          mean_gx += gh * xh(i, j);
        }
        mean_g *= inv_d;
        mean_gx *= inv_d;
        for (std::size_t i = 0; i < d; ++i) {
          const double gh = self.grad(i, j) * pg->value[i];
          gx(i, j) = (*inv_std)[j] * (gh - mean_g - xh(i, j) * mean_gx);
        }
      }
      accumulate(px, gx);
    }
  });
}

Var embedding(const Var& table, std::span<const std::size_t> ids) {
  const std::size_t d = table.rows();
  Matrix out(d, ids.size());
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (ids[j] >= table.cols()) {
      throw DimensionError("embedding id " + std::to_string(ids[j]) + " outside table of " +
                           std::to_string(table.cols()) + " columns");
    }
    for (std::size_t i = 0; i < d; ++i) out(i, j) = table.value()(i, ids[j]);
  }
  std::vector<std::size_t> saved(ids.begin(), ids.end());
  return make_node(std::move(out), {table}, [saved = std::move(saved)](Node& self) {
    const NodePtr& pt = self.parents[0];
    Matrix g(pt->value.rows(), pt->value.cols());
    for (std::size_t j = 0; j < saved.size(); ++j)
      for (std::size_t i = 0; i < g.rows(); ++i) g(i, saved[j]) += self.grad(i, j);
    accumulate(pt, g);
  });
}

Var causal_attention(const Var& q, const Var& k, const Var& v,
                     std::span<const std::size_t> segments, std::size_t heads) {
  const std::size_t d = q.rows();
  const std::size_t n = q.cols();
  if (!q.value().same_shape(k.value()) || !q.value().same_shape(v.value())) {
    throw DimensionError("attention q/k/v shapes " + shape_string(q.value()) + ", " +
                         shape_string(k.value()) + ", " + shape_string(v.value()));
  }
  if (heads == 0 || d % heads != 0) throw DimensionError("attention heads must divide width");
  std::size_t total = 0;
  for (std::size_t s : segments) total += s;
  if (total != n) throw DimensionError("attention segments do not cover all tokens");

  const std::size_t dh = d / heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(dh));
  // Token-major copies keep per-head slices contiguous.
  const Matrix qt = q.value().transposed();
  const Matrix kt = k.value().transposed();
  const Matrix vt = v.value().transposed();
  Matrix ot(n, d);
  // probs holds, per segment and head, a lower-triangular T x T block.
  auto probs = std::make_shared<std::vector<double>>();
  std::vector<std::size_t> segs(segments.begin(), segments.end());

  std::size_t offset = 0;
  std::vector<double> row;
  for (std::size_t len : segs) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t c0 = h * dh;
      for (std::size_t t = 0; t < len; ++t) {
        const double* qrow = qt.row_ptr(offset + t) + c0;
        row.assign(t + 1, 0.0);
        double mx = -INFINITY;
        for (std::size_t s = 0; s <= t; ++s) {
          const double* krow = kt.row_ptr(offset + s) + c0;
          double acc = 0.0;
          for (std::size_t c = 0; c < dh; ++c) acc += qrow[c] * krow[c];
          row[s] = acc * scale_factor;
          mx = std::max(mx, row[s]);
        }
        double z = 0.0;
        for (std::size_t s = 0; s <= t; ++s) {
          row[s] = std::exp(row[s] - mx);
          z += row[s];
        }
        double* orow = ot.row_ptr(offset + t) + c0;
        for (std::size_t s = 0; s <= t; ++s) {
          row[s] /= z;
          const double* vrow = vt.row_ptr(offset + s) + c0;
          for (std::size_t c = 0; c < dh; ++c) orow[c] += row[s] * vrow[c];
        }
        probs->insert(probs->end(), row.begin(), row.end());
      }
    }
    offset += len;
  }

  return make_node(
      ot.transposed(), {q, k, v},
      [probs, segs = std::move(segs), heads, dh, scale_factor](Node& self) {
        const NodePtr& pq = self.parents[0];
        const NodePtr& pk = self.parents[1];
        const NodePtr& pv = self.parents[2];
        const Matrix qt = pq->value.transposed();
        const Matrix kt = pk->value.transposed();
        const Matrix vt = pv->value.transposed();
        const Matrix gt = self.grad.transposed();
        const std::size_t n = qt.rows();
        const std::size_t d = qt.cols();
        Matrix dq(n, d);
        Matrix dk(n, d);
        Matrix dv(n, d);
        std::size_t offset = 0;
        std::size_t cursor = 0;
        std::vector<double> dp;
        for (std::size_t len : segs) {
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t c0 = h * dh;
            for (std::size_t t = 0; t < len; ++t) {
              const double* p = probs->data() + cursor;
              cursor += t + 1;
              const double* grow = gt.row_ptr(offset + t) + c0;
              dp.assign(t + 1, 0.0);
              double pdp = 0.0;
              for (std::size_t s = 0; s <= t; ++s) {
                const double* vrow = vt.row_ptr(offset + s) + c0;
                double* dvrow = dv.row_ptr(offset + s) + c0;
                double acc = 0.0;
                for (std::size_t c = 0; c < dh; ++c) {
                  acc += vrow[c] * grow[c];
                  dvrow[c] += p[s] * grow[c];
                }
                dp[s] = acc;
                pdp += p[s] * acc;
              }
              const double* qrow = qt.row_ptr(offset + t) + c0;
              double* dqrow = dq.row_ptr(offset + t) + c0;
              for (std::size_t s = 0; s <= t; ++s) {
                const double ds = p[s] * (dp[s] - pdp) * scale_factor;
                if (ds == 0.0) continue;
                const double* krow = kt.row_ptr(offset + s) + c0;
                double* dkrow = dk.row_ptr(offset + s) + c0;
                for (std::size_t c = 0; c < dh; ++c) {
                  dqrow[c] += ds * krow[c];
                  dkrow[c] += ds * qrow[c];
                }
              }
            }
          }
          offset += len;
        }
        if (pq->requires_grad) accumulate(pq, dq.transposed());
        if (pk->requires_grad) accumulate(pk, dk.transposed());
        if (pv->requires_grad) accumulate(pv, dv.transposed());
      });
}

Var pick(const Var& a, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
  if (rows.size() != cols.size()) throw DimensionError("pick: index lists differ in length");
  Matrix out(1, rows.size());
  for (std::size_t m = 0; m < rows.size(); ++m) {
    if (rows[m] >= a.rows() || cols[m] >= a.cols()) throw DimensionError("pick index out of range");
    out[m] = a.value()(rows[m], cols[m]);
  }
  std::vector<std::size_t> r(rows.begin(), rows.end());
  std::vector<std::size_t> c(cols.begin(), cols.end());
  return make_node(std::move(out), {a}, [r = std::move(r), c = std::move(c)](Node& self) {
    const NodePtr& pa = self.parents[0];
    Matrix g(pa->value.rows(), pa->value.cols());
    for (std::size_t m = 0; m < r.size(); ++m) g(r[m], c[m]) += self.grad[m];
    accumulate(pa, g);
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  return make_node(Matrix(1, 1, s), {a}, [](Node& self) {
    const NodePtr& pa = self.parents[0];
    accumulate(pa, Matrix(pa->value.rows(), pa->value.cols(), self.grad[0]));
  });
}

Var weighted_sum(const Var& a, const Matrix& weights) {
  if (!a.value().same_shape(weights)) {
    throw DimensionError("weighted_sum " + shape_string(a.value()) + " with weights " +
                         shape_string(weights));
  }
  const double s = frobenius_dot(a.value(), weights);
  return make_node(Matrix(1, 1, s), {a}, [weights](Node& self) {
    accumulate(self.parents[0], self.grad[0] * weights);
  });
}

}  // namespace rlpeft
