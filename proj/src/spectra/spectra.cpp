// SPDX-License-Identifier: Apache-2.0
#include "rlpeft/spectra/spectra.hpp"

#include <algorithm>
#include <cmath>

#include "rlpeft/adapters/adapter.hpp"
#include "rlpeft/errors.hpp"
#include "rlpeft/rlvr/optimizer.hpp"
#include "rlpeft/tensor/svd.hpp"
#include "rlpeft/util/csv.hpp"

namespace rlpeft::spectra {

SpectralBasis basis_of(const Matrix& w0) {
  SvdResult f = svd(w0);
  return SpectralBasis{std::move(f.U), std::move(f.S), std::move(f.V)};
}

SpectralProfile project_update(const Matrix& delta, const SpectralBasis& basis) {
  if (delta.rows() != basis.U.rows() || delta.cols() != basis.V.rows()) {
    throw DimensionError("project_update: delta " + shape_string(delta) + " vs basis " +
                         shape_string(basis.U) + " / " + shape_string(basis.V));
  }
  const std::size_t k = basis.S.size();
  const Matrix dv = matmul(delta, basis.V);
  SpectralProfile p;
  p.c.resize(k);
  double energy = 0.0, peak = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < delta.rows(); ++i) s += basis.U(i, j) * dv(i, j);
    p.c[j] = s;
    energy += s * s;
    peak = std::max(peak, std::abs(s));
  }
  p.normalized.assign(k, 0.0);
  p.cumulative_energy.assign(k, 0.0);
  double acc = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (peak > 0.0) p.normalized[j] = std::abs(p.c[j]) / peak;
    acc += p.c[j] * p.c[j];
    if (energy > 0.0) p.cumulative_energy[j] = acc / energy;
  }
  if (energy > 0.0) p.cumulative_energy[k - 1] = 1.0;
  const double f = frobenius_norm(delta);
  p.total_energy = f * f;
  p.cross_energy = std::max(0.0, p.total_energy - energy);
  return p;
}

double principal_mass(const SpectralProfile& profile, std::size_t r) {
  if (r == 0 || r > profile.cumulative_energy.size()) {
    throw ContractError("principal_mass: r = " + std::to_string(r) + " outside 1.." +
                        std::to_string(profile.cumulative_energy.size()));
  }
  return profile.cumulative_energy[r - 1];
}

std::vector<LayerProfile> spectra_report(const policy::PolicyNet& before, const policy::PolicyNet& after) {
  const auto& a = before.config();
  const auto& b = after.config();
  if (a.vocab != b.vocab || a.d_model != b.d_model || a.n_layers != b.n_layers || a.n_heads != b.n_heads ||
      a.d_ff != b.d_ff || a.max_seq != b.max_seq) {
    throw MismatchError("spectra: policy architectures differ");
  }
  if (before.attached() != after.attached() ||
      before.adapter_config().kind != after.adapter_config().kind ||
      before.adapter_config().rank != after.adapter_config().rank) {
    throw MismatchError("spectra: adapter configurations differ");
  }
  const auto lb = before.linears();
  const auto la = after.linears();
  std::vector<LayerProfile> out;
  for (std::size_t i = 0; i < la.size(); ++i) {
    if (lb[i]->name() != la[i]->name()) throw MismatchError("spectra: layer order differs at " + la[i]->name());
    if (!(lb[i]->base().value() == la[i]->base().value())) {
      throw MismatchError("spectra: base weight of " + la[i]->name() + " differs");
    }
    if (!la[i]->attached()) continue;
    const Matrix delta = adapters::effective_delta(*la[i]) - adapters::effective_delta(*lb[i]);
    out.push_back({la[i]->name(), project_update(delta, basis_of(la[i]->base().value()))});
  }
  return out;
}

void write_profiles_csv(std::ostream& out, std::span<const LayerProfile> profiles) {
  using util::format_double;
  out << "layer_name,k,c_k,normalized_k,cumulative_energy_k\n";
  for (const auto& lp : profiles) {
    const auto& p = lp.profile;
    for (std::size_t k = 0; k < p.c.size(); ++k) {
      out << lp.layer << ',' << k << ',' << format_double(p.c[k]) << ',' << format_double(p.normalized[k]) << ','
          << format_double(p.cumulative_energy[k]) << '\n';
    }
  }
}

void write_summary_csv(std::ostream& out, std::span<const LayerProfile> profiles, std::size_t r) {
  using util::format_double;
  out << "layer_name,total_energy,diagonal_energy,cross_energy,principal_mass_r\n";
  for (const auto& lp : profiles) {
    const auto& p = lp.profile;
    const std::size_t rr = std::min(r, p.c.size());
    out << lp.layer << ',' << format_double(p.total_energy) << ','
        << format_double(p.total_energy - p.cross_energy) << ',' << format_double(p.cross_energy) << ','
        << format_double(principal_mass(p, rr)) << '\n';
  }
}

ProbeResult principal_gradient_probe(const ProbeConfig& cfg) {
  if (cfg.rank == 0 || cfg.rank > cfg.n) throw ConfigError("probe: rank must be in 1..n");
  Rng rng(cfg.seed);
  const Matrix w0 = rng.normal_matrix(cfg.n, cfg.n, 1.0 / std::sqrt(static_cast<double>(cfg.n)));
  const SpectralBasis basis = basis_of(w0);
  const std::size_t r = cfg.rank;
  const Matrix ur = basis.U.block(0, 0, cfg.n, r);
  const Matrix vr = basis.V.block(0, 0, cfg.n, r);

  // Target: keep W0 and add a unit shift along each top diagonal pair, plus a
  // small generic component so the gradient is not orthogonal to the tail.
  Matrix shift = vr.transposed();
  const Matrix noise = rng.normal_matrix(r, cfg.n, cfg.noise);
  shift += noise;
  const Matrix target = matmul_tn(ur, w0) + shift;

  adapters::AdapterConfig acfg;
  acfg.kind = adapters::AdapterKind::kMiLoRA;
  acfg.rank = r;
  acfg.dropout = 0.0;
  adapters::LinearWithAdapter layer("probe", adapters::ModuleRole::kQ, w0);
  layer.attach(acfg, rng);
  const Matrix start = adapters::merge_delta(layer);

  rlvr::Adam adam(adapters::lr_groups(layer.parameters(), cfg.lr, acfg));
  const Var eye = Var::constant(Matrix::identity(cfg.n));
  const Var urt = Var::constant(ur.transposed());
  const Var tgt = Var::constant(target);
  auto loss = [&] {
    const Var diff = sub(matmul(urt, adapters::adapter_forward(layer, eye)), tgt);
    return weighted_sum(hadamard(diff, diff), Matrix(r, cfg.n, 0.5));
  };

  ProbeResult res;
  res.initial = project_update(start, basis);
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    adam.zero_grad();
    const Var l = loss();
    res.final_loss = l.value()[0];
    backward(l);
    adam.step();
    res.principal_mass_by_step.push_back(
        principal_mass(project_update(adapters::merge_delta(layer) - start, basis), r));
  }
  res.final = project_update(adapters::merge_delta(layer) - start, basis);
  {
    NoGradGuard guard;
    res.final_loss = loss().value()[0];
  }
  return res;
}

}  // namespace rlpeft::spectra
