// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rlpeft/policy/policy.hpp"
#include "rlpeft/tensor/matrix.hpp"

namespace rlpeft::spectra {

struct SpectralBasis {
  Matrix U;
  std::vector<double> S;
  Matrix V;
};

SpectralBasis basis_of(const Matrix& w0);

struct SpectralProfile {
  /// c[k] = u_k^T dW v_k
  std::vector<double> c;
  /// |c| divided by max |c| (all zeros when dW projects to nothing).
  std::vector<double> normalized;
  /// Running share of sum c^2 (all zeros when sum c^2 == 0).
  std::vector<double> cumulative_energy;
  /// ||dW||_F^2 - sum c^2: energy outside the diagonal pairs.
  double cross_energy = 0.0;
  double total_energy = 0.0;
};

/// Throws DimensionError if dW does not match the basis.
SpectralProfile project_update(const Matrix& delta, const SpectralBasis& basis);

/// cumulative_energy[r - 1]. Throws ContractError if r is 0 or exceeds the profile.
double principal_mass(const SpectralProfile& profile, std::size_t r);

struct LayerProfile {
  std::string layer;
  SpectralProfile profile;
};

/// One profile per adapter-bearing projection, with dW the change of the
/// effective weight between the two nets, analysed in the basis of W0.
/// Throws MismatchError if the nets differ in shape, adapters or base weights.
std::vector<LayerProfile> spectra_report(const policy::PolicyNet& before, const policy::PolicyNet& after);

/// layer_name,k,c_k,normalized_k,cumulative_energy_k
void write_profiles_csv(std::ostream& out, std::span<const LayerProfile> profiles);
/// layer_name,total_energy,diagonal_energy,cross_energy,principal_mass_r
void write_summary_csv(std::ostream& out, std::span<const LayerProfile> profiles, std::size_t r);

struct ProbeConfig {
  std::size_t n = 16;
  std::size_t rank = 4;
  std::size_t steps = 100;
  double lr = 0.02;
  /// Size of the off-diagonal part of the target shift.
  double noise = 0.1;
  std::uint64_t seed = 7;
};

struct ProbeResult {
  SpectralProfile initial;
  SpectralProfile final;
  std::vector<double> principal_mass_by_step;
  double final_loss = 0.0;
};

/// Trains a MiLoRA adapter on an n x n weight against the quadratic
/// 1/2 ||U_r^T W - T||^2, whose gradient lies in the span of the top-r left
/// singular vectors of W0, and tracks how the update's energy distributes
/// over singular indices.
ProbeResult principal_gradient_probe(const ProbeConfig& cfg);

}  // namespace rlpeft::spectra
