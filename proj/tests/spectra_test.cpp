// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rlpeft/errors.hpp"
#include "rlpeft/spectra/spectra.hpp"

namespace rlpeft::spectra {
namespace {

Matrix outer(const Matrix& u, std::size_t i, const Matrix& v, std::size_t j) {
  Matrix m(u.rows(), v.rows());
  for (std::size_t a = 0; a < u.rows(); ++a)
    for (std::size_t b = 0; b < v.rows(); ++b) m(a, b) = u(a, i) * v(b, j);
  return m;
}

SpectralBasis random_basis(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return basis_of(rng.normal_matrix(n, n, 1.0));
}

TEST(Project, AlignedRankOne) {
  const SpectralBasis b = random_basis(8, 1);
  const SpectralProfile p = project_update(outer(b.U, 0, b.V, 0), b);
  EXPECT_NEAR(p.normalized[0], 1.0, 1e-12);
  for (std::size_t k = 1; k < 8; ++k) EXPECT_NEAR(p.normalized[k], 0.0, 1e-12);
  EXPECT_NEAR(p.cumulative_energy[0], 1.0, 1e-12);
  EXPECT_NEAR(principal_mass(p, 1), 1.0, 1e-12);
}

TEST(Project, TwoEqualComponents) {
  const SpectralBasis b = random_basis(8, 2);
  const SpectralProfile p = project_update(outer(b.U, 0, b.V, 0) + outer(b.U, 1, b.V, 1), b);
  EXPECT_NEAR(p.cumulative_energy[0], 0.5, 1e-12);
  EXPECT_NEAR(p.cumulative_energy[1], 1.0, 1e-12);
}

TEST(Project, CrossTermHasNoDiagonalEnergy) {
  const SpectralBasis b = random_basis(8, 3);
  const SpectralProfile p = project_update(outer(b.U, 0, b.V, 1), b);
  for (double c : p.c) EXPECT_NEAR(c, 0.0, 1e-12);
  EXPECT_NEAR(p.cross_energy, 1.0, 1e-12);
}

TEST(Project, InvariantsOnRandomDeltas) {
  Rng rng(4);
  const SpectralBasis b = random_basis(10, 5);
  for (int t = 0; t < 20; ++t) {
    const Matrix d = rng.normal_matrix(10, 10, 1.0);
    const SpectralProfile p = project_update(d, b);
    double diag = 0.0;
    for (double c : p.c) diag += c * c;
    EXPECT_LE(diag, p.total_energy + 1e-12);
    for (std::size_t k = 1; k < 10; ++k) EXPECT_GE(p.cumulative_energy[k], p.cumulative_energy[k - 1]);
    EXPECT_EQ(p.cumulative_energy.back(), 1.0);
    for (double v : p.normalized) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    const SpectralProfile scaled = project_update(3.5 * d, b);
    for (std::size_t k = 0; k < 10; ++k) EXPECT_NEAR(scaled.cumulative_energy[k], p.cumulative_energy[k], 1e-12);

    SpectralBasis flipped = b;
    for (std::size_t i = 0; i < 10; ++i) {
      flipped.U(i, 3) = -flipped.U(i, 3);
      flipped.V(i, 3) = -flipped.V(i, 3);
    }
    EXPECT_NEAR(project_update(d, flipped).c[3], p.c[3], 1e-12);
  }
}

TEST(Project, ShapeMismatch) {
  const SpectralBasis b = random_basis(6, 6);
  EXPECT_THROW(project_update(Matrix(5, 6), b), DimensionError);
}

TEST(PrincipalMass, Examples) {
  SpectralProfile uniform;
  uniform.c.assign(8, 1.0);
  for (std::size_t k = 0; k < 8; ++k) uniform.cumulative_energy.push_back((k + 1) / 8.0);
  EXPECT_DOUBLE_EQ(principal_mass(uniform, 4), 0.5);
  EXPECT_THROW(principal_mass(uniform, 9), ContractError);
  EXPECT_THROW(principal_mass(uniform, 0), ContractError);

  const SpectralBasis b = random_basis(12, 7);
  Matrix spiked = 5.0 * outer(b.U, 0, b.V, 0) + 3.0 * outer(b.U, 1, b.V, 1);
  for (std::size_t k = 2; k < 12; ++k) spiked += 0.05 * outer(b.U, k, b.V, k);
  EXPECT_GT(principal_mass(project_update(spiked, b), 2), 0.99);
}

TEST(PrincipalMass, RandomDeltasSpreadEvenly) {
  const std::size_t n = 16, r = 4;
  const SpectralBasis b = random_basis(n, 8);
  Rng rng(9);
  double sum = 0.0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) sum += principal_mass(project_update(rng.normal_matrix(n, n, 1.0), b), r);
  const double q = static_cast<double>(r) / n;
  // c_k are iid normal, so the top-r share is Beta(r/2, (n-r)/2).
  const double var = q * (1 - q) / (n / 2.0 + 1);
  EXPECT_NEAR(sum / trials, q, 3 * std::sqrt(var / trials));
}

TEST(Probe, MiloraUpdateMovesIntoPrincipalSubspace) {
  const ProbeResult r = principal_gradient_probe(ProbeConfig{});
  EXPECT_EQ(r.principal_mass_by_step.size(), 100u);
  EXPECT_GT(principal_mass(r.final, 4), 0.9);
  EXPECT_LT(r.final_loss, 1e-2);
}

policy::PolicyConfig small() {
  policy::PolicyConfig c;
  c.vocab = 16;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 8;
  c.max_seq = 8;
  return c;
}

TEST(Report, IdenticalNetsGiveZeroProfiles) {
  Rng a(10), b(10);
  policy::PolicyNet x(small(), a), y(small(), b);
  adapters::AdapterConfig cfg;
  x.attach(cfg, a);
  y.attach(cfg, b);
  const auto report = spectra_report(x, y);
  ASSERT_EQ(report.size(), 7u);
  for (const auto& lp : report)
    for (double c : lp.profile.c) EXPECT_EQ(c, 0.0);
  std::ostringstream csv;
  write_profiles_csv(csv, report);
  EXPECT_EQ(csv.str().substr(0, 50), "layer_name,k,c_k,normalized_k,cumulative_energy_k\n");
}

TEST(Report, MismatchesRejected) {
  Rng a(11), b(12);
  policy::PolicyNet x(small(), a), y(small(), b);
  adapters::AdapterConfig cfg;
  x.attach(cfg, a);
  y.attach(cfg, b);
  EXPECT_THROW(spectra_report(x, y), MismatchError);
  policy::PolicyConfig other = small();
  other.d_ff = 16;
  Rng c(11);
  policy::PolicyNet z(other, c);
  EXPECT_THROW(spectra_report(x, z), MismatchError);
}

TEST(Report, PerturbedAdapterShowsUp) {
  Rng a(13), b(13);
  policy::PolicyNet x(small(), a), y(small(), b);
  adapters::AdapterConfig cfg;
  cfg.kind = adapters::AdapterKind::kIA3;
  x.attach(cfg, a);
  y.attach(cfg, b);
  for (auto& p : y.parameters())
    if (p.trainable()) p.var.mutable_value().fill(1.5);
  const auto report = spectra_report(x, y);
  ASSERT_EQ(report.size(), 3u);  // k, v, down
  for (const auto& lp : report) EXPECT_GT(lp.profile.total_energy, 0.0);
}

}  // namespace
}  // namespace rlpeft::spectra
