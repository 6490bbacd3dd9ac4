// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "cpvae/spinsim/dataset.hpp"
#include "cpvae/spinsim/dataset_io.hpp"
#include "cpvae/spinsim/hamiltonian.hpp"
#include "cpvae/spinsim/lanczos.hpp"
#include "cpvae/spinsim/sampler.hpp"
#include "support/oracles.hpp"

namespace cpvae {
namespace {

std::vector<double> basis_vector(std::size_t dim, std::size_t index) {
  std::vector<double> v(dim, 0.0);
  v[index] = 1.0;
  return v;
}

std::vector<double> random_vector(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> v(dim);
  for (double& x : v) x = normal(rng);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

TEST(Hamiltonian, TwoSitePeriodicChainDoublesTheBond) {
  const auto spec = HamiltonianSpec::nnn(2, 0.0, 0.0);
  Eigen::MatrixXd dense(4, 4);
  for (std::size_t c = 0; c < 4; ++c) {
    const auto col = apply_hamiltonian(spec, basis_vector(4, c));
    for (std::size_t r = 0; r < 4; ++r) dense(Eigen::Index(r), Eigen::Index(c)) = col[r];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
  const Eigen::Vector4d expected(-2.0, -2.0, 2.0, 2.0);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(solver.eigenvalues()[k], expected[k], 1e-12);
}

TEST(Hamiltonian, AllUpThreeSiteRingHasEnergyMinusThree) {
  const auto spec = HamiltonianSpec::nnn(3, 0.0, 0.0);
  const auto v = basis_vector(8, 7);
  const auto hv = apply_hamiltonian(spec, v);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_DOUBLE_EQ(hv[k], -3.0 * v[k]);
}

TEST(Hamiltonian, LongRangePairsCountedOnce) {
  const auto spec = HamiltonianSpec::lr(3, 1.0, 0.0);
  const auto hv = apply_hamiltonian(spec, basis_vector(8, 7));
  EXPECT_DOUBLE_EQ(hv[7], -2.5);
}

TEST(Hamiltonian, MatchesDenseOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 6; ++trial) {
    const auto spec = testing::random_spec(rng, 7);
    const auto dense = testing::dense_hamiltonian(spec);
    const std::size_t dim = spec.dimension();
    const auto v = random_vector(dim, rng);
    const auto hv = apply_hamiltonian(spec, v);
    const Eigen::VectorXd ref = dense * Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(dim));
    for (std::size_t k = 0; k < dim; ++k) EXPECT_NEAR(hv[k], ref[Eigen::Index(k)], 1e-12);
  }
}

TEST(Hamiltonian, RejectsBadInput) {
  EXPECT_THROW(apply_hamiltonian(HamiltonianSpec::nnn(3, 0.0, 0.0), std::vector<double>(7)),
               InvalidInput);
  auto bad_boundary = HamiltonianSpec::nnn(4, 0.2, 1.0);
  bad_boundary.boundary = Boundary::Open;
  EXPECT_THROW(bad_boundary.validate(), InvalidInput);
  auto lr_periodic = HamiltonianSpec::lr(4, 2.0, 1.0);
  lr_periodic.boundary = Boundary::Periodic;
  EXPECT_THROW(lr_periodic.validate(), InvalidInput);
  EXPECT_THROW(HamiltonianSpec::nnn(2, 0.5, 1.0).validate(), InvalidInput);
  EXPECT_THROW(HamiltonianSpec::nnn(4, 1.5, 1.0).validate(), InvalidInput);
  EXPECT_THROW(HamiltonianSpec::nnn(4, 0.5, -1.0).validate(), InvalidInput);
  EXPECT_THROW(HamiltonianSpec::lr(4, 0.0, 1.0).validate(), InvalidInput);
  EXPECT_THROW(HamiltonianSpec::nnn(21, 0.0, 1.0).validate(), InvalidInput);
  EXPECT_NO_THROW(HamiltonianSpec::nnn(2, 0.0, 1.0).validate());
}

TEST(HamiltonianProperty, Linear) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto spec = testing::random_spec(rng, 8);
    const std::size_t dim = spec.dimension();
    const auto u = random_vector(dim, rng);
    const auto v = random_vector(dim, rng);
    const double a = coef(rng);
    const double b = coef(rng);
    std::vector<double> mix(dim);
    for (std::size_t k = 0; k < dim; ++k) mix[k] = a * u[k] + b * v[k];
    const auto hu = apply_hamiltonian(spec, u);
    const auto hv = apply_hamiltonian(spec, v);
    const auto hm = apply_hamiltonian(spec, mix);
    for (std::size_t k = 0; k < dim; ++k) {
      EXPECT_NEAR(hm[k], a * hu[k] + b * hv[k], 1e-12 * std::max(1.0, std::abs(hm[k])));
    }
  }
}

TEST(HamiltonianProperty, Symmetric) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto spec = testing::random_spec(rng, 8);
    const auto u = random_vector(spec.dimension(), rng);
    const auto v = random_vector(spec.dimension(), rng);
    const double lhs = dot(u, apply_hamiltonian(spec, v));
    const double rhs = dot(apply_hamiltonian(spec, u), v);
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Lanczos, SingleSiteFieldOnly) {
  const auto state = lanczos_ground_state(HamiltonianSpec::nnn(1, 0.0, 1.0));
  EXPECT_NEAR(state.energy, -1.0, 1e-12);
  ASSERT_EQ(state.amplitudes.size(), 2U);
  EXPECT_NEAR(std::abs(state.amplitudes[0]), 1.0 / std::sqrt(2.0), 1e-10);
  EXPECT_NEAR(state.amplitudes[0], -state.amplitudes[1], 1e-10);
}

TEST(Lanczos, TwoSiteFerromagnet) {
  const auto state = lanczos_ground_state(HamiltonianSpec::nnn(2, 0.0, 0.0));
  EXPECT_NEAR(state.energy, -2.0, 1e-12);
}

TEST(Lanczos, TenSiteFrustratedChainMatchesDense) {
  const auto spec = HamiltonianSpec::nnn(10, 0.6, 1.0);
  const auto state = lanczos_ground_state(spec);
  const double ref = testing::dense_ground_energy(spec);
  EXPECT_LE(std::abs(state.energy - ref) / std::abs(ref), 1e-8);
  EXPECT_LE(state.residual, 1e-10);
}

TEST(Lanczos, NormalizedRealAndDeterministic) {
  const auto spec = HamiltonianSpec::lr(8, 2.0, 1.5);
  const auto a = lanczos_ground_state(spec, 1e-10, 500, 42);
  const auto b = lanczos_ground_state(spec, 1e-10, 500, 42);
  EXPECT_EQ(a.amplitudes, b.amplitudes);
  EXPECT_EQ(a.energy, b.energy);
  double norm2 = 0.0;
  for (double x : a.amplitudes) norm2 += x * x;
  EXPECT_NEAR(norm2, 1.0, 1e-12);
}

TEST(Lanczos, ReportsNonConvergence) {
  LanczosOptions options;
  options.max_iter = 2;
  try {
    lanczos_ground_state(HamiltonianSpec::nnn(8, 0.5, 1.0), options, 1);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.residual(), options.tol);
    EXPECT_EQ(e.iterations(), 2U);
  }
}

TEST(Lanczos, SmallBasisBudgetStillConverges) {
  LanczosOptions options;
  options.basis_bytes = 8 * sizeof(double) * 256;  // 8 vectors per restart cycle
  options.max_iter = 5000;
  const auto spec = HamiltonianSpec::nnn(8, 0.3, 0.8);
  const auto state = lanczos_ground_state(spec, options, 5);
  EXPECT_NEAR(state.energy, testing::dense_ground_energy(spec), 1e-8);
}

TEST(LanczosProperty, MatchesDenseForRandomSpecs) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 12; ++trial) {
    const auto spec = testing::random_spec(rng, 9);
    const auto state = lanczos_ground_state(spec, 1e-10, 500, std::uint64_t(trial));
    const double ref = testing::dense_ground_energy(spec);
    EXPECT_LE(std::abs(state.energy - ref) / std::abs(ref), 1e-8)
        << to_string(spec.model) << " N=" << spec.n_sites;
  }
}

TEST(Sampler, PointMassGivesAllUp) {
  GroundStateVector state;
  state.n_sites = 5;
  state.amplitudes.assign(32, 0.0);
  state.amplitudes[31] = 1.0;
  const auto batch = sample_configurations(state, 200, 9);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    for (Spin s : batch.row(k)) EXPECT_EQ(s, 1);
  }
}

TEST(Sampler, UniformSuperpositionPassesChiSquare) {
  GroundStateVector state;
  state.n_sites = 4;
  state.amplitudes.assign(16, 0.25);
  const std::size_t count = 100000;
  const auto batch = sample_configurations(state, count, 17);
  std::vector<double> freq(16, 0.0);
  for (std::size_t k = 0; k < batch.size(); ++k) freq[encode_basis_index(batch.row(k))] += 1.0;
  const double expected = double(count) / 16.0;
  double chi2 = 0.0;
  for (double f : freq) chi2 += (f - expected) * (f - expected) / expected;
  EXPECT_LT(chi2, 30.578);  // 99th percentile of chi-square with 15 degrees of freedom
}

TEST(Sampler, DeepParamagnetMarginals) {
  const auto state = lanczos_ground_state(HamiltonianSpec::nnn(8, 0.0, 4.0));
  const auto batch = sample_configurations(state, 100000, 23);
  for (std::size_t i = 0; i < 8; ++i) {
    double up = 0.0;
    for (std::size_t k = 0; k < batch.size(); ++k) up += batch.at(k, i) > 0 ? 1.0 : 0.0;
    const double f = up / double(batch.size());
    EXPECT_GE(f, 0.47);
    EXPECT_LE(f, 0.53);
  }
}

TEST(Sampler, RejectsUnnormalizedState) {
  GroundStateVector state;
  state.n_sites = 2;
  state.amplitudes = {0.5, 0.5, 0.5, 0.51};
  EXPECT_THROW(sample_configurations(state, 10, 1), InvalidInput);
  state.amplitudes = {0.5, 0.5, 0.5, 0.5};
  EXPECT_THROW(sample_configurations(state, 0, 1), InvalidInput);
}

TEST(Sampler, BasisIndexEndianness) {
  std::vector<Spin> x(3);
  decode_basis_index(1, x);
  EXPECT_EQ(x, (std::vector<Spin>{1, -1, -1}));
  EXPECT_EQ(encode_basis_index(x), 1U);
  EXPECT_EQ(to_bitstring(x), "100");
}

TEST(ExactExpectation, Examples) {
  GroundStateVector up;
  up.n_sites = 3;
  up.amplitudes.assign(8, 0.0);
  up.amplitudes[7] = 1.0;
  EXPECT_DOUBLE_EQ(exact_expectation_zz(up, 0, 2), 1.0);
  EXPECT_DOUBLE_EQ(exact_expectation_zz(up, 1, 1, true), 1.0);

  GroundStateVector uniform;
  uniform.n_sites = 3;
  uniform.amplitudes.assign(8, 1.0 / std::sqrt(8.0));
  EXPECT_NEAR(exact_expectation_zz(uniform, 0, 1), 0.0, 1e-15);

  const auto spec = HamiltonianSpec::nnn(2, 0.0, 1.0);
  const auto state = lanczos_ground_state(spec);
  const auto p = testing::dense_ground_probabilities(spec);
  double ref = 0.0;
  for (std::size_t s = 0; s < 4; ++s) ref += p[s] * testing::spin_of(s, 0) * testing::spin_of(s, 1);
  EXPECT_NEAR(exact_expectation_zz(state, 0, 1), ref, 1e-10);
  EXPECT_THROW(exact_expectation_zz(state, 0, 1, true), InvalidInput);
  EXPECT_THROW(exact_expectation_zz(state, 0, 2), InvalidInput);
}

TEST(SamplerProperty, EmpiricalCorrelatorsWithinFourStandardErrors) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 3; ++trial) {
    const auto spec = testing::random_spec(rng, 7);
    const auto state = lanczos_ground_state(spec, 1e-10, 500, 3);
    const std::size_t count = 100000;
    const auto batch = sample_configurations(state, count, 1000 + std::uint64_t(trial));
    for (std::size_t i = 0; i < spec.n_sites; ++i) {
      for (std::size_t j = i + 1; j < spec.n_sites; ++j) {
        double sum = 0.0;
        for (std::size_t k = 0; k < count; ++k) sum += batch.at(k, i) * batch.at(k, j);
        const double exact = exact_expectation_zz(state, i, j);
        const double se = std::sqrt(std::max(1.0 - exact * exact, 1e-12) / double(count));
        EXPECT_LE(std::abs(sum / double(count) - exact), 4.0 * se + 1e-12)
            << "pair " << i << "," << j;
      }
    }
  }
}

TEST(SamplerProperty, GlobalSpinFlipSymmetry) {
  for (const auto& spec : {HamiltonianSpec::nnn(6, 0.7, 0.5), HamiltonianSpec::lr(6, 1.5, 2.0),
                           HamiltonianSpec::nnn(7, 0.2, 1.2)}) {
    const auto state = lanczos_ground_state(spec);
    const std::size_t mask = spec.dimension() - 1;
    for (std::size_t s = 0; s < spec.dimension(); ++s) {
      const double p = state.amplitudes[s] * state.amplitudes[s];
      const double q = state.amplitudes[s ^ mask] * state.amplitudes[s ^ mask];
      EXPECT_NEAR(p, q, 1e-9);
    }
  }
}

TEST(Grid, Spacing) {
  const auto lin = linspace(0.0, 2.0, 21);
  EXPECT_EQ(lin.size(), 21U);
  EXPECT_EQ(lin.front(), 0.0);
  EXPECT_EQ(lin.back(), 2.0);
  EXPECT_NEAR(lin[5], 0.5, 1e-15);
  const auto lg = logspace(1.6, 10.0, 20);
  EXPECT_EQ(lg.front(), 1.6);
  EXPECT_EQ(lg.back(), 10.0);
  for (std::size_t k = 1; k + 1 < lg.size(); ++k) {
    EXPECT_NEAR(lg[k] * lg[k], lg[k - 1] * lg[k + 1], 1e-12);
  }
  EXPECT_THROW(logspace(0.0, 1.0, 3), InvalidInput);
}

GridDataset small_grid(std::uint64_t seed, std::size_t threads = 1) {
  GridOptions options;
  options.threads = threads;
  return generate_grid_dataset(HamiltonianSpec::nnn(5, 0.0, 0.0), {"j2", linspace(0.0, 1.0, 3)},
                               {"h", linspace(0.0, 2.0, 4)}, 50, seed, options);
}

TEST(GridDataset, Bookkeeping) {
  const auto ds = small_grid(1);
  EXPECT_EQ(ds.records.size(), 12U);
  for (const auto& r : ds.records) {
    EXPECT_EQ(r.samples.size(), 50U);
    EXPECT_EQ(r.samples.n_sites(), 5U);
    EXPECT_EQ(ds.axis1.values[r.index1], r.axis1);
    EXPECT_EQ(ds.axis2.values[r.index2], r.axis2);
  }
  EXPECT_EQ(ds.all_configurations().size(), 600U);
}

TEST(GridDataset, DeterministicAcrossRunsAndThreads) {
  const std::string a = serialize_dataset(small_grid(8));
  const std::string b = serialize_dataset(small_grid(8));
  const std::string c = serialize_dataset(small_grid(8, 3));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  EXPECT_NE(a, serialize_dataset(small_grid(9)));
}

TEST(GridDataset, FileRoundTrip) {
  const auto ds = small_grid(2);
  const auto text = serialize_dataset(ds);
  EXPECT_EQ(parse_dataset(text), ds);
  const auto header = nlohmann::json::parse(text.substr(0, text.find('\n')));
  EXPECT_EQ(header.at("model"), "nnn_tfim");
  EXPECT_EQ(header.at("n_sites"), 5);
  EXPECT_EQ(header.at("boundary"), "periodic");
  EXPECT_EQ(header.at("samples_per_point"), 50);
  EXPECT_EQ(header.at("format_version"), kDatasetFormatVersion);
}

TEST(GridDataset, RejectsMalformedFiles) {
  const auto text = serialize_dataset(small_grid(2));
  EXPECT_THROW(parse_dataset(""), InvalidInput);
  EXPECT_THROW(parse_dataset("{\"kind\":\"other\"}\n"), InvalidInput);
  auto broken = text;
  broken.replace(broken.find("\"samples\":[\"") + 12, 1, "2");
  EXPECT_THROW(parse_dataset(broken), InvalidInput);
}

TEST(GridDataset, LanczosFailureCarriesCoordinates) {
  GridOptions options;
  options.lanczos.max_iter = 1;
  try {
    generate_grid_dataset(HamiltonianSpec::nnn(6, 0.0, 0.0), {"j2", {0.5}}, {"h", {1.0}}, 10, 0,
                          options);
    FAIL() << "expected GridPointError";
  } catch (const GridPointError& e) {
    EXPECT_EQ(e.axis1(), 0.5);
    EXPECT_EQ(e.axis2(), 1.0);
    EXPECT_NE(std::string(e.what()).find("j2=0.5"), std::string::npos);
  }
}

TEST(GridDataset, RejectsOutOfRangeAxes) {
  EXPECT_THROW(generate_grid_dataset(HamiltonianSpec::nnn(5, 0.0, 0.0), {"j2", {1.5}},
                                     {"h", {1.0}}, 10, 0),
               InvalidInput);
  EXPECT_THROW(generate_grid_dataset(HamiltonianSpec::nnn(5, 0.0, 0.0), {"j2", {0.5}},
                                     {"j2", {1.0}}, 10, 0),
               InvalidInput);
}

}  // namespace
}  // namespace cpvae
