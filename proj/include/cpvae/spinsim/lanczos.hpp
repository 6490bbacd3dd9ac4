// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "cpvae/error.hpp"
#include "cpvae/random.hpp"
#include "cpvae/spinsim/hamiltonian.hpp"

namespace cpvae {

/// Exact ground state in the Z basis. Amplitudes are real and L2-normalized.
struct GroundStateVector {
  std::size_t n_sites = 0;
  std::vector<double> amplitudes;
  double energy = 0.0;
  double residual = 0.0;
  std::size_t iterations = 0;
};

struct LanczosOptions {
  double tol = 1e-10;
  std::size_t max_iter = 500;
  /// Upper bound on memory used by the stored Krylov basis of one restart cycle.
  std::size_t basis_bytes = std::size_t{512} << 20U;
};

/// Restarted Lanczos with full reorthogonalization against the stored Krylov basis.
/// Each cycle stores at most min(max_iter, basis_bytes / (8 * 2^N)) vectors and
/// restarts from the current Ritz vector. Convergence is declared on the explicit
/// residual ||H psi - E psi|| <= tol.
inline GroundStateVector lanczos_ground_state(const HamiltonianSpec& spec,
                                              const LanczosOptions& options,
                                              std::uint64_t seed) {
  spec.validate();
  detail::require(spec.n_sites >= 1 && spec.n_sites <= kMaxSites, "n_sites must lie in [1, 20]");
  detail::require(options.tol > 0.0, "tol must be > 0");
  detail::require(options.max_iter >= 1, "max_iter must be >= 1");

  const SpinChainOperator op(spec);
  const auto dim = static_cast<Eigen::Index>(op.dimension());
  using Vec = Eigen::VectorXd;

  const std::size_t by_memory =
      std::max<std::size_t>(8, options.basis_bytes / (sizeof(double) * op.dimension()));
  const auto cycle_cap = static_cast<Eigen::Index>(
      std::min<std::size_t>({options.max_iter, by_memory, op.dimension()}));

  Vec start(dim);
  {
    Rng rng(seed);
    std::normal_distribution<double> normal;
    for (Eigen::Index s = 0; s < dim; ++s) start[s] = normal(rng);
    start.normalize();
  }

  auto apply = [&](const Vec& v, Vec& out) {
    op.apply({v.data(), static_cast<std::size_t>(dim)},
             {out.data(), static_cast<std::size_t>(dim)});
  };

  std::size_t total_iterations = 0;
  double last_residual = std::numeric_limits<double>::infinity();
  Vec w(dim);
  Vec ritz(dim);
  Vec h_ritz(dim);

  while (total_iterations < options.max_iter) {
    std::vector<Vec> basis;
    basis.reserve(static_cast<std::size_t>(cycle_cap));
    basis.push_back(start);
    std::vector<double> alphas;
    std::vector<double> betas;

    Eigen::Index j = 0;
    bool finished_cycle = false;
    while (!finished_cycle) {
      apply(basis[static_cast<std::size_t>(j)], w);
      ++total_iterations;
      const double a = basis[static_cast<std::size_t>(j)].dot(w);
      alphas.push_back(a);
      // Two passes of classical Gram-Schmidt against the whole basis.
      for (int pass = 0; pass < 2; ++pass) {
        for (const Vec& q : basis) w -= q.dot(w) * q;
      }
      const double b = w.norm();

      const auto k = static_cast<Eigen::Index>(alphas.size());
      Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alphas.data(), k);
      Eigen::VectorXd sub(std::max<Eigen::Index>(k - 1, 0));
      for (Eigen::Index i = 0; i + 1 < k; ++i) sub[i] = betas[static_cast<std::size_t>(i)];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
      tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
      const double theta = tri.eigenvalues()[0];
      const Eigen::VectorXd y = tri.eigenvectors().col(0);
      const double estimate = std::abs(b * y[k - 1]);

      const double scale = std::max(1.0, std::abs(theta));
      const bool breakdown = b <= 1e-13 * scale;
      const bool budget_spent = total_iterations >= options.max_iter;
      const bool cycle_full = k >= cycle_cap;
      if (estimate <= 0.1 * options.tol || breakdown || budget_spent || cycle_full) {
        ritz.setZero();
        for (Eigen::Index i = 0; i < k; ++i) ritz += y[i] * basis[static_cast<std::size_t>(i)];
        ritz.normalize();
        apply(ritz, h_ritz);
        const double energy = ritz.dot(h_ritz);
        last_residual = (h_ritz - energy * ritz).norm();
        if (last_residual <= options.tol) {
          GroundStateVector out;
          out.n_sites = spec.n_sites;
          out.amplitudes.assign(ritz.data(), ritz.data() + dim);
          out.energy = energy;
          out.residual = last_residual;
          out.iterations = total_iterations;
          return out;
        }
        if (breakdown || budget_spent || cycle_full) {
          start = ritz;
          finished_cycle = true;
          continue;
        }
      }
      betas.push_back(b);
      basis.push_back(w / b);
      ++j;
    }
  }
  throw ConvergenceError("Lanczos did not converge within max_iter", last_residual,
                         total_iterations);
}

inline GroundStateVector lanczos_ground_state(const HamiltonianSpec& spec, double tol = 1e-10,
                                              std::size_t max_iter = 500,
                                              std::uint64_t seed = 0) {
  LanczosOptions options;
  options.tol = tol;
  options.max_iter = max_iter;
  return lanczos_ground_state(spec, options, seed);
}

}  // namespace cpvae
