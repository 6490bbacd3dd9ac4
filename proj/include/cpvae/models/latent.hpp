// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "cpvae/autodiff/tensor.hpp"
#include "cpvae/error.hpp"
#include "cpvae/random.hpp"

namespace cpvae {

/// Encoder output for one input: mean and log-variance per latent dimension.
struct LatentStats {
  std::vector<double> mu;
  std::vector<double> log_var;

  std::size_t dim() const noexcept { return mu.size(); }
  double sigma(std::size_t k) const { return std::exp(0.5 * log_var[k]); }
};

/// z = mu + sigma * epsilon, with the standard-normal draw kept for reproducibility.
struct LatentSample {
  std::vector<double> z;
  std::vector<double> epsilon;
};

inline constexpr double kProbabilityFloor = 1e-7;

inline double clamp_probability(double p) {
  return std::min(std::max(p, kProbabilityFloor), 1.0 - kProbabilityFloor);
}

/// p[i] = p(x_i = +1 | x_<i, z).
struct ConditionalProbabilities {
  std::vector<double> p;
};

inline LatentSample reparameterize(const LatentStats& stats, std::vector<double> epsilon) {
  detail::require(stats.mu.size() == stats.log_var.size(), "mu and log_var lengths differ");
  detail::require(epsilon.size() == stats.mu.size(), "epsilon length must equal latent dim");
  LatentSample out;
  out.z.resize(stats.mu.size());
  for (std::size_t k = 0; k < out.z.size(); ++k) {
    out.z[k] = stats.mu[k] + std::exp(0.5 * stats.log_var[k]) * epsilon[k];
  }
  out.epsilon = std::move(epsilon);
  return out;
}

inline LatentSample reparameterize(const LatentStats& stats, Rng& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> eps(stats.mu.size());
  for (double& e : eps) e = normal(rng);
  return reparameterize(stats, std::move(eps));
}

/// Batched reparameterization: rows are inputs, columns latent dimensions.
inline RowMatrix reparameterize(const RowMatrix& mu, const RowMatrix& log_var,
                                const RowMatrix& epsilon) {
  return mu.array() + (0.5 * log_var.array()).exp() * epsilon.array();
}

inline RowMatrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  RowMatrix out(rows, cols);
  for (Eigen::Index k = 0; k < out.size(); ++k) out.data()[k] = normal(rng);
  return out;
}

}  // namespace cpvae
