// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cpvae/error.hpp"
#include "cpvae/random.hpp"
#include "cpvae/spinsim/configuration.hpp"
#include "cpvae/spinsim/lanczos.hpp"

namespace cpvae {

/// Basis index -> spin configuration. Site k is bit k; a set bit is +1.
inline void decode_basis_index(std::size_t index, std::span<Spin> out) {
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = ((index >> k) & 1U) ? 1 : -1;
}

inline std::size_t encode_basis_index(std::span<const Spin> config) {
  std::size_t index = 0;
  for (std::size_t k = 0; k < config.size(); ++k) {
    if (config[k] > 0) index |= std::size_t{1} << k;
  }
  return index;
}

namespace detail {

inline void require_normalized(const GroundStateVector& state) {
  require(state.n_sites >= 1 && state.amplitudes.size() == (std::size_t{1} << state.n_sites),
          "state amplitude count must equal 2^n_sites");
  double norm2 = 0.0;
  for (double a : state.amplitudes) norm2 += a * a;
  require(std::abs(norm2 - 1.0) <= 1e-9, "state is not normalized");
}

}  // namespace detail

/// Exact inverse-CDF sampler over the Born distribution |amplitude|^2.
class BornSampler {
 public:
  explicit BornSampler(const GroundStateVector& state) : n_sites_(state.n_sites) {
    detail::require_normalized(state);
    cumulative_.resize(state.amplitudes.size());
    double acc = 0.0;
    for (std::size_t s = 0; s < state.amplitudes.size(); ++s) {
      acc += state.amplitudes[s] * state.amplitudes[s];
      cumulative_[s] = acc;
    }
  }

  std::size_t draw_index(Rng& rng) const {
    std::uniform_real_distribution<double> uniform(0.0, cumulative_.back());
    const double u = uniform(rng);
    // upper_bound never lands on a zero-probability entry.
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<std::size_t>(it - cumulative_.begin());
  }

  ConfigBatch sample(std::size_t count, std::uint64_t seed) const {
    detail::require(count >= 1, "count must be >= 1");
    Rng rng(seed);
    std::vector<Spin> spins(count * n_sites_);
    for (std::size_t c = 0; c < count; ++c) {
      decode_basis_index(draw_index(rng), {spins.data() + c * n_sites_, n_sites_});
    }
    return ConfigBatch(n_sites_, std::move(spins));
  }

 private:
  std::size_t n_sites_;
  std::vector<double> cumulative_;
};

inline ConfigBatch sample_configurations(const GroundStateVector& state, std::size_t count,
                                         std::uint64_t seed) {
  return BornSampler(state).sample(count, seed);
}

/// <psi| Z_i Z_j |psi>. With i == j and `single_site` set, returns <psi| Z_i |psi>.
inline double exact_expectation_zz(const GroundStateVector& state, std::size_t i, std::size_t j,
                                   bool single_site = false) {
  detail::require(i < state.n_sites && j < state.n_sites, "site index out of range");
  detail::require(!single_site || i == j, "single-site expectation requires i == j");
  double acc = 0.0;
  for (std::size_t s = 0; s < state.amplitudes.size(); ++s) {
    const double p = state.amplitudes[s] * state.amplitudes[s];
    const int zi = ((s >> i) & 1U) ? 1 : -1;
    const int zj = ((s >> j) & 1U) ? 1 : -1;
    acc += p * (single_site ? zi : zi * zj);
  }
  return acc;
}

}  // namespace cpvae
