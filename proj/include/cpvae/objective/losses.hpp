// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "cpvae/error.hpp"
#include "cpvae/models/config.hpp"
#include "cpvae/models/latent.hpp"
#include "cpvae/spinsim/configuration.hpp"

namespace cpvae {

namespace detail {

/// Neumaier-compensated running sum; keeps loss reductions accurate to a few ulps
/// so finite-difference checks are not limited by accumulation error.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }
  CompensatedSum& operator-=(double x) noexcept {
    add(-x);
    return *this;
  }
  double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

}  // namespace detail

struct LossWeights {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  void validate() const {
    for (double w : {alpha, beta, gamma}) {
      detail::require(std::isfinite(w) && w >= 0.0, "loss weights must be finite and >= 0");
    }
  }
};

struct LossBreakdown {
  double reconstruction_nll = 0.0;
  double mutual_information = 0.0;
  double total_correlation = 0.0;
  double dimension_wise_kl = 0.0;
  double total = 0.0;
};

/// -sum_i [b_i log p_i + (1 - b_i) log(1 - p_i)], b_i = (1 + x_i) / 2, p clamped.
inline double bernoulli_nll(std::span<const double> p, std::span<const Spin> x) {
  detail::require(p.size() == x.size(), "probability and configuration lengths differ");
  double nll = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = clamp_probability(p[i]);
    nll -= x[i] > 0 ? std::log(q) : std::log1p(-q);
  }
  return nll;
}

inline double bernoulli_nll(const ConditionalProbabilities& p, const SpinConfiguration& x) {
  return bernoulli_nll(p.p, x.sites());
}

/// d(nll)/dp for one site; zero where the clamp is active.
inline double bernoulli_nll_grad(double p, Spin x) {
  if (p < kProbabilityFloor || p > 1.0 - kProbabilityFloor) return 0.0;
  return x > 0 ? -1.0 / p : 1.0 / (1.0 - p);
}

inline double mse_loss(std::span<const double> reconstruction, std::span<const Spin> x) {
  detail::require(reconstruction.size() == x.size(),
                  "reconstruction and configuration lengths differ");
  detail::require(!x.empty(), "mse of an empty configuration is undefined");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = reconstruction[i] - x[i];
    sum += d * d;
  }
  return sum / static_cast<double>(x.size());
}

inline double mse_loss(const std::vector<double>& reconstruction, const SpinConfiguration& x) {
  return mse_loss(std::span<const double>(reconstruction), x.sites());
}

/// KL(N(mu, sigma^2) || N(0, 1)) per dimension.
inline std::vector<double> gaussian_kl_per_dimension(const LatentStats& stats) {
  detail::require(stats.mu.size() == stats.log_var.size(), "mu and log_var lengths differ");
  std::vector<double> kl(stats.mu.size());
  for (std::size_t k = 0; k < kl.size(); ++k) {
    const double m = stats.mu[k];
    const double lv = stats.log_var[k];
    kl[k] = 0.5 * (m * m + std::exp(lv) - lv - 1.0);
  }
  return kl;
}

inline constexpr double kHalfLog2Pi = 0.91893853320467274178032973640562;

inline double log_normal_density(double z, double mu, double log_var) {
  const double d = z - mu;
  return -kHalfLog2Pi - 0.5 * log_var - 0.5 * d * d * std::exp(-log_var);
}

/// Weighted objective. The dVAE objective is the reconstruction term alone.
inline LossBreakdown total_objective(Variant variant, double reconstruction, double mi, double tc,
                                     double dim_kl, const LossWeights& weights,
                                     double gamma_now) {
  weights.validate();
  detail::require(std::isfinite(gamma_now) && gamma_now >= 0.0, "gamma must be finite and >= 0");
  LossBreakdown out;
  out.reconstruction_nll = reconstruction;
  if (variant == Variant::DVae) {
    out.total = reconstruction;
    return out;
  }
  out.mutual_information = mi;
  out.total_correlation = tc;
  out.dimension_wise_kl = dim_kl;
  out.total = reconstruction + weights.alpha * mi + weights.beta * tc + gamma_now * dim_kl;
  return out;
}

}  // namespace cpvae
