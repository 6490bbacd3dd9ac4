// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "cpvae/error.hpp"
#include "cpvae/spinsim/configuration.hpp"
#include "cpvae/spinsim/hamiltonian.hpp"

namespace cpvae {

/// Mean per-shot magnetization (1/N) sum_i x_i, optionally its absolute value per shot.
inline double magnetization(const ConfigBatch& batch, bool absolute = true) {
  detail::require(!batch.empty(), "magnetization of an empty batch is undefined");
  const std::size_t n = batch.n_sites();
  double total = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    long sum = 0;
    for (Spin s : batch.row(k)) sum += s;
    const double m = static_cast<double>(sum) / static_cast<double>(n);
    total += absolute ? std::abs(m) : m;
  }
  return total / static_cast<double>(batch.size());
}

/// Mean of x_i x_{i+d} over shots and sites. Periodic data wraps around; open data
/// uses only the N - d pairs inside the chain.
inline double two_point_correlator(const ConfigBatch& batch, std::size_t distance,
                                   Boundary boundary) {
  detail::require(!batch.empty(), "correlator of an empty batch is undefined");
  const std::size_t n = batch.n_sites();
  detail::require(distance >= 1 && distance < n, "correlator distance must satisfy 1 <= d < N");
  const std::size_t pairs = boundary == Boundary::Periodic ? n : n - distance;
  long sum = 0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto row = batch.row(k);
    for (std::size_t i = 0; i < pairs; ++i) sum += row[i] * row[(i + distance) % n];
  }
  return static_cast<double>(sum) / static_cast<double>(pairs * batch.size());
}

/// C(r) for r = 1 .. floor(N/2), open-chain pairs.
inline std::vector<double> correlation_function(const ConfigBatch& batch) {
  detail::require(!batch.empty(), "correlation function of an empty batch is undefined");
  const std::size_t n = batch.n_sites();
  std::vector<double> c;
  for (std::size_t r = 1; r <= n / 2 && r < n; ++r) {
    c.push_back(two_point_correlator(batch, r, Boundary::Open));
  }
  return c;
}

struct BetaFit {
  double beta = 0.0;
  double intercept = 0.0;
  /// Fewer than three positive C(r) values, or a negative fitted exponent.
  bool degenerate = false;
  std::size_t points_used = 0;
};

inline constexpr double kBetaNegativeTolerance = 1e-6;

/// Least-squares fit of log C(r) = -beta log r + c over the r with C(r) > 0, where
/// `correlations[r - 1]` holds C(r).
inline BetaFit fit_correlation_exponent(std::span<const double> correlations) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t k = 0; k < correlations.size(); ++k) {
    if (correlations[k] > 0.0 && std::isfinite(correlations[k])) {
      xs.push_back(std::log(static_cast<double>(k + 1)));
      ys.push_back(std::log(correlations[k]));
    }
  }
  BetaFit fit;
  fit.points_used = xs.size();
  if (xs.size() < 3) {
    fit.degenerate = true;
    return fit;
  }
  const double count = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= count;
  my /= count;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
  }
  const double slope = sxy / sxx;
  fit.beta = -slope;
  fit.intercept = my - slope * mx;
  if (fit.beta < -kBetaNegativeTolerance) {
    fit.beta = 0.0;
    fit.degenerate = true;
  }
  return fit;
}

inline BetaFit correlation_exponent_fit(const ConfigBatch& batch) {
  const auto c = correlation_function(batch);
  return fit_correlation_exponent(c);
}

inline double correlation_exponent_beta(const ConfigBatch& batch) {
  return correlation_exponent_fit(batch).beta;
}

/// Empirical <x_j x_i> for every j at fixed reference site i.
inline std::vector<double> anchored_correlators(const ConfigBatch& batch, std::size_t site) {
  detail::require(!batch.empty(), "correlators of an empty batch are undefined");
  const std::size_t n = batch.n_sites();
  detail::require(site < n, "reference site out of range");
  std::vector<long> sum(n, 0);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto row = batch.row(k);
    for (std::size_t j = 0; j < n; ++j) sum[j] += row[j] * row[site];
  }
  std::vector<double> c(n);
  for (std::size_t j = 0; j < n; ++j) {
    c[j] = static_cast<double>(sum[j]) / static_cast<double>(batch.size());
  }
  return c;
}

/// S(k, i) = (1/N) sum_j cos(2 pi k |j - i| / N) <x_j x_i>.
inline double structure_factor(const ConfigBatch& batch, double k, std::size_t site) {
  const auto c = anchored_correlators(batch, site);
  const double n = static_cast<double>(c.size());
  double s = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    const double dist = std::abs(static_cast<double>(j) - static_cast<double>(site));
    s += std::cos(2.0 * std::numbers::pi * k * dist / n) * c[j];
  }
  return s / n;
}

/// Shannon entropy (natural log) of the normalized DFT power spectrum.
inline double spectral_entropy(std::span<const Spin> x) {
  const std::size_t n = x.size();
  detail::require(n >= 2, "spectral entropy needs at least two sites");
  std::vector<double> power(n);
  double total = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    std::complex<double> acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>((p * j) % n) /
                           static_cast<double>(n);
      acc += static_cast<double>(x[j]) * std::polar(1.0, phase);
    }
    power[p] = std::norm(acc);
    total += power[p];
  }
  double s = 0.0;
  for (double pw : power) {
    const double q = pw / total;
    if (q > 1e-15) s -= q * std::log(q);
  }
  return std::max(s, 0.0);
}

inline double spectral_entropy(const SpinConfiguration& x) { return spectral_entropy(x.sites()); }

inline double mean_spectral_entropy(const ConfigBatch& batch) {
  detail::require(!batch.empty(), "spectral entropy of an empty batch is undefined");
  double s = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) s += spectral_entropy(batch.row(k));
  return s / static_cast<double>(batch.size());
}

inline double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  detail::require(a.size() == b.size() && a.size() >= 2, "pearson needs two equal series of >= 2");
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace cpvae
