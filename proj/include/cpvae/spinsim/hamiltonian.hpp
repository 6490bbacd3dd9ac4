// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cpvae/error.hpp"

namespace cpvae {

enum class Model { NnnTfim, LrTfim };
enum class Boundary { Periodic, Open };

inline constexpr std::size_t kMaxSites = 20;

inline std::string to_string(Model m) { return m == Model::NnnTfim ? "nnn_tfim" : "lr_tfim"; }
inline std::string to_string(Boundary b) { return b == Boundary::Periodic ? "periodic" : "open"; }

inline Model model_from_string(const std::string& s) {
  if (s == "nnn_tfim") return Model::NnnTfim;
  if (s == "lr_tfim") return Model::LrTfim;
  throw InvalidInput("unknown model '" + s + "' (expected nnn_tfim or lr_tfim)");
}

inline Boundary boundary_from_string(const std::string& s) {
  if (s == "periodic") return Boundary::Periodic;
  if (s == "open") return Boundary::Open;
  throw InvalidInput("unknown boundary '" + s + "' (expected periodic or open)");
}

/// Transverse-field Ising chain in the Z basis.
///
///   NNN_TFIM (periodic): H = sum_i [ -Z_i Z_{i+1} + j2 Z_i Z_{i+2} + h X_i ]
///   LR_TFIM  (open):     H = sum_i h X_i - sum_{i<j} Z_i Z_j / |i-j|^alpha
///
/// Basis index convention: site k is bit k (site 0 least significant);
/// a set bit is spin +1, a cleared bit is spin -1.
struct HamiltonianSpec {
  Model model = Model::NnnTfim;
  std::size_t n_sites = 2;
  Boundary boundary = Boundary::Periodic;
  double j2 = 0.0;
  double h = 0.0;
  double alpha = 1.0;

  static HamiltonianSpec nnn(std::size_t n, double j2, double h) {
    return {Model::NnnTfim, n, Boundary::Periodic, j2, h, 1.0};
  }
  static HamiltonianSpec lr(std::size_t n, double alpha, double h) {
    return {Model::LrTfim, n, Boundary::Open, 0.0, h, alpha};
  }

  std::size_t dimension() const { return std::size_t{1} << n_sites; }

  void validate() const {
    detail::require(n_sites >= 1 && n_sites <= kMaxSites, "n_sites must lie in [1, 20]");
    detail::require(std::isfinite(h) && h >= 0.0, "transverse field h must be finite and >= 0");
    if (model == Model::NnnTfim) {
      detail::require(boundary == Boundary::Periodic, "NNN_TFIM requires periodic boundary");
      detail::require(std::isfinite(j2) && j2 >= 0.0 && j2 <= 1.0, "j2 must lie in [0, 1]");
      detail::require(!(j2 > 0.0 && n_sites < 3), "NNN_TFIM with j2 > 0 requires n_sites >= 3");
    } else {
      detail::require(boundary == Boundary::Open, "LR_TFIM requires open boundary");
      detail::require(std::isfinite(alpha) && alpha > 0.0, "alpha must be finite and > 0");
    }
  }
};

/// Z-Z bond with coupling coefficient; contributes coefficient * z_a * z_b to the diagonal.
struct Bond {
  std::size_t a;
  std::size_t b;
  double coefficient;
};

/// Diagonal bond list for a validated spec.
inline std::vector<Bond> bonds(const HamiltonianSpec& spec) {
  std::vector<Bond> out;
  const std::size_t n = spec.n_sites;
  if (spec.model == Model::NnnTfim) {
    if (n >= 2) {
      for (std::size_t i = 0; i < n; ++i) out.push_back({i, (i + 1) % n, -1.0});
    }
    if (n >= 3 && spec.j2 != 0.0) {
      for (std::size_t i = 0; i < n; ++i) out.push_back({i, (i + 2) % n, spec.j2});
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        out.push_back({i, j, -1.0 / std::pow(static_cast<double>(j - i), spec.alpha)});
      }
    }
  }
  return out;
}

/// Matrix-free Hamiltonian: cached diagonal plus single-bit-flip field action.
class SpinChainOperator {
 public:
  explicit SpinChainOperator(const HamiltonianSpec& spec) : spec_(spec) {
    spec_.validate();
    const std::size_t dim = spec_.dimension();
    diagonal_.assign(dim, 0.0);
    const auto bond_list = bonds(spec_);
    for (std::size_t s = 0; s < dim; ++s) {
      double e = 0.0;
      for (const Bond& bond : bond_list) {
        const bool same = ((s >> bond.a) & 1U) == ((s >> bond.b) & 1U);
        e += same ? bond.coefficient : -bond.coefficient;
      }
      diagonal_[s] = e;
    }
  }

  const HamiltonianSpec& spec() const noexcept { return spec_; }
  std::size_t dimension() const noexcept { return diagonal_.size(); }
  std::span<const double> diagonal() const noexcept { return diagonal_; }

  void apply(std::span<const double> v, std::span<double> out) const {
    const std::size_t dim = dimension();
    detail::require(v.size() == dim && out.size() == dim,
                    "vector length must equal 2^n_sites");
    const double h = spec_.h;
    const std::size_t n = spec_.n_sites;
    for (std::size_t s = 0; s < dim; ++s) {
      double acc = diagonal_[s] * v[s];
      if (h != 0.0) {
        double flips = 0.0;
        for (std::size_t k = 0; k < n; ++k) flips += v[s ^ (std::size_t{1} << k)];
        acc += h * flips;
      }
      out[s] = acc;
    }
  }

 private:
  HamiltonianSpec spec_;
  std::vector<double> diagonal_;
};

inline std::vector<double> apply_hamiltonian(const HamiltonianSpec& spec,
                                             std::span<const double> v) {
  spec.validate();
  detail::require(v.size() == spec.dimension(), "vector length must equal 2^n_sites");
  SpinChainOperator op(spec);
  std::vector<double> out(v.size());
  op.apply(v, out);
  return out;
}

}  // namespace cpvae
