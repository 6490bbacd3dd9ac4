// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpvae/error.hpp"

namespace cpvae {

using Spin = std::int8_t;

/// One projective measurement outcome: N entries, each exactly +1 or -1.
class SpinConfiguration {
 public:
  SpinConfiguration() = default;
  explicit SpinConfiguration(std::vector<Spin> sites) : sites_(std::move(sites)) {
    for (Spin s : sites_) detail::require(s == 1 || s == -1, "spin entries must be +1 or -1");
  }

  std::size_t size() const noexcept { return sites_.size(); }
  Spin operator[](std::size_t i) const { return sites_[i]; }
  std::span<const Spin> sites() const noexcept { return sites_; }

  friend bool operator==(const SpinConfiguration&, const SpinConfiguration&) = default;

 private:
  std::vector<Spin> sites_;
};

/// Contiguous batch of equal-length spin configurations (row-major, one row per shot).
class ConfigBatch {
 public:
  ConfigBatch() = default;
  explicit ConfigBatch(std::size_t n_sites) : n_sites_(n_sites) {}
  ConfigBatch(std::size_t n_sites, std::vector<Spin> spins)
      : n_sites_(n_sites), spins_(std::move(spins)) {
    detail::require(n_sites_ > 0 && spins_.size() % n_sites_ == 0,
                    "batch storage is not a multiple of n_sites");
    for (Spin s : spins_) detail::require(s == 1 || s == -1, "spin entries must be +1 or -1");
  }

  std::size_t n_sites() const noexcept { return n_sites_; }
  std::size_t size() const noexcept { return n_sites_ == 0 ? 0 : spins_.size() / n_sites_; }
  bool empty() const noexcept { return spins_.empty(); }

  std::span<const Spin> row(std::size_t k) const {
    return {spins_.data() + k * n_sites_, n_sites_};
  }
  std::span<Spin> row(std::size_t k) { return {spins_.data() + k * n_sites_, n_sites_}; }
  Spin at(std::size_t k, std::size_t i) const { return spins_[k * n_sites_ + i]; }

  std::span<const Spin> data() const noexcept { return spins_; }

  void reserve(std::size_t rows) { spins_.reserve(rows * n_sites_); }

  void push_back(std::span<const Spin> config) {
    detail::require(config.size() == n_sites_, "configuration length does not match batch");
    for (Spin s : config) detail::require(s == 1 || s == -1, "spin entries must be +1 or -1");
    spins_.insert(spins_.end(), config.begin(), config.end());
  }
  void push_back(const SpinConfiguration& config) { push_back(config.sites()); }

  void append(const ConfigBatch& other) {
    detail::require(other.n_sites_ == n_sites_, "cannot append batches of different length");
    spins_.insert(spins_.end(), other.spins_.begin(), other.spins_.end());
  }

  SpinConfiguration configuration(std::size_t k) const {
    auto r = row(k);
    return SpinConfiguration(std::vector<Spin>(r.begin(), r.end()));
  }

  friend bool operator==(const ConfigBatch&, const ConfigBatch&) = default;

 private:
  std::size_t n_sites_ = 0;
  std::vector<Spin> spins_;
};

/// '1' encodes +1 and '0' encodes -1, site 0 leftmost.
inline std::string to_bitstring(std::span<const Spin> config) {
  std::string out(config.size(), '0');
  for (std::size_t i = 0; i < config.size(); ++i) out[i] = config[i] > 0 ? '1' : '0';
  return out;
}

inline std::vector<Spin> from_bitstring(std::string_view bits) {
  std::vector<Spin> out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      out[i] = 1;
    } else if (bits[i] == '0') {
      out[i] = -1;
    } else {
      throw InvalidInput("bitstring contains a character other than '0' or '1'");
    }
  }
  return out;
}

}  // namespace cpvae
