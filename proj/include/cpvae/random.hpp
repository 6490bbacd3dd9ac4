// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace cpvae {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive statistically independent child seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30U)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27U)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31U);
}

/// Seed splitting rule: child k of `seed` is splitmix64(splitmix64(seed) ^ k').
/// `stream` separates unrelated consumers (e.g. solver start vector vs. sampler).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index,
                                    std::uint64_t stream = 0) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(index * 0x100000001B3ULL + stream));
}

}  // namespace cpvae
