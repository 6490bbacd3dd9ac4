// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cpvae/autodiff/layers.hpp"

namespace cpvae {

/// Order-sensitive fingerprint of every non-differentiable branch taken during a
/// forward pass (relu/selu sign, probability clamps). Two evaluations with equal
/// signatures lie on the same smooth piece of the loss.
class BranchSignature {
 public:
  void mix(bool bit) noexcept {
    hash_ ^= bit ? 0x9E3779B97F4A7C15ULL : 0x7F4A7C159E3779B9ULL;
    hash_ *= 0x100000001B3ULL;
    hash_ ^= hash_ >> 29U;
  }

  void add(const LayerSpec& spec, const Tape& tape) noexcept {
    if (spec.kind != LayerKind::Relu && spec.kind != LayerKind::Selu) return;
    for (double x : tape.input.values()) mix(x > 0.0);
  }

  std::uint64_t value() const noexcept { return hash_; }

 private:
  std::uint64_t hash_ = 1469598103934665603ULL;
};

using TapeList = std::vector<Tape>;

class Sequential {
 public:
  Sequential() = default;

  void add(const LayerSpec& spec, const std::string& name) { layers_.emplace_back(spec, name); }

  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  std::pair<Tensor, TapeList> forward(const Tensor& input) const {
    TapeList tapes;
    tapes.reserve(layers_.size());
    Tensor x = input;
    for (const auto& layer : layers_) {
      auto [y, tape] = layer.forward(x);
      tapes.push_back(std::move(tape));
      x = std::move(y);
    }
    return {std::move(x), std::move(tapes)};
  }

  Tensor backward(const TapeList& tapes, const Tensor& cotangent) {
    detail::require(tapes.size() == layers_.size(), "tape list does not match the network");
    Tensor g = cotangent;
    for (std::size_t k = layers_.size(); k-- > 0;) g = layers_[k].backward(tapes[k], g);
    return g;
  }

  void record_branches(const TapeList& tapes, BranchSignature& signature) const {
    for (std::size_t k = 0; k < layers_.size() && k < tapes.size(); ++k) {
      signature.add(layers_[k].spec, tapes[k]);
    }
  }

  void initialize(Rng& rng) {
    for (auto& layer : layers_) cpvae::initialize(layer.spec, layer.params, rng);
  }

  void collect_parameters(std::vector<Parameter*>& out) {
    for (auto& layer : layers_) {
      for (auto& p : layer.params) out.push_back(&p);
    }
  }

 private:
  std::vector<Layer> layers_;
};

}  // namespace cpvae
