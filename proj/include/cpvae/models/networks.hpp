// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "cpvae/autodiff/sequential.hpp"
#include "cpvae/models/config.hpp"

namespace cpvae {

/// Convolutional encoder: a shared trunk of circular convolutions followed by
/// global average pooling, then separate dense heads for mu and log sigma^2.
class Encoder {
 public:
  struct Pass {
    Tensor mu;
    Tensor log_var;
    TapeList trunk;
    TapeList mean;
    TapeList log_var_head;
  };

  Encoder() = default;
  explicit Encoder(const ModelConfig& c) {
    const std::size_t ch = c.conv_channels;
    trunk_.add(LayerSpec::conv1d(c.kernel_size, 1, ch), "encoder.conv0");
    trunk_.add(LayerSpec::activation(LayerKind::Relu), "encoder.relu0");
    trunk_.add(LayerSpec::conv1d(c.kernel_size, ch, ch), "encoder.conv1");
    trunk_.add(LayerSpec::activation(LayerKind::Relu), "encoder.relu1");
    trunk_.add(LayerSpec::activation(LayerKind::GlobalAveragePool), "encoder.pool");
    build_head(mean_, "encoder.mean", ch, c.head_width, c.latent_dim());
    build_head(log_var_, "encoder.log_var", ch, c.head_width, c.latent_dim());
  }

  /// `spins` is [B, N, 1] with entries +-1.
  Pass forward(const Tensor& spins) const {
    Pass pass;
    auto [features, trunk_tapes] = trunk_.forward(spins);
    auto [mu, mean_tapes] = mean_.forward(features);
    auto [lv, lv_tapes] = log_var_.forward(features);
    pass.mu = std::move(mu);
    pass.log_var = std::move(lv);
    pass.trunk = std::move(trunk_tapes);
    pass.mean = std::move(mean_tapes);
    pass.log_var_head = std::move(lv_tapes);
    return pass;
  }

  void backward(const Pass& pass, const Tensor& d_mu, const Tensor& d_log_var) {
    Tensor g = mean_.backward(pass.mean, d_mu);
    const Tensor g_lv = log_var_.backward(pass.log_var_head, d_log_var);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += g_lv[k];
    trunk_.backward(pass.trunk, g);
  }

  void record_branches(const Pass& pass, BranchSignature& sig) const {
    trunk_.record_branches(pass.trunk, sig);
    mean_.record_branches(pass.mean, sig);
    log_var_.record_branches(pass.log_var_head, sig);
  }

  void initialize(Rng& rng) {
    trunk_.initialize(rng);
    mean_.initialize(rng);
    log_var_.initialize(rng);
  }

  void collect_parameters(std::vector<Parameter*>& out) {
    trunk_.collect_parameters(out);
    mean_.collect_parameters(out);
    log_var_.collect_parameters(out);
  }

  std::vector<const Sequential*> parts() const { return {&trunk_, &mean_, &log_var_}; }

 private:
  static void build_head(Sequential& head, const std::string& name, std::size_t in,
                         std::size_t width, std::size_t out) {
    head.add(LayerSpec::dense(in, width), name + ".dense0");
    head.add(LayerSpec::activation(LayerKind::Relu), name + ".relu0");
    head.add(LayerSpec::dense(width, out), name + ".dense1");
  }

  Sequential trunk_;
  Sequential mean_;
  Sequential log_var_;
};

/// Stack of dense layers where the latent vector z is concatenated in front of the
/// input of every layer. With `masked` set the layers are triangular on the site
/// columns (inclusive degrees), and the site input is the right-shifted
/// configuration, so output i depends on z and x_<i only. Without `masked`, the
/// stack takes z alone.
class ContextStack {
 public:
  struct Pass {
    Tensor output;
    std::vector<Tape> tapes;
  };

  ContextStack() = default;
  ContextStack(std::size_t latent, std::size_t n_sites, std::size_t width, std::size_t hidden,
               bool masked, LayerKind output_activation, const std::string& name)
      : latent_(latent), n_sites_(n_sites), masked_(masked) {
    std::size_t in = masked ? n_sites : 0;
    for (std::size_t l = 0; l <= hidden; ++l) {
      const bool last = l == hidden;
      const std::size_t out = last ? n_sites : width;
      const LayerSpec spec = masked ? LayerSpec::masked(latent, latent + in, out, n_sites, false)
                                    : LayerSpec::dense(latent + in, out);
      layers_.emplace_back(spec, name + ".layer" + std::to_string(l));
      layers_.emplace_back(LayerSpec::activation(last ? output_activation : LayerKind::Selu),
                           name + ".act" + std::to_string(l));
      in = out;
    }
  }

  bool masked() const noexcept { return masked_; }
  std::size_t latent_dim() const noexcept { return latent_; }
  std::size_t n_sites() const noexcept { return n_sites_; }
  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  /// `z` is [B, latent]; `sites` is [B, N] (masked) and ignored otherwise.
  Pass forward(const Tensor& z, const Tensor* sites) const {
    const std::size_t batch = z.dim(0);
    Pass pass;
    pass.tapes.reserve(layers_.size());
    Tensor h;
    if (masked_) {
      detail::require(sites != nullptr && sites->rank() == 2 && sites->dim(0) == batch &&
                          sites->dim(1) == n_sites_,
                      "masked decoder needs a [B, N] site input");
      h = *sites;
    }
    for (std::size_t l = 0; l < layers_.size(); l += 2) {
      auto [pre, tape] = layers_[l].forward(concat(z, h));
      auto [act, act_tape] = layers_[l + 1].forward(pre);
      pass.tapes.push_back(std::move(tape));
      pass.tapes.push_back(std::move(act_tape));
      h = std::move(act);
    }
    pass.output = std::move(h);
    return pass;
  }

  /// Returns the cotangent with respect to z.
  Tensor backward(const Pass& pass, const Tensor& d_output) {
    const std::size_t batch = d_output.dim(0);
    Tensor dz({batch, latent_});
    Tensor g = d_output;
    for (std::size_t l = layers_.size(); l >= 2; l -= 2) {
      g = layers_[l - 1].backward(pass.tapes[l - 1], g);
      const Tensor g_in = layers_[l - 2].backward(pass.tapes[l - 2], g);
      const std::size_t width = g_in.dim(1) - latent_;
      auto gm = g_in.matrix();
      dz.matrix() += gm.leftCols(static_cast<Eigen::Index>(latent_));
      if (width == 0) break;
      g = Tensor::from_matrix(gm.rightCols(static_cast<Eigen::Index>(width)));
    }
    return dz;
  }

  void record_branches(const Pass& pass, BranchSignature& sig) const {
    for (std::size_t l = 0; l < layers_.size() && l < pass.tapes.size(); ++l) {
      sig.add(layers_[l].spec, pass.tapes[l]);
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
  static Tensor concat(const Tensor& z, const Tensor& h) {
    if (h.size() == 0) return z;
    Tensor out({z.dim(0), z.dim(1) + h.dim(1)});
    auto m = out.matrix();
    m.leftCols(z.matrix().cols()) = z.matrix();
    m.rightCols(h.matrix().cols()) = h.matrix();
    return out;
  }

  std::size_t latent_ = 0;
  std::size_t n_sites_ = 0;
  bool masked_ = false;
  std::vector<Layer> layers_;
};

}  // namespace cpvae
