// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "cpvae/autodiff/checkpoint.hpp"
#include "cpvae/error.hpp"
#include "cpvae/models/config.hpp"
#include "cpvae/models/latent.hpp"
#include "cpvae/models/networks.hpp"
#include "cpvae/random.hpp"
#include "cpvae/spinsim/configuration.hpp"

namespace cpvae {

/// Encoder plus either the autoregressive Bernoulli decoder (cpVAE) or the
/// deterministic tanh decoder (dVAE).
class Vae {
 public:
  Vae() = default;
  explicit Vae(const ModelConfig& config) : config_(config) {
    config_.validate();
    encoder_ = Encoder(config_);
    const bool masked = config_.variant == Variant::CpVae;
    decoder_ = ContextStack(config_.latent_dim(), config_.n_sites, config_.decoder_width,
                            config_.decoder_hidden_layers, masked,
                            masked ? LayerKind::Sigmoid : LayerKind::Tanh, "decoder");
  }
  Vae(const ModelConfig& config, std::uint64_t seed) : Vae(config) { initialize(seed); }

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t n_sites() const noexcept { return config_.n_sites; }
  std::size_t latent_dim() const noexcept { return config_.latent_dim(); }
  bool autoregressive() const noexcept { return config_.variant == Variant::CpVae; }

  Encoder& encoder() noexcept { return encoder_; }
  const Encoder& encoder() const noexcept { return encoder_; }
  ContextStack& decoder() noexcept { return decoder_; }
  const ContextStack& decoder() const noexcept { return decoder_; }

  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    encoder_.initialize(rng);
    decoder_.initialize(rng);
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    encoder_.collect_parameters(out);
    decoder_.collect_parameters(out);
    return out;
  }

  std::vector<const Parameter*> parameters() const {
    auto mut = const_cast<Vae*>(this)->parameters();
    return {mut.begin(), mut.end()};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Parameter* p : parameters()) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (Parameter* p : parameters()) p->zero_grad();
  }

  void set_all_parameters(double v) {
    for (Parameter* p : parameters()) p->value.fill(v);
  }

 private:
  ModelConfig config_;
  Encoder encoder_;
  ContextStack decoder_;
};

/// Rows of `batch` as a [B, N, 1] tensor of +-1 values.
inline Tensor spins_tensor(const ConfigBatch& batch) {
  Tensor t({batch.size(), batch.n_sites(), 1});
  const auto src = batch.data();
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = src[k];
  return t;
}

/// Teacher-forcing input (0, x_0, ..., x_{N-2}) for every row.
inline Tensor shifted_sites(const ConfigBatch& batch) {
  const std::size_t n = batch.n_sites();
  Tensor t({batch.size(), n});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto row = batch.row(b);
    for (std::size_t i = 1; i < n; ++i) t[b * n + i] = row[i - 1];
  }
  return t;
}

inline Tensor latent_tensor(const std::vector<double>& z) {
  return Tensor({1, z.size()}, z);
}

namespace detail {

inline void require_length(const Vae& model, std::size_t n) {
  require(n == model.n_sites(), "configuration length " + std::to_string(n) +
                                    " does not match model n_sites " +
                                    std::to_string(model.n_sites()));
}

inline void require_latent(const Vae& model, std::size_t d) {
  require(d == model.latent_dim(), "latent length " + std::to_string(d) +
                                       " does not match model latent dimension " +
                                       std::to_string(model.latent_dim()));
}

}  // namespace detail

/// Batched encoder: returns (mu, log_var) as [B, d] matrices.
inline std::pair<RowMatrix, RowMatrix> encode_batch(const Vae& model, const ConfigBatch& batch) {
  detail::require_length(model, batch.n_sites());
  auto pass = model.encoder().forward(spins_tensor(batch));
  return {RowMatrix(pass.mu.matrix()), RowMatrix(pass.log_var.matrix())};
}

inline LatentStats encode(const Vae& model, const SpinConfiguration& x) {
  detail::require_length(model, x.size());
  ConfigBatch batch(x.size());
  batch.push_back(x);
  auto pass = model.encoder().forward(spins_tensor(batch));
  return {{pass.mu.values().begin(), pass.mu.values().end()},
          {pass.log_var.values().begin(), pass.log_var.values().end()}};
}

/// Teacher-forced conditionals for every row; unclamped sigmoid outputs, [B, N].
inline RowMatrix decode_conditionals_batch(const Vae& model, const RowMatrix& z,
                                           const ConfigBatch& batch) {
  if (!model.autoregressive()) {
    throw UnsupportedOperation("decode_conditionals requires the autoregressive (cpvae) variant");
  }
  detail::require_length(model, batch.n_sites());
  detail::require(static_cast<std::size_t>(z.rows()) == batch.size(),
                  "latent batch and configuration batch sizes differ");
  detail::require_latent(model, static_cast<std::size_t>(z.cols()));
  const Tensor sites = shifted_sites(batch);
  return model.decoder().forward(Tensor::from_matrix(z), &sites).output.matrix();
}

inline ConditionalProbabilities decode_conditionals(const Vae& model, const LatentSample& z,
                                                    const SpinConfiguration& x) {
  if (!model.autoregressive()) {
    throw UnsupportedOperation("decode_conditionals requires the autoregressive (cpvae) variant");
  }
  detail::require_length(model, x.size());
  detail::require_latent(model, z.z.size());
  ConfigBatch batch(x.size());
  batch.push_back(x);
  const Tensor sites = shifted_sites(batch);
  const auto pass = model.decoder().forward(latent_tensor(z.z), &sites);
  ConditionalProbabilities out;
  out.p.reserve(x.size());
  for (double p : pass.output.values()) out.p.push_back(clamp_probability(p));
  return out;
}

/// Ancestral sampling, one row per latent row of `z` ([B, d]). Site i of every row
/// is drawn from Bernoulli(p_i) after sites < i are fixed.
inline ConfigBatch autoregressive_sample_batch(const Vae& model, const RowMatrix& z, Rng& rng) {
  if (!model.autoregressive()) {
    throw UnsupportedOperation("autoregressive sampling requires the cpvae variant");
  }
  detail::require_latent(model, static_cast<std::size_t>(z.cols()));
  const std::size_t n = model.n_sites();
  const auto batch = static_cast<std::size_t>(z.rows());
  const Tensor zt = Tensor::from_matrix(z);
  Tensor sites({batch, n});
  std::vector<Spin> spins(batch * n, Spin{-1});
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto pass = model.decoder().forward(zt, &sites);
    for (std::size_t b = 0; b < batch; ++b) {
      const Spin s = uniform(rng) < pass.output[b * n + i] ? Spin{1} : Spin{-1};
      spins[b * n + i] = s;
      if (i + 1 < n) sites[b * n + i + 1] = s;
    }
  }
  return ConfigBatch(n, std::move(spins));
}

inline ConfigBatch autoregressive_sample(const Vae& model, const LatentSample& z,
                                         std::size_t count, std::uint64_t seed) {
  if (!model.autoregressive()) {
    throw UnsupportedOperation("autoregressive sampling requires the cpvae variant");
  }
  detail::require_latent(model, z.z.size());
  Rng rng(seed);
  RowMatrix zs(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(z.z.size()));
  for (Eigen::Index r = 0; r < zs.rows(); ++r) {
    for (Eigen::Index c = 0; c < zs.cols(); ++c) zs(r, c) = z.z[static_cast<std::size_t>(c)];
  }
  constexpr std::size_t kChunk = 4096;
  ConfigBatch out(model.n_sites());
  out.reserve(count);
  for (std::size_t start = 0; start < count; start += kChunk) {
    const auto rows = static_cast<Eigen::Index>(std::min(kChunk, count - start));
    const RowMatrix chunk = zs.middleRows(static_cast<Eigen::Index>(start), rows);
    const ConfigBatch part = autoregressive_sample_batch(model, chunk, rng);
    out.append(part);
  }
  return out;
}

inline RowMatrix dvae_decode_batch(const Vae& model, const RowMatrix& z) {
  if (model.autoregressive()) {
    throw UnsupportedOperation("dvae_decode requires the dvae variant");
  }
  detail::require_latent(model, static_cast<std::size_t>(z.cols()));
  return model.decoder().forward(Tensor::from_matrix(z), nullptr).output.matrix();
}

inline std::vector<double> dvae_decode(const Vae& model, const LatentSample& z) {
  if (model.autoregressive()) {
    throw UnsupportedOperation("dvae_decode requires the dvae variant");
  }
  detail::require_latent(model, z.z.size());
  const auto pass = model.decoder().forward(latent_tensor(z.z), nullptr);
  return {pass.output.values().begin(), pass.output.values().end()};
}

/// Every layer in evaluation order: encoder trunk, mean head, log-variance head, decoder.
inline std::vector<LayerSpec> layer_specs(const Vae& model) {
  std::vector<LayerSpec> out;
  for (const Sequential* part : model.encoder().parts()) {
    for (const auto& layer : part->layers()) out.push_back(layer.spec);
  }
  for (const auto& layer : model.decoder().layers()) out.push_back(layer.spec);
  return out;
}

inline void save_model(const Vae& model, const std::filesystem::path& manifest_path,
                       nlohmann::json extra = nlohmann::json::object()) {
  extra["kind"] = "cpvae_model";
  extra["model_config"] = to_json(model.config());
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& spec : layer_specs(model)) layers.push_back(layer_spec_to_json(spec));
  extra["layers"] = std::move(layers);
  write_checkpoint(manifest_path, std::move(extra), model.parameters());
}

inline Vae load_model(const std::filesystem::path& manifest_path) {
  const auto manifest = read_checkpoint_manifest(manifest_path);
  detail::require(manifest.contains("model_config"), "checkpoint has no model_config");
  Vae model(model_config_from_json(manifest.at("model_config")));
  if (manifest.contains("layers")) {
    const auto specs = layer_specs(model);
    const auto& stored = manifest.at("layers");
    detail::require(stored.size() == specs.size(), "checkpoint layer count mismatch");
    for (std::size_t k = 0; k < specs.size(); ++k) {
      detail::require(layer_spec_from_json(stored[k]) == specs[k],
                      "checkpoint layer " + std::to_string(k) + " does not match model_config");
    }
  }
  load_checkpoint_parameters(manifest_path, manifest, model.parameters());
  return model;
}

}  // namespace cpvae
