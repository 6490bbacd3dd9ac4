// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include "cpvae/error.hpp"
#include "json.hpp"

namespace cpvae {

enum class Variant { CpVae, DVae };

inline std::string to_string(Variant v) { return v == Variant::CpVae ? "cpvae" : "dvae"; }

inline Variant variant_from_string(const std::string& s) {
  if (s == "cpvae") return Variant::CpVae;
  if (s == "dvae") return Variant::DVae;
  throw InvalidInput("unknown variant '" + s + "' (expected cpvae or dvae)");
}

/// Architecture hyperparameters. Defaults follow the convolutional encoder
/// (two k=3 circular convs with 32 channels, 64-wide heads, 5 latents) and the
/// 3 x 80 selu decoder.
struct ModelConfig {
  std::size_t n_sites = 10;
  std::size_t d_latent = 5;
  std::size_t conv_channels = 32;
  std::size_t kernel_size = 3;
  std::size_t head_width = 64;
  std::size_t decoder_hidden_layers = 3;
  std::size_t decoder_width = 80;
  Variant variant = Variant::CpVae;
  std::size_t dvae_latent_dim = 1;

  std::size_t latent_dim() const {
    return variant == Variant::CpVae ? d_latent : dvae_latent_dim;
  }

  void validate() const {
    detail::require(n_sites >= 1, "n_sites must be >= 1");
    detail::require(latent_dim() >= 1, "latent dimension must be >= 1");
    detail::require(conv_channels >= 1 && head_width >= 1, "encoder widths must be >= 1");
    detail::require(kernel_size % 2 == 1, "kernel_size must be odd");
    detail::require(decoder_hidden_layers >= 1, "decoder needs at least one hidden layer");
    detail::require(variant == Variant::DVae || decoder_width >= n_sites,
                    "masked decoder width must be >= n_sites");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"n_sites", c.n_sites},
          {"d_latent", c.d_latent},
          {"conv_channels", c.conv_channels},
          {"kernel_size", c.kernel_size},
          {"head_width", c.head_width},
          {"decoder_hidden_layers", c.decoder_hidden_layers},
          {"decoder_width", c.decoder_width},
          {"variant", to_string(c.variant)},
          {"dvae_latent_dim", c.dvae_latent_dim}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n_sites = j.value("n_sites", c.n_sites);
  c.d_latent = j.value("d_latent", c.d_latent);
  c.conv_channels = j.value("conv_channels", c.conv_channels);
  c.kernel_size = j.value("kernel_size", c.kernel_size);
  c.head_width = j.value("head_width", c.head_width);
  c.decoder_hidden_layers = j.value("decoder_hidden_layers", c.decoder_hidden_layers);
  c.decoder_width = j.value("decoder_width", c.decoder_width);
  c.variant = variant_from_string(j.value("variant", std::string("cpvae")));
  c.dvae_latent_dim = j.value("dvae_latent_dim", c.dvae_latent_dim);
  c.validate();
  return c;
}

}  // namespace cpvae
