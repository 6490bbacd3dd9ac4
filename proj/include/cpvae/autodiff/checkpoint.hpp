// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "cpvae/autodiff/layers.hpp"
#include "cpvae/autodiff/tensor.hpp"
#include "cpvae/error.hpp"
#include "cpvae/io.hpp"
#include "json.hpp"

namespace cpvae {

inline constexpr int kCheckpointFormatVersion = 1;

inline nlohmann::json layer_spec_to_json(const LayerSpec& spec) {
  nlohmann::json j;
  j["kind"] = to_string(spec.kind);
  switch (spec.kind) {
    case LayerKind::Dense:
      j["in_features"] = spec.in_features;
      j["out_features"] = spec.out_features;
      break;
    case LayerKind::MaskedDenseTriangular:
      j["in_features"] = spec.in_features;
      j["out_features"] = spec.out_features;
      j["n_sites"] = spec.n_sites;
      j["context"] = spec.context;
      j["strict"] = spec.strict;
      break;
    case LayerKind::CircularConv1d:
      j["kernel_size"] = spec.kernel_size;
      j["in_channels"] = spec.in_channels;
      j["out_channels"] = spec.out_channels;
      break;
    default:
      break;
  }
  return j;
}

inline LayerSpec layer_spec_from_json(const nlohmann::json& j) {
  LayerSpec spec;
  spec.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  spec.in_features = j.value("in_features", std::size_t{0});
  spec.out_features = j.value("out_features", std::size_t{0});
  spec.kernel_size = j.value("kernel_size", std::size_t{0});
  spec.in_channels = j.value("in_channels", std::size_t{0});
  spec.out_channels = j.value("out_channels", std::size_t{0});
  spec.n_sites = j.value("n_sites", std::size_t{0});
  spec.context = j.value("context", std::size_t{0});
  spec.strict = j.value("strict", true);
  return spec;
}

namespace detail {

inline void append_le_f64(std::string& blob, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  char bytes[8];
  std::memcpy(bytes, &bits, 8);
  blob.append(bytes, 8);
}

inline double read_le_f64(const char* p) {
  std::uint64_t bits;
  std::memcpy(&bits, p, 8);
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace detail

/// Checkpoints are a JSON manifest (`<stem>.json`) next to a flat little-endian
/// float64 blob (`<stem>.bin`) holding every parameter in manifest order.
inline std::filesystem::path checkpoint_blob_path(const std::filesystem::path& manifest_path) {
  auto blob = manifest_path;
  blob.replace_extension(".bin");
  return blob;
}

/// Writes `manifest` (augmented with the parameter table) and the blob.
inline void write_checkpoint(const std::filesystem::path& manifest_path, nlohmann::json manifest,
                             const std::vector<const Parameter*>& params) {
  std::string blob;
  nlohmann::json table = nlohmann::json::array();
  std::size_t offset = 0;
  for (const Parameter* p : params) {
    table.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"offset", offset}});
    for (double v : p->value.values()) detail::append_le_f64(blob, v);
    offset += p->value.size();
  }
  const auto blob_path = checkpoint_blob_path(manifest_path);
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["parameters"] = table;
  manifest["blob"] = blob_path.filename().string();
  manifest["blob_bytes"] = blob.size();
  manifest["dtype"] = "float64-le";
  io::atomic_write(blob_path, blob, true);
  io::atomic_write(manifest_path, manifest.dump(2) + "\n");
}

inline nlohmann::json read_checkpoint_manifest(const std::filesystem::path& manifest_path) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("checkpoint manifest is not valid JSON: " + std::string(e.what()));
  }
  detail::require(manifest.value("format_version", -1) == kCheckpointFormatVersion,
                  "unsupported checkpoint format_version");
  return manifest;
}

/// Loads blob values into `params`, which must match the manifest table by name and shape.
inline void load_checkpoint_parameters(const std::filesystem::path& manifest_path,
                                       const nlohmann::json& manifest,
                                       const std::vector<Parameter*>& params) {
  const auto blob_path = manifest_path.parent_path() / manifest.at("blob").get<std::string>();
  const std::string blob = io::read_file(blob_path, true);
  detail::require(blob.size() == manifest.at("blob_bytes").get<std::size_t>(),
                  "checkpoint blob size does not match manifest");
  const auto& table = manifest.at("parameters");
  detail::require(table.size() == params.size(), "checkpoint parameter count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& entry = table[k];
    Parameter& p = *params[k];
    detail::require(entry.at("name").get<std::string>() == p.name,
                    "checkpoint parameter order mismatch at " + p.name);
    detail::require(entry.at("shape").get<Shape>() == p.value.shape(),
                    "checkpoint shape mismatch for " + p.name);
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    detail::require((offset + p.value.size()) * 8 <= blob.size(), "checkpoint blob truncated");
    for (std::size_t e = 0; e < p.value.size(); ++e) {
      p.value[e] = detail::read_le_f64(blob.data() + (offset + e) * 8);
    }
    p.zero_grad();
  }
}

}  // namespace cpvae
