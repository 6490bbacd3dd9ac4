// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "cpvae/error.hpp"
#include "cpvae/io.hpp"
#include "cpvae/spinsim/dataset.hpp"
#include "json.hpp"

namespace cpvae {

inline constexpr int kDatasetFormatVersion = 1;

namespace detail {

inline std::size_t axis_index(const Axis& axis, double value) {
  for (std::size_t k = 0; k < axis.values.size(); ++k) {
    if (axis.values[k] == value) return k;
  }
  for (std::size_t k = 0; k < axis.values.size(); ++k) {
    if (std::abs(axis.values[k] - value) <= 1e-12 * std::max(1.0, std::abs(value))) return k;
  }
  throw InvalidInput("record value " + std::to_string(value) + " is not on axis " + axis.name);
}

}  // namespace detail

/// Newline-delimited dataset: one JSON header line, then one JSON record per grid point
/// {"axis1": v1, "axis2": v2, "samples": ["0110...", ...]}.
inline nlohmann::json dataset_header(const GridDataset& ds) {
  nlohmann::json header;
  header["kind"] = "grid_dataset";
  header["format_version"] = kDatasetFormatVersion;
  header["model"] = ds.source == DatasetSource::Snapshots ? std::string("rydberg_snapshots")
                                                          : to_string(ds.spec_template.model);
  header["n_sites"] = ds.spec_template.n_sites;
  header["boundary"] = to_string(ds.spec_template.boundary);
  header["axes"] = {{"axis1", {{"name", ds.axis1.name}, {"values", ds.axis1.values}}},
                    {"axis2", {{"name", ds.axis2.name}, {"values", ds.axis2.values}}}};
  header["fixed"] = {{"j2", ds.spec_template.j2},
                     {"h", ds.spec_template.h},
                     {"alpha", ds.spec_template.alpha}};
  header["samples_per_point"] = ds.samples_per_point;
  header["seed"] = ds.seed;
  return header;
}

inline std::string serialize_dataset(const GridDataset& ds) {
  std::string out = dataset_header(ds).dump();
  out += '\n';
  for (const auto& rec : ds.records) {
    nlohmann::json samples = nlohmann::json::array();
    for (std::size_t k = 0; k < rec.samples.size(); ++k) {
      samples.push_back(to_bitstring(rec.samples.row(k)));
    }
    nlohmann::json line;
    line["axis1"] = rec.axis1;
    line["axis2"] = rec.axis2;
    line["samples"] = std::move(samples);
    out += line.dump();
    out += '\n';
  }
  return out;
}

inline GridDataset parse_dataset(const std::string& text) {
  const auto lines = io::split_lines(text);
  detail::require(!lines.empty(), "dataset file is empty");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(lines[0]);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("dataset header is not valid JSON: ") + e.what());
  }
  detail::require(header.value("kind", "") == "grid_dataset", "not a grid dataset file");
  detail::require(header.value("format_version", -1) == kDatasetFormatVersion,
                  "unsupported dataset format_version");

  GridDataset ds;
  const std::string model = header.at("model").get<std::string>();
  if (model == "rydberg_snapshots") {
    ds.source = DatasetSource::Snapshots;
    ds.spec_template.model = Model::LrTfim;
  } else {
    ds.source = DatasetSource::Hamiltonian;
    ds.spec_template.model = model_from_string(model);
  }
  ds.spec_template.n_sites = header.at("n_sites").get<std::size_t>();
  ds.spec_template.boundary = boundary_from_string(header.at("boundary").get<std::string>());
  const auto& fixed = header.at("fixed");
  ds.spec_template.j2 = fixed.at("j2").get<double>();
  ds.spec_template.h = fixed.at("h").get<double>();
  ds.spec_template.alpha = fixed.at("alpha").get<double>();
  const auto& axes = header.at("axes");
  ds.axis1 = {axes.at("axis1").at("name").get<std::string>(),
              axes.at("axis1").at("values").get<std::vector<double>>()};
  ds.axis2 = {axes.at("axis2").at("name").get<std::string>(),
              axes.at("axis2").at("values").get<std::vector<double>>()};
  ds.samples_per_point = header.at("samples_per_point").get<std::size_t>();
  ds.seed = header.at("seed").get<std::uint64_t>();

  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(lines[ln]);
      GridPoint point;
      point.axis1 = rec.at("axis1").get<double>();
      point.axis2 = rec.at("axis2").get<double>();
      point.index1 = detail::axis_index(ds.axis1, point.axis1);
      point.index2 = detail::axis_index(ds.axis2, point.axis2);
      point.samples = ConfigBatch(ds.spec_template.n_sites);
      for (const auto& bits : rec.at("samples")) {
        const auto spins = from_bitstring(bits.get<std::string>());
        point.samples.push_back(spins);
      }
      ds.records.push_back(std::move(point));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput("dataset line " + std::to_string(ln + 1) + ": " + e.what());
    } catch (const InvalidInput& e) {
      throw InvalidInput("dataset line " + std::to_string(ln + 1) + ": " + e.what());
    }
  }
  ds.validate();
  return ds;
}

inline void write_dataset(const std::filesystem::path& path, const GridDataset& ds) {
  io::atomic_write(path, serialize_dataset(ds));
}

inline GridDataset read_dataset(const std::filesystem::path& path) {
  return parse_dataset(io::read_file(path));
}

}  // namespace cpvae
