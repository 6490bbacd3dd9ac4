// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cpvae/error.hpp"
#include "cpvae/spinsim/dataset.hpp"
#include "cpvae/spinsim/hamiltonian.hpp"
#include "cpvae/spinsim/lanczos.hpp"
#include "json.hpp"

namespace cpvae {

/// Everything `generate` needs: the Hamiltonian template, two swept axes and the
/// sampling budget.
struct GenerateConfig {
  HamiltonianSpec spec;
  Axis axis1;
  Axis axis2;
  std::size_t samples_per_point = 2000;
  std::uint64_t seed = 0;
  LanczosOptions lanczos;

  void validate() const {
    detail::require(!axis1.values.empty() && !axis2.values.empty(), "axes must be non-empty");
    detail::require(axis1.name != axis2.name, "axes must sweep different parameters");
    detail::require(samples_per_point >= 1, "samples_per_point must be >= 1");
    for (double v1 : axis1.values) {
      for (double v2 : axis2.values) spec_at(spec, axis1, v1, axis2, v2).validate();
    }
  }
};

inline const std::vector<std::string>& generate_preset_names() {
  static const std::vector<std::string> names = {"nnn-desk", "nnn-paper", "lr-desk", "lr-paper"};
  return names;
}

/// Published grids (`*-paper`) and their reduced desk-scale counterparts.
inline GenerateConfig generate_preset(const std::string& name) {
  GenerateConfig c;
  if (name == "nnn-desk") {
    c.spec = HamiltonianSpec::nnn(10, 0.0, 0.0);
    c.axis1 = {"j2", linspace(0.0, 1.0, 11)};
    c.axis2 = {"h", linspace(0.0, 2.0, 21)};
    c.samples_per_point = 2000;
  } else if (name == "nnn-paper") {
    c.spec = HamiltonianSpec::nnn(20, 0.0, 0.0);
    c.axis1 = {"j2", linspace(0.0, 1.0, 21)};
    c.axis2 = {"h", linspace(0.0, 2.0, 41)};
    c.samples_per_point = 10000;
  } else if (name == "lr-desk") {
    c.spec = HamiltonianSpec::lr(10, 1.0, 0.0);
    c.axis1 = {"alpha", linspace(1.0, 5.0, 10)};
    c.axis2 = {"h", logspace(1.6, 10.0, 10)};
    c.samples_per_point = 2000;
  } else if (name == "lr-paper") {
    c.spec = HamiltonianSpec::lr(20, 1.0, 0.0);
    c.axis1 = {"alpha", linspace(1.0, 5.0, 20)};
    c.axis2 = {"h", logspace(1.6, 10.0, 20)};
    c.samples_per_point = 10000;
  } else {
    std::string valid;
    for (const auto& n : generate_preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw InvalidInput("unknown dataset preset '" + name + "' (valid: " + valid + ")");
  }
  return c;
}

namespace detail {

/// {"name": "h", "values": [...]} or {"name": "h", "from": a, "to": b, "count": n,
/// "scale": "linear" | "log"}.
inline Axis axis_from_json(const nlohmann::json& j, const Axis& base) {
  Axis axis = base;
  axis.name = j.value("name", base.name);
  if (j.contains("values")) {
    axis.values = j.at("values").get<std::vector<double>>();
  } else if (j.contains("from") || j.contains("to") || j.contains("count")) {
    const double from = j.at("from").get<double>();
    const double to = j.at("to").get<double>();
    const auto count = j.at("count").get<std::size_t>();
    const std::string scale = j.value("scale", std::string("linear"));
    if (scale == "linear") {
      axis.values = linspace(from, to, count);
    } else if (scale == "log") {
      axis.values = logspace(from, to, count);
    } else {
      throw InvalidInput("axis scale must be 'linear' or 'log', got '" + scale + "'");
    }
  }
  require(!axis.name.empty(), "axis needs a parameter name");
  return axis;
}

}  // namespace detail

/// Reads a generate config. A "preset" key supplies defaults that the remaining
/// keys override.
inline GenerateConfig generate_config_from_json(const nlohmann::json& j) {
  GenerateConfig c;
  try {
    if (j.contains("preset")) c = generate_preset(j.at("preset").get<std::string>());
    if (j.contains("model")) {
      const Model m = model_from_string(j.at("model").get<std::string>());
      if (m != c.spec.model) {
        c.spec.model = m;
        c.spec.boundary = m == Model::NnnTfim ? Boundary::Periodic : Boundary::Open;
      }
    }
    c.spec.n_sites = j.value("n_sites", c.spec.n_sites);
    if (j.contains("boundary")) {
      c.spec.boundary = boundary_from_string(j.at("boundary").get<std::string>());
    }
    if (j.contains("fixed")) {
      const auto& f = j.at("fixed");
      c.spec.j2 = f.value("j2", c.spec.j2);
      c.spec.h = f.value("h", c.spec.h);
      c.spec.alpha = f.value("alpha", c.spec.alpha);
    }
    if (j.contains("axis1")) c.axis1 = detail::axis_from_json(j.at("axis1"), c.axis1);
    if (j.contains("axis2")) c.axis2 = detail::axis_from_json(j.at("axis2"), c.axis2);
    c.samples_per_point = j.value("samples_per_point", c.samples_per_point);
    c.seed = j.value("seed", c.seed);
    if (j.contains("lanczos")) {
      const auto& l = j.at("lanczos");
      c.lanczos.tol = l.value("tol", c.lanczos.tol);
      c.lanczos.max_iter = l.value("max_iter", c.lanczos.max_iter);
      c.lanczos.basis_bytes = l.value("basis_bytes", c.lanczos.basis_bytes);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("malformed generate config: " + std::string(e.what()));
  }
  c.validate();
  return c;
}

inline nlohmann::json to_json(const GenerateConfig& c) {
  return {{"model", to_string(c.spec.model)},
          {"n_sites", c.spec.n_sites},
          {"boundary", to_string(c.spec.boundary)},
          {"fixed", {{"j2", c.spec.j2}, {"h", c.spec.h}, {"alpha", c.spec.alpha}}},
          {"axis1", {{"name", c.axis1.name}, {"values", c.axis1.values}}},
          {"axis2", {{"name", c.axis2.name}, {"values", c.axis2.values}}},
          {"samples_per_point", c.samples_per_point},
          {"seed", c.seed},
          {"lanczos",
           {{"tol", c.lanczos.tol},
            {"max_iter", c.lanczos.max_iter},
            {"basis_bytes", c.lanczos.basis_bytes}}}};
}

}  // namespace cpvae
