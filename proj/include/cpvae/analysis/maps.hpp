// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cpvae/analysis/observables.hpp"
#include "cpvae/models/vae.hpp"
#include "cpvae/parallel.hpp"
#include "cpvae/random.hpp"
#include "cpvae/spinsim/dataset.hpp"
#include "cpvae/trainer/train.hpp"

namespace cpvae {

/// One value per grid point, axis1-major; NaN marks points absent from the data.
struct PhaseMap {
  Axis axis1;
  Axis axis2;
  std::vector<double> values;
  std::string label;

  PhaseMap() = default;
  PhaseMap(Axis a1, Axis a2, std::string name)
      : axis1(std::move(a1)),
        axis2(std::move(a2)),
        values(axis1.values.size() * axis2.values.size(),
               std::numeric_limits<double>::quiet_NaN()),
        label(std::move(name)) {}

  double& at(std::size_t i1, std::size_t i2) { return values.at(i1 * axis2.values.size() + i2); }
  double at(std::size_t i1, std::size_t i2) const {
    return values.at(i1 * axis2.values.size() + i2);
  }
};

inline std::string phase_map_csv(const PhaseMap& map) {
  std::ostringstream out;
  out.precision(17);
  out << "axis1,axis2,value,label\n";
  for (std::size_t i1 = 0; i1 < map.axis1.values.size(); ++i1) {
    for (std::size_t i2 = 0; i2 < map.axis2.values.size(); ++i2) {
      const double v = map.at(i1, i2);
      out << map.axis1.values[i1] << ',' << map.axis2.values[i2] << ',';
      if (std::isnan(v)) {
        out << "nan";
      } else {
        out << v;
      }
      out << ',' << map.label << '\n';
    }
  }
  return out.str();
}

/// Mean |a - b| over grid points present in both maps and accepted by `include`,
/// which receives the axis values.
inline double mean_absolute_error(const PhaseMap& a, const PhaseMap& b,
                                  const std::function<bool(double, double)>& include = {}) {
  detail::require(a.values.size() == b.values.size() && a.axis1 == b.axis1 && a.axis2 == b.axis2,
                  "phase maps are on different grids");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i1 = 0; i1 < a.axis1.values.size(); ++i1) {
    for (std::size_t i2 = 0; i2 < a.axis2.values.size(); ++i2) {
      const double va = a.at(i1, i2);
      const double vb = b.at(i1, i2);
      if (std::isnan(va) || std::isnan(vb)) continue;
      if (include && !include(a.axis1.values[i1], a.axis2.values[i2])) continue;
      sum += std::abs(va - vb);
      ++count;
    }
  }
  detail::require(count > 0, "no grid points to compare");
  return sum / static_cast<double>(count);
}

/// Values at grid points present in both maps, in grid order.
inline std::pair<std::vector<double>, std::vector<double>> paired_values(const PhaseMap& a,
                                                                         const PhaseMap& b) {
  detail::require(a.values.size() == b.values.size(), "phase maps are on different grids");
  std::pair<std::vector<double>, std::vector<double>> out;
  for (std::size_t k = 0; k < a.values.size(); ++k) {
    if (std::isnan(a.values[k]) || std::isnan(b.values[k])) continue;
    out.first.push_back(a.values[k]);
    out.second.push_back(b.values[k]);
  }
  return out;
}

inline const std::vector<std::string>& observable_names() {
  static const std::vector<std::string> names = {
      "magnetization", "signed_magnetization", "zz1", "zz2", "beta", "structure_factor",
      "spectral_entropy"};
  return names;
}

inline void require_observable(const std::string& name) {
  const auto& names = observable_names();
  if (std::find(names.begin(), names.end(), name) != names.end()) return;
  std::string valid;
  for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
  throw InvalidInput("unknown observable '" + name + "' (valid: " + valid + ")");
}

/// Evaluates a named observable. Correlators follow the dataset's boundary; the
/// structure factor uses k = 0.8 anchored at site 0.
inline double evaluate_observable(const std::string& name, const ConfigBatch& batch,
                                  Boundary boundary) {
  if (name == "magnetization") return magnetization(batch, true);
  if (name == "signed_magnetization") return magnetization(batch, false);
  if (name == "zz1") return two_point_correlator(batch, 1, boundary);
  if (name == "zz2") return two_point_correlator(batch, 2, boundary);
  if (name == "beta") return correlation_exponent_beta(batch);
  if (name == "structure_factor") return structure_factor(batch, 0.8, 0);
  if (name == "spectral_entropy") return mean_spectral_entropy(batch);
  require_observable(name);
  return 0.0;
}

inline PhaseMap data_map(const GridDataset& ds, const std::string& observable) {
  PhaseMap map(ds.axis1, ds.axis2, observable);
  for (const auto& r : ds.records) {
    map.at(r.index1, r.index2) = evaluate_observable(observable, r.samples, ds.boundary());
  }
  return map;
}

/// One generated configuration per input: encode, draw z, then sample the cpVAE
/// decoder or threshold the dVAE output at 0 (ties to +1).
inline ConfigBatch generate_reconstructions(const Vae& model, const ConfigBatch& inputs, Rng& rng) {
  const auto [mu, log_var] = encode_batch(model, inputs);
  const RowMatrix eps = standard_normal(mu.rows(), mu.cols(), rng);
  const RowMatrix z = reparameterize(mu, log_var, eps);
  if (model.autoregressive()) return autoregressive_sample_batch(model, z, rng);
  const RowMatrix out = dvae_decode_batch(model, z);
  std::vector<Spin> spins(static_cast<std::size_t>(out.size()));
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    spins[static_cast<std::size_t>(k)] = out.data()[k] >= 0.0 ? Spin{1} : Spin{-1};
  }
  return ConfigBatch(model.n_sites(), std::move(spins));
}

/// Generated batches per record, seeded per grid point.
inline std::vector<ConfigBatch> generated_batches(const Vae& model, const GridDataset& ds,
                                                  std::uint64_t seed, std::size_t threads = 1) {
  detail::require(ds.n_sites() == model.n_sites(), "dataset and model site counts differ");
  std::vector<ConfigBatch> out(ds.records.size());
  parallel_for(ds.records.size(), threads, [&](std::size_t k) {
    const auto& r = ds.records[k];
    Rng rng(derive_seed(seed, r.index1 * ds.axis2.values.size() + r.index2, 1));
    out[k] = generate_reconstructions(model, r.samples, rng);
  });
  return out;
}

inline PhaseMap reconstruction_map(const Vae& model, const GridDataset& ds,
                                   const std::string& observable, std::uint64_t seed,
                                   std::size_t threads = 1) {
  require_observable(observable);
  const auto batches = generated_batches(model, ds, seed, threads);
  PhaseMap map(ds.axis1, ds.axis2, "generated_" + observable);
  for (std::size_t k = 0; k < ds.records.size(); ++k) {
    const auto& r = ds.records[k];
    map.at(r.index1, r.index2) = evaluate_observable(observable, batches[k], ds.boundary());
  }
  return map;
}

struct LatentMaps {
  std::vector<PhaseMap> mean_mu;
  std::vector<PhaseMap> mean_abs_mu;
  std::vector<PhaseMap> mean_sigma;
};

/// Per-dimension maps of the encoder outputs averaged over each grid point.
inline LatentMaps latent_phase_map(const Vae& model, const GridDataset& ds) {
  detail::require(ds.n_sites() == model.n_sites(), "dataset and model site counts differ");
  const std::size_t d = model.latent_dim();
  LatentMaps maps;
  for (std::size_t j = 0; j < d; ++j) {
    const std::string tag = std::to_string(j);
    maps.mean_mu.emplace_back(ds.axis1, ds.axis2, "mu_" + tag);
    maps.mean_abs_mu.emplace_back(ds.axis1, ds.axis2, "abs_mu_" + tag);
    maps.mean_sigma.emplace_back(ds.axis1, ds.axis2, "sigma_" + tag);
  }
  for (const auto& r : ds.records) {
    const auto [mu, lv] = encode_batch(model, r.samples);
    for (std::size_t j = 0; j < d; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      maps.mean_mu[j].at(r.index1, r.index2) = mu.col(col).mean();
      maps.mean_abs_mu[j].at(r.index1, r.index2) = mu.col(col).cwiseAbs().mean();
      maps.mean_sigma[j].at(r.index1, r.index2) = (0.5 * lv.col(col).array()).exp().mean();
    }
  }
  return maps;
}

struct SweepRecord {
  std::size_t dimension = 0;
  double z_value = 0.0;
  double magnetization = 0.0;
  double beta = 0.0;
  double nn_correlator = 0.0;
};

struct SweepResult {
  std::vector<SweepRecord> records;
  /// Set when `reference` data shows the swept dimension is passive.
  bool passive_dimension = false;
};

/// Scans one latent coordinate with the others held at 0 and summarizes `count`
/// autoregressive samples per value. Magnetization is the signed batch mean.
inline SweepResult latent_sweep_generate(const Vae& model, std::size_t dimension,
                                         const std::vector<double>& values, std::size_t count,
                                         std::uint64_t seed, Boundary boundary,
                                         const ConfigBatch* reference = nullptr,
                                         double threshold = 0.5) {
  if (!model.autoregressive()) {
    throw UnsupportedOperation("latent sweeps require the cpvae variant");
  }
  detail::require(dimension < model.latent_dim(), "sweep dimension out of range");
  detail::require(count >= 1, "sweep sample count must be >= 1");
  SweepResult result;
  if (reference != nullptr) {
    const auto active = active_latent_neurons(model, *reference, threshold);
    result.passive_dimension =
        std::find(active.begin(), active.end(), dimension) == active.end();
  }
  for (std::size_t v = 0; v < values.size(); ++v) {
    LatentSample z;
    z.z.assign(model.latent_dim(), 0.0);
    z.epsilon.assign(model.latent_dim(), 0.0);
    z.z[dimension] = values[v];
    const ConfigBatch batch = autoregressive_sample(model, z, count, derive_seed(seed, v, 1));
    SweepRecord rec;
    rec.dimension = dimension;
    rec.z_value = values[v];
    rec.magnetization = magnetization(batch, false);
    rec.beta = model.n_sites() >= 2 ? correlation_exponent_beta(batch) : 0.0;
    rec.nn_correlator = model.n_sites() >= 2 ? two_point_correlator(batch, 1, boundary) : 0.0;
    result.records.push_back(rec);
  }
  return result;
}

inline std::string sweep_csv(const SweepResult& sweep) {
  std::ostringstream out;
  out.precision(17);
  out << "dimension,z_value,magnetization,beta,nn_correlator\n";
  for (const auto& r : sweep.records) {
    out << r.dimension << ',' << r.z_value << ',' << r.magnetization << ',' << r.beta << ','
        << r.nn_correlator << '\n';
  }
  return out.str();
}

}  // namespace cpvae
