// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cpvae/error.hpp"
#include "cpvae/parallel.hpp"
#include "cpvae/random.hpp"
#include "cpvae/spinsim/configuration.hpp"
#include "cpvae/spinsim/hamiltonian.hpp"
#include "cpvae/spinsim/lanczos.hpp"
#include "cpvae/spinsim/sampler.hpp"

namespace cpvae {

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  detail::require(count >= 1, "linspace needs at least one point");
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t k = 0; k < count; ++k) {
    out[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
  }
  out.back() = hi;
  return out;
}

inline std::vector<double> logspace(double lo, double hi, std::size_t count) {
  detail::require(lo > 0.0 && hi > 0.0, "logspace bounds must be positive");
  auto exps = linspace(std::log(lo), std::log(hi), count);
  for (double& e : exps) e = std::exp(e);
  exps.front() = lo;
  if (count > 1) exps.back() = hi;
  return exps;
}

/// A swept axis: the parameter name ("j2", "h", "alpha" for spin models;
/// "rb_over_a", "delta_over_omega" for snapshot data) and its sorted values.
struct Axis {
  std::string name;
  std::vector<double> values;

  friend bool operator==(const Axis&, const Axis&) = default;
};

struct GridPoint {
  std::size_t index1 = 0;
  std::size_t index2 = 0;
  double axis1 = 0.0;
  double axis2 = 0.0;
  ConfigBatch samples;

  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

enum class DatasetSource { Hamiltonian, Snapshots };

/// Measurement snapshots laid out on a 2-D parameter grid. Records are stored
/// axis1-major; a filtered dataset (holdout) may omit grid points.
struct GridDataset {
  DatasetSource source = DatasetSource::Hamiltonian;
  HamiltonianSpec spec_template;
  Axis axis1;
  Axis axis2;
  std::size_t samples_per_point = 0;
  std::uint64_t seed = 0;
  std::vector<GridPoint> records;

  std::size_t n_sites() const { return spec_template.n_sites; }
  Boundary boundary() const { return spec_template.boundary; }

  std::size_t total_configurations() const {
    std::size_t total = 0;
    for (const auto& r : records) total += r.samples.size();
    return total;
  }

  ConfigBatch all_configurations() const {
    ConfigBatch out(n_sites());
    out.reserve(total_configurations());
    for (const auto& r : records) out.append(r.samples);
    return out;
  }

  const GridPoint* find(std::size_t i1, std::size_t i2) const {
    for (const auto& r : records) {
      if (r.index1 == i1 && r.index2 == i2) return &r;
    }
    return nullptr;
  }

  void validate() const {
    detail::require(!axis1.values.empty() && !axis2.values.empty(), "axes must be non-empty");
    detail::require(std::is_sorted(axis1.values.begin(), axis1.values.end()) &&
                        std::is_sorted(axis2.values.begin(), axis2.values.end()),
                    "axis values must be sorted");
    detail::require(samples_per_point >= 1, "samples_per_point must be >= 1");
    for (const auto& r : records) {
      detail::require(r.index1 < axis1.values.size() && r.index2 < axis2.values.size(),
                      "record grid index out of range");
      detail::require(r.samples.size() == samples_per_point,
                      "grid point does not hold samples_per_point configurations");
      detail::require(r.samples.n_sites() == n_sites(), "configuration length mismatch");
    }
  }

  friend bool operator==(const GridDataset& a, const GridDataset& b) {
    return a.source == b.source && a.spec_template.model == b.spec_template.model &&
           a.spec_template.n_sites == b.spec_template.n_sites &&
           a.spec_template.boundary == b.spec_template.boundary &&
           a.spec_template.j2 == b.spec_template.j2 && a.spec_template.h == b.spec_template.h &&
           a.spec_template.alpha == b.spec_template.alpha && a.axis1 == b.axis1 &&
           a.axis2 == b.axis2 && a.samples_per_point == b.samples_per_point &&
           a.seed == b.seed && a.records == b.records;
  }
};

/// Sets the named parameter on a spec. Rejects names that are not Hamiltonian parameters.
inline void set_parameter(HamiltonianSpec& spec, const std::string& name, double value) {
  if (name == "j2") {
    spec.j2 = value;
  } else if (name == "h") {
    spec.h = value;
  } else if (name == "alpha") {
    spec.alpha = value;
  } else {
    throw InvalidInput("unknown Hamiltonian parameter '" + name + "' (expected j2, h or alpha)");
  }
}

inline HamiltonianSpec spec_at(const HamiltonianSpec& tmpl, const Axis& a1, double v1,
                               const Axis& a2, double v2) {
  HamiltonianSpec spec = tmpl;
  set_parameter(spec, a1.name, v1);
  set_parameter(spec, a2.name, v2);
  return spec;
}

/// Lanczos failure at a specific grid point.
class GridPointError : public ConvergenceError {
 public:
  GridPointError(const std::string& what, double residual, std::size_t iterations,
                 double axis1, double axis2)
      : ConvergenceError(what, residual, iterations), axis1_(axis1), axis2_(axis2) {}
  double axis1() const noexcept { return axis1_; }
  double axis2() const noexcept { return axis2_; }

 private:
  double axis1_;
  double axis2_;
};

struct GridOptions {
  LanczosOptions lanczos;
  std::size_t threads = 1;
};

/// Seeds for grid point k = index1 * |axis2| + index2:
/// Lanczos start vector uses derive_seed(seed, k, 0), Born sampling derive_seed(seed, k, 1).
inline GridDataset generate_grid_dataset(const HamiltonianSpec& tmpl, const Axis& axis1,
                                         const Axis& axis2, std::size_t samples_per_point,
                                         std::uint64_t seed, const GridOptions& options = {}) {
  detail::require(!axis1.values.empty() && !axis2.values.empty(), "axes must be non-empty");
  detail::require(axis1.name != axis2.name, "axes must sweep different parameters");
  detail::require(samples_per_point >= 1, "samples_per_point must be >= 1");
  for (double v1 : axis1.values) {
    for (double v2 : axis2.values) spec_at(tmpl, axis1, v1, axis2, v2).validate();
  }

  GridDataset out;
  out.source = DatasetSource::Hamiltonian;
  out.spec_template = tmpl;
  out.axis1 = axis1;
  out.axis2 = axis2;
  std::sort(out.axis1.values.begin(), out.axis1.values.end());
  std::sort(out.axis2.values.begin(), out.axis2.values.end());
  out.samples_per_point = samples_per_point;
  out.seed = seed;

  const std::size_t n2 = out.axis2.values.size();
  const std::size_t points = out.axis1.values.size() * n2;
  out.records.resize(points);
  parallel_for(points, options.threads, [&](std::size_t k) {
    const std::size_t i1 = k / n2;
    const std::size_t i2 = k % n2;
    const double v1 = out.axis1.values[i1];
    const double v2 = out.axis2.values[i2];
    const auto spec = spec_at(tmpl, out.axis1, v1, out.axis2, v2);
    GroundStateVector state;
    try {
      state = lanczos_ground_state(spec, options.lanczos, derive_seed(seed, k, 0));
    } catch (const ConvergenceError& e) {
      std::ostringstream msg;
      msg << "Lanczos failed at " << out.axis1.name << "=" << v1 << ", " << out.axis2.name
          << "=" << v2 << " (residual " << e.residual() << ")";
      throw GridPointError(msg.str(), e.residual(), e.iterations(), v1, v2);
    }
    GridPoint& rec = out.records[k];
    rec.index1 = i1;
    rec.index2 = i2;
    rec.axis1 = v1;
    rec.axis2 = v2;
    rec.samples = sample_configurations(state, samples_per_point, derive_seed(seed, k, 1));
  });
  return out;
}

}  // namespace cpvae
