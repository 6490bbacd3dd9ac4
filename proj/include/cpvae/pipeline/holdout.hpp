// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>

#include "cpvae/analysis/maps.hpp"
#include "cpvae/error.hpp"
#include "cpvae/spinsim/dataset.hpp"
#include "cpvae/trainer/train.hpp"

namespace cpvae {

enum class HoldoutAxis { Axis1, Axis2 };

/// Open interval lo < v < hi removed from training along one grid axis.
struct HoldoutSpec {
  HoldoutAxis axis = HoldoutAxis::Axis2;
  double lo = 0.4;
  double hi = 0.75;

  const Axis& axis_of(const GridDataset& ds) const {
    return axis == HoldoutAxis::Axis1 ? ds.axis1 : ds.axis2;
  }

  bool excludes(double value) const { return value > lo && value < hi; }

  bool excludes_point(double v1, double v2) const {
    return excludes(axis == HoldoutAxis::Axis1 ? v1 : v2);
  }

  /// The band must lie within the axis range and leave grid points on both sides
  /// of the split.
  void validate(const GridDataset& ds) const {
    detail::require(std::isfinite(lo) && std::isfinite(hi) && lo < hi,
                    "holdout band needs finite lo < hi");
    const Axis& a = axis_of(ds);
    detail::require(!a.values.empty(), "holdout axis is empty");
    std::ostringstream range;
    range << "holdout band (" << lo << ", " << hi << ") lies outside the " << a.name
          << " range [" << a.values.front() << ", " << a.values.back() << "]";
    detail::require(lo >= a.values.front() && hi <= a.values.back(), range.str());
    std::size_t inside = 0;
    for (double v : a.values) inside += excludes(v) ? 1 : 0;
    detail::require(inside > 0, "holdout band contains no grid values");
    detail::require(inside < a.values.size(), "holdout band excludes every grid value");
  }
};

inline HoldoutAxis holdout_axis_from_string(const std::string& s) {
  if (s == "axis1") return HoldoutAxis::Axis1;
  if (s == "axis2") return HoldoutAxis::Axis2;
  throw InvalidInput("holdout axis must be 'axis1' or 'axis2', got '" + s + "'");
}

inline std::string to_string(HoldoutAxis a) { return a == HoldoutAxis::Axis1 ? "axis1" : "axis2"; }

/// Resolves a parameter name ("h", "j2", ...) or "axis1"/"axis2" against a dataset.
inline HoldoutAxis resolve_holdout_axis(const GridDataset& ds, const std::string& name) {
  if (name == ds.axis1.name) return HoldoutAxis::Axis1;
  if (name == ds.axis2.name) return HoldoutAxis::Axis2;
  return holdout_axis_from_string(name);
}

/// Copy of `ds` without the records inside the band. Axes keep every value so the
/// filtered data still indexes into the full grid.
inline GridDataset filter_holdout(const GridDataset& ds, const HoldoutSpec& spec) {
  spec.validate(ds);
  GridDataset out = ds;
  out.records.clear();
  for (const auto& r : ds.records) {
    if (!spec.excludes_point(r.axis1, r.axis2)) out.records.push_back(r);
  }
  detail::require(!out.records.empty(), "holdout band excludes every record");
  return out;
}

struct HoldoutReport {
  PhaseMap generated;
  PhaseMap data;
  /// |generated - data| inside the band, NaN elsewhere.
  PhaseMap heldout_error;
  /// |generated - data| outside the band, NaN elsewhere.
  PhaseMap training_error;
  double heldout_mean_error = 0.0;
  double training_mean_error = 0.0;

  double ratio() const {
    return training_mean_error > 0.0 ? heldout_mean_error / training_mean_error
                                     : std::numeric_limits<double>::infinity();
  }
};

/// Compares the generated and data maps of `observable` over the full grid,
/// split by the band.
inline HoldoutReport holdout_report(const Vae& model, const GridDataset& full,
                                    const HoldoutSpec& spec, const std::string& observable,
                                    std::uint64_t seed, std::size_t threads = 1) {
  spec.validate(full);
  HoldoutReport rep;
  rep.generated = reconstruction_map(model, full, observable, seed, threads);
  rep.data = data_map(full, observable);
  rep.heldout_error = PhaseMap(full.axis1, full.axis2, "heldout_error_" + observable);
  rep.training_error = PhaseMap(full.axis1, full.axis2, "training_error_" + observable);
  for (std::size_t i1 = 0; i1 < full.axis1.values.size(); ++i1) {
    for (std::size_t i2 = 0; i2 < full.axis2.values.size(); ++i2) {
      const double g = rep.generated.at(i1, i2);
      const double d = rep.data.at(i1, i2);
      if (std::isnan(g) || std::isnan(d)) continue;
      const bool held = spec.excludes_point(full.axis1.values[i1], full.axis2.values[i2]);
      (held ? rep.heldout_error : rep.training_error).at(i1, i2) = std::abs(g - d);
    }
  }
  auto held = [&](double v1, double v2) { return spec.excludes_point(v1, v2); };
  auto kept = [&](double v1, double v2) { return !spec.excludes_point(v1, v2); };
  rep.heldout_mean_error = mean_absolute_error(rep.generated, rep.data, held);
  rep.training_mean_error = mean_absolute_error(rep.generated, rep.data, kept);
  return rep;
}

struct HoldoutRun {
  Vae model;
  TrainingHistory history;
  HoldoutReport report;
};

/// Trains a fresh model on the data outside the band, then evaluates everywhere.
inline HoldoutRun run_holdout(const GridDataset& full, const HoldoutSpec& spec,
                              const ModelConfig& model_config, const TrainConfig& train_config,
                              const std::string& observable, std::uint64_t analysis_seed,
                              std::size_t threads = 1, const TrainCallbacks& callbacks = {}) {
  require_observable(observable);
  const GridDataset filtered = filter_holdout(full, spec);
  HoldoutRun run{Vae(model_config, train_config.seed), {}, {}};
  run.history = train(run.model, filtered, train_config, callbacks);
  if (run.history.aborted_at_step) {
    throw NumericalError("training produced a non-finite loss", *run.history.aborted_at_step);
  }
  run.report = holdout_report(run.model, full, spec, observable, analysis_seed, threads);
  return run;
}

}  // namespace cpvae
