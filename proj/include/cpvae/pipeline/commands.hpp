// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cpvae/analysis/maps.hpp"
#include "cpvae/analysis/snapshots.hpp"
#include "cpvae/autodiff/gradcheck.hpp"
#include "cpvae/error.hpp"
#include "cpvae/io.hpp"
#include "cpvae/models/vae.hpp"
#include "cpvae/objective/model_objective.hpp"
#include "cpvae/pipeline/generate_config.hpp"
#include "cpvae/pipeline/holdout.hpp"
#include "cpvae/pipeline/manifest.hpp"
#include "cpvae/spinsim/dataset.hpp"
#include "cpvae/spinsim/dataset_io.hpp"
#include "cpvae/trainer/train.hpp"
#include "json.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace cpvae::cli {

/// Keeps freed buffers of any size in the process heap instead of returning them
/// to the OS.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

enum ExitCode : int { kSuccess = 0, kValidation = 1, kNumerical = 2, kIo = 3 };

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::filesystem::path config;
  std::filesystem::path out_dir = ".";
  bool strict = false;
  std::size_t threads = 1;
  std::ostream* log = &std::cerr;
};

/// Runs `body` and maps library exceptions onto exit codes, printing the message.
inline int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const GridPointError& e) {
    err << "error: " << e.what() << " after " << e.iterations() << " iterations\n";
    return kNumerical;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << " at step " << e.step() << "\n";
    return kNumerical;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const UnsupportedOperation& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
}

namespace detail {

inline nlohmann::json load_config(const GlobalOptions& g) {
  if (g.config.empty()) return nlohmann::json::object();
  try {
    auto j = nlohmann::json::parse(io::read_file(g.config));
    cpvae::detail::require(j.is_object(), "config file must hold a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput("config " + g.config.string() + " is not valid JSON: " + e.what());
  }
}

inline nlohmann::json section(const nlohmann::json& j, const std::string& key) {
  return j.contains(key) ? j.at(key) : nlohmann::json::object();
}

}  // namespace detail

// ---------------------------------------------------------------- generate

struct GenerateOptions {
  std::optional<std::string> preset;
  std::string output = "dataset.ndjson";
};

inline int cmd_generate(const GlobalOptions& g, const GenerateOptions& o) {
  auto j = detail::load_config(g);
  if (j.contains("generate")) j = j.at("generate");
  if (o.preset) j["preset"] = *o.preset;
  cpvae::detail::require(!j.empty(), "generate needs --preset or a --config");
  GenerateConfig cfg = generate_config_from_json(j);
  if (g.seed) cfg.seed = *g.seed;

  RunRecorder rec(g.out_dir, "generate");
  rec.manifest().config = to_json(cfg);
  rec.manifest().seeds["dataset"] = cfg.seed;
  if (!g.config.empty()) rec.input(g.config);
  GridOptions grid;
  grid.lanczos = cfg.lanczos;
  grid.threads = g.threads;
  const GridDataset ds =
      generate_grid_dataset(cfg.spec, cfg.axis1, cfg.axis2, cfg.samples_per_point, cfg.seed, grid);
  rec.lap("generate");
  rec.write(o.output, serialize_dataset(ds));
  rec.finish();
  *g.log << "wrote " << ds.records.size() << " grid points to " << rec.path(o.output).string()
         << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------- ingest

struct IngestOptions {
  std::filesystem::path input;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::string output = "snapshots.ndjson";
  /// Also write the snapshots as a training dataset under this name when set.
  std::string grid_output;
};

inline int cmd_ingest(const GlobalOptions& g, const IngestOptions& o) {
  RunRecorder rec(g.out_dir, "ingest");
  rec.input(o.input);
  rec.manifest().config = {{"rows", o.rows}, {"cols", o.cols}};
  IngestReport report;
  const SnapshotCollection c = ingest_snapshots(io::read_file(o.input), o.rows, o.cols, report);
  rec.write(o.output, serialize_snapshots(c));
  if (!o.grid_output.empty() && !c.points.empty()) {
    rec.write(o.grid_output, serialize_dataset(snapshots_to_grid(c)));
  }
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [count, points] : report.histogram) hist[std::to_string(count)] = points;
  const nlohmann::json summary = {{"records", report.records},
                                  {"rejected_length", report.rejected_length},
                                  {"rejected_bits", report.rejected_bits},
                                  {"points", c.points.size()},
                                  {"snapshots_per_point_histogram", hist},
                                  {"warnings", report.warnings}};
  rec.write("ingest_report.json", summary.dump(2) + "\n");
  rec.finish();

  for (const auto& w : report.warnings) *g.log << "warning: " << w << "\n";
  *g.log << "ingested " << report.records - report.rejected() << " of " << report.records
         << " records into " << c.points.size() << " parameter points\n";
  for (const auto& [count, points] : report.histogram) {
    *g.log << "  " << points << " point(s) with " << count << " snapshots\n";
  }
  if (report.rejected() > 0) {
    *g.log << (g.strict ? "error: " : "warning: ") << report.rejected()
           << " record(s) rejected (" << report.rejected_length << " wrong length, "
           << report.rejected_bits << " non-binary)\n";
    if (g.strict) return kValidation;
  }
  return kSuccess;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  std::filesystem::path dataset;
  std::string variant = "cpvae";
  std::optional<std::string> weights;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> learning_rate;
  std::string checkpoint = "model.json";
};

struct TrainSetup {
  ModelConfig model;
  TrainConfig train;
};

/// Resolves preset, config file and flags, in increasing precedence. The dVAE
/// always trains without KL terms.
inline TrainSetup resolve_train_setup(const GlobalOptions& g, const TrainOptions& o,
                                      const nlohmann::json& config, std::size_t n_sites) {
  TrainSetup s;
  const Variant variant = variant_from_string(o.variant);
  nlohmann::json model_json = detail::section(config, "model");
  model_json["n_sites"] = n_sites;
  model_json["variant"] = to_string(variant);
  s.model = model_config_from_json(model_json);

  TrainConfig base;
  if (o.weights) base = weight_preset(*o.weights);
  s.train = train_config_from_json(detail::section(config, "train"), base);
  s.train.variant = variant;
  if (o.epochs) s.train.epochs = *o.epochs;
  if (o.batch_size) s.train.batch_size = *o.batch_size;
  if (o.learning_rate) s.train.learning_rate = *o.learning_rate;
  if (g.seed) s.train.seed = *g.seed;
  if (variant == Variant::DVae) {
    s.train.weights = {};
    s.train.gamma_min = 0.0;
    s.train.gamma_max = 0.0;
  }
  s.train.validate();
  return s;
}

inline nlohmann::json active_summary(const Vae& model, const ConfigBatch& data) {
  const auto sigma = mean_posterior_sigma(model, data);
  const auto active = active_latent_neurons(model, data, 0.5);
  return {{"threshold", 0.5}, {"mean_sigma", sigma}, {"active", active}};
}

inline int cmd_train(const GlobalOptions& g, const TrainOptions& o) {
  const auto config = detail::load_config(g);
  const GridDataset ds = read_dataset(o.dataset);
  const TrainSetup s = resolve_train_setup(g, o, config, ds.n_sites());

  RunRecorder rec(g.out_dir, "train");
  rec.input(o.dataset);
  if (!g.config.empty()) rec.input(g.config);
  rec.manifest().config = {{"model", to_json(s.model)}, {"train", to_json(s.train)}};
  rec.manifest().seeds["train"] = s.train.seed;

  TrainConfig tc = s.train;
  tc.checkpoint_path = rec.path(o.checkpoint);
  Vae model(s.model, tc.seed);
  TrainCallbacks cb;
  std::ostream& log = *g.log;
  cb.on_epoch = [&log](std::size_t epoch, const TrainingHistory& h) {
    log << "epoch " << epoch + 1 << " reconstruction " << h.epoch_reconstruction().back() << "\n";
  };
  const ConfigBatch data = ds.all_configurations();
  const TrainingHistory history = train(model, data, tc, cb);
  rec.lap("train");
  rec.adopt(o.checkpoint);
  rec.adopt(checkpoint_blob_path(tc.checkpoint_path).filename().string());
  rec.write("history.csv", history_csv(history));
  rec.write("sigma.csv", sigma_csv(history));
  rec.write("active.json", active_summary(model, data).dump(2) + "\n");
  rec.finish();
  if (history.aborted_at_step) {
    throw NumericalError("training produced a non-finite loss; last finite parameters saved",
                         *history.aborted_at_step);
  }
  return kSuccess;
}

// ---------------------------------------------------------------- holdout

struct HoldoutOptions {
  TrainOptions train;
  std::string axis = "h";
  double lo = 0.4;
  double hi = 0.75;
  std::string observable = "zz1";
};

inline int cmd_holdout(const GlobalOptions& g, const HoldoutOptions& o) {
  const auto config = detail::load_config(g);
  const GridDataset ds = read_dataset(o.train.dataset);
  HoldoutSpec spec;
  spec.axis = resolve_holdout_axis(ds, o.axis);
  spec.lo = o.lo;
  spec.hi = o.hi;
  spec.validate(ds);
  require_observable(o.observable);
  const TrainSetup s = resolve_train_setup(g, o.train, config, ds.n_sites());

  RunRecorder rec(g.out_dir, "holdout");
  rec.input(o.train.dataset);
  if (!g.config.empty()) rec.input(g.config);
  rec.manifest().config = {{"model", to_json(s.model)},
                           {"train", to_json(s.train)},
                           {"holdout",
                            {{"axis", to_string(spec.axis)},
                             {"axis_name", spec.axis_of(ds).name},
                             {"lo", spec.lo},
                             {"hi", spec.hi}}},
                           {"observable", o.observable}};
  const std::uint64_t analysis_seed = derive_seed(s.train.seed, 0, 4);
  rec.manifest().seeds["train"] = s.train.seed;
  rec.manifest().seeds["analysis"] = analysis_seed;

  const HoldoutRun run =
      run_holdout(ds, spec, s.model, s.train, o.observable, analysis_seed, g.threads);
  rec.lap("holdout");
  save_model(run.model, rec.path(o.train.checkpoint), {{"train_config", to_json(s.train)}});
  rec.adopt(o.train.checkpoint);
  rec.adopt(checkpoint_blob_path(rec.path(o.train.checkpoint)).filename().string());
  rec.write("history.csv", history_csv(run.history));
  rec.write("generated_map.csv", phase_map_csv(run.report.generated));
  rec.write("data_map.csv", phase_map_csv(run.report.data));
  rec.write("heldout_error.csv", phase_map_csv(run.report.heldout_error));
  rec.write("training_error.csv", phase_map_csv(run.report.training_error));
  const nlohmann::json summary = {{"observable", o.observable},
                                  {"heldout_mean_error", run.report.heldout_mean_error},
                                  {"training_mean_error", run.report.training_mean_error},
                                  {"ratio", run.report.ratio()}};
  rec.write("holdout_summary.json", summary.dump(2) + "\n");
  rec.finish();
  *g.log << "held-out / training mean error ratio: " << run.report.ratio() << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------- analyze

inline const std::vector<std::string>& analysis_names() {
  static const std::vector<std::string> names = {"latent-map", "reconstruction", "data-map",
                                                 "sweep", "active"};
  return names;
}

struct AnalyzeOptions {
  std::string analysis;
  std::filesystem::path checkpoint;
  std::filesystem::path dataset;
  std::string observable = "zz2";
  std::size_t dim = 0;
  double from = -3.0;
  double to = 3.0;
  std::size_t steps = 25;
  std::size_t count = 1000;
  double threshold = 0.5;
};

inline int cmd_analyze(const GlobalOptions& g, const AnalyzeOptions& o) {
  const auto& names = analysis_names();
  if (std::find(names.begin(), names.end(), o.analysis) == names.end()) {
    std::string valid;
    for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
    throw InvalidInput("unknown analysis '" + o.analysis + "' (valid: " + valid + ")");
  }
  const std::uint64_t seed = g.seed.value_or(0);
  RunRecorder rec(g.out_dir, "analyze-" + o.analysis);
  rec.manifest().seeds["analysis"] = seed;
  rec.manifest().config = {{"analysis", o.analysis},
                           {"observable", o.observable},
                           {"dim", o.dim},
                           {"from", o.from},
                           {"to", o.to},
                           {"steps", o.steps},
                           {"count", o.count},
                           {"threshold", o.threshold}};

  if (o.analysis == "data-map") {
    cpvae::detail::require(!o.dataset.empty(), "data-map needs --dataset");
    rec.input(o.dataset);
    const GridDataset ds = read_dataset(o.dataset);
    rec.write("data_" + o.observable + ".csv", phase_map_csv(data_map(ds, o.observable)));
    rec.finish();
    return kSuccess;
  }

  cpvae::detail::require(!o.checkpoint.empty(), o.analysis + " needs --checkpoint");
  rec.input(o.checkpoint);
  const Vae model = load_model(o.checkpoint);
  std::optional<GridDataset> ds;
  if (!o.dataset.empty()) {
    rec.input(o.dataset);
    ds = read_dataset(o.dataset);
    cpvae::detail::require(ds->n_sites() == model.n_sites(),
                           "checkpoint and dataset site counts differ");
  }

  if (o.analysis == "sweep") {
    cpvae::detail::require(o.steps >= 1, "sweep needs --steps >= 1");
    const auto values = linspace(o.from, o.to, o.steps);
    std::optional<ConfigBatch> reference;
    if (ds) reference = ds->all_configurations();
    const Boundary boundary = ds ? ds->boundary() : Boundary::Periodic;
    const SweepResult sweep =
        latent_sweep_generate(model, o.dim, values, o.count, seed, boundary,
                              reference ? &*reference : nullptr, o.threshold);
    if (sweep.passive_dimension) {
      *g.log << "warning: latent dimension " << o.dim << " is passive on this dataset\n";
    }
    rec.write("sweep_dim" + std::to_string(o.dim) + ".csv", sweep_csv(sweep));
    rec.finish();
    return kSuccess;
  }

  cpvae::detail::require(ds.has_value(), o.analysis + " needs --dataset");
  if (o.analysis == "active") {
    rec.write("active.json", active_summary(model, ds->all_configurations()).dump(2) + "\n");
  } else if (o.analysis == "reconstruction") {
    const PhaseMap gen = reconstruction_map(model, *ds, o.observable, seed, g.threads);
    rec.write("reconstruction_" + o.observable + ".csv", phase_map_csv(gen));
  } else {
    const auto active = active_latent_neurons(model, *ds, o.threshold);
    if (active.empty()) *g.log << "warning: no active latent dimensions; no maps written\n";
    const LatentMaps maps = latent_phase_map(model, *ds);
    for (std::size_t j : active) {
      const std::string tag = std::to_string(j);
      rec.write("latent_mu_" + tag + ".csv", phase_map_csv(maps.mean_mu[j]));
      rec.write("latent_abs_mu_" + tag + ".csv", phase_map_csv(maps.mean_abs_mu[j]));
      rec.write("latent_sigma_" + tag + ".csv", phase_map_csv(maps.mean_sigma[j]));
    }
  }
  rec.finish();
  return kSuccess;
}

// ---------------------------------------------------------------- sample

struct SampleOptions {
  std::filesystem::path checkpoint;
  /// Latent point; empty means the origin.
  std::vector<double> z;
  std::size_t count = 1000;
  std::string output = "samples.txt";
};

/// Writes one bitstring per line. The dVAE decodes deterministically, so it
/// writes a single thresholded configuration.
inline int cmd_sample(const GlobalOptions& g, const SampleOptions& o) {
  const Vae model = load_model(o.checkpoint);
  LatentSample z;
  z.z = o.z.empty() ? std::vector<double>(model.latent_dim(), 0.0) : o.z;
  cpvae::detail::require(z.z.size() == model.latent_dim(),
                         "--z needs " + std::to_string(model.latent_dim()) + " values");
  z.epsilon.assign(z.z.size(), 0.0);
  const std::uint64_t seed = g.seed.value_or(0);

  RunRecorder rec(g.out_dir, "sample");
  rec.input(o.checkpoint);
  rec.manifest().seeds["sample"] = seed;
  rec.manifest().config = {{"z", z.z}, {"count", o.count}};
  std::string text;
  if (model.autoregressive()) {
    cpvae::detail::require(o.count >= 1, "--count must be >= 1");
    const ConfigBatch batch = autoregressive_sample(model, z, o.count, seed);
    for (std::size_t k = 0; k < batch.size(); ++k) text += to_bitstring(batch.row(k)) + "\n";
  } else {
    const auto out = dvae_decode(model, z);
    std::vector<Spin> spins(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) spins[i] = out[i] >= 0.0 ? Spin{1} : Spin{-1};
    text = to_bitstring(spins) + "\n";
  }
  rec.write(o.output, text);
  rec.finish();
  return kSuccess;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckOptions {
  std::size_t sites = 8;
  std::size_t batch = 16;
  std::size_t seeds = 1;
  /// "unit" (alpha = beta = gamma = 1) or a weight preset name.
  std::string weights = "unit";
  double tolerance = 1e-4;
};

struct GradcheckRun {
  std::uint64_t seed = 0;
  GradCheckReport report;
};

/// Finite-difference check of the full cpVAE objective on random spins and weights.
inline GradcheckRun gradcheck_model(std::size_t sites, std::size_t batch_size,
                                    const LossWeights& weights, std::uint64_t seed) {
  ModelConfig mc;
  mc.n_sites = sites;
  Vae model(mc, derive_seed(seed, 0, 0));
  Rng rng(derive_seed(seed, 0, 1));
  std::vector<Spin> spins(sites * batch_size);
  std::bernoulli_distribution coin(0.5);
  for (Spin& s : spins) s = coin(rng) ? Spin{1} : Spin{-1};
  const ConfigBatch batch(sites, std::move(spins));
  BatchObjective job;
  job.batch = &batch;
  job.epsilon = standard_normal(static_cast<Eigen::Index>(batch_size),
                                static_cast<Eigen::Index>(model.latent_dim()), rng);
  job.weights = weights;
  job.gamma_now = weights.gamma;
  job.dataset_size = batch_size;
  ModelObjective objective(model, job);
  GradCheckOptions options;
  options.structural_zero = masked_weight_predicate(model);
  return {seed, finite_difference_check(objective, options)};
}

inline int cmd_gradcheck(const GlobalOptions& g, const GradcheckOptions& o) {
  LossWeights w{1.0, 1.0, 1.0};
  if (o.weights != "unit") {
    const TrainConfig preset = weight_preset(o.weights);
    w = preset.weights;
    w.gamma = preset.gamma_max;
  }
  cpvae::detail::require(o.seeds >= 1, "--seeds must be >= 1");
  const std::uint64_t base = g.seed.value_or(0);
  RunRecorder rec(g.out_dir, "gradcheck");
  rec.manifest().config = {{"sites", o.sites},
                           {"batch", o.batch},
                           {"weights", o.weights},
                           {"tolerance", o.tolerance}};
  nlohmann::json runs = nlohmann::json::array();
  double worst = 0.0;
  for (std::size_t k = 0; k < o.seeds; ++k) {
    const std::uint64_t seed = base + k;
    rec.manifest().seeds["run" + std::to_string(k)] = seed;
    const GradcheckRun run = gradcheck_model(o.sites, o.batch, w, seed);
    worst = std::max(worst, run.report.max_relative_error);
    runs.push_back({{"seed", seed},
                    {"max_relative_error", run.report.max_relative_error},
                    {"worst_parameter", run.report.worst_parameter},
                    {"worst_entry", run.report.worst_entry},
                    {"checked", run.report.checked},
                    {"structural_zeros", run.report.structural_zeros},
                    {"one_sided", run.report.one_sided},
                    {"skipped", run.report.skipped}});
    *g.log << "seed " << seed << ": max relative error " << run.report.max_relative_error
           << " (" << run.report.worst_parameter << "[" << run.report.worst_entry << "])\n";
  }
  rec.write("gradcheck.json",
            nlohmann::json({{"runs", runs}, {"max_relative_error", worst}}).dump(2) + "\n");
  rec.finish();
  if (worst > o.tolerance) {
    *g.log << "error: gradient check exceeded tolerance " << o.tolerance << "\n";
    return kNumerical;
  }
  return kSuccess;
}

}  // namespace cpvae::cli
