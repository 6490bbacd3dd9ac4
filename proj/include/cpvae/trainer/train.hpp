// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cpvae/io.hpp"
#include "cpvae/models/vae.hpp"
#include "cpvae/objective/model_objective.hpp"
#include "cpvae/random.hpp"
#include "cpvae/spinsim/dataset.hpp"
#include "cpvae/trainer/adabelief.hpp"
#include "json.hpp"

namespace cpvae {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  LossWeights weights;
  double gamma_min = 0.0;
  double gamma_max = 0.0;
  std::uint64_t seed = 0;
  /// Save a checkpoint every this many epochs (0 disables periodic saves).
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_path;
  Variant variant = Variant::CpVae;
  AdaBeliefOptions optimizer;

  void validate() const {
    detail::require(epochs >= 1, "epochs must be >= 1");
    detail::require(batch_size >= 2, "batch_size must be >= 2");
    detail::require(std::isfinite(learning_rate) && learning_rate >= 0.0,
                    "learning_rate must be finite and >= 0");
    weights.validate();
    detail::require(std::isfinite(gamma_min) && std::isfinite(gamma_max) && gamma_min >= 0.0,
                    "gamma bounds must be finite and >= 0");
    detail::require(gamma_min <= gamma_max, "gamma_min must be <= gamma_max");
  }
};

/// Table of published loss weights: nnn, lr and rydberg.
inline TrainConfig weight_preset(const std::string& name) {
  TrainConfig c;
  if (name == "nnn") {
    c.weights = {0.1, 30.0, 0.1};
    c.gamma_min = 0.1;
    c.gamma_max = 0.2;
  } else if (name == "lr") {
    c.weights = {0.1, 0.5, 0.5};
    c.gamma_min = 0.5;
    c.gamma_max = 10.0;
  } else if (name == "rydberg") {
    c.weights = {0.001, 10.0, 1.0};
    c.gamma_min = 1.0;
    c.gamma_max = 1.0;
  } else {
    throw InvalidInput("unknown weight preset '" + name + "' (expected nnn, lr or rydberg)");
  }
  return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"alpha", c.weights.alpha},
          {"beta", c.weights.beta},
          {"gamma", c.weights.gamma},
          {"gamma_min", c.gamma_min},
          {"gamma_max", c.gamma_max},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every},
          {"variant", to_string(c.variant)}};
}

/// Overlays any keys present in `j` onto `base`.
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
  try {
    base.epochs = j.value("epochs", base.epochs);
    base.batch_size = j.value("batch_size", base.batch_size);
    base.learning_rate = j.value("learning_rate", base.learning_rate);
    base.weights.alpha = j.value("alpha", base.weights.alpha);
    base.weights.beta = j.value("beta", base.weights.beta);
    base.weights.gamma = j.value("gamma", base.weights.gamma);
    base.gamma_min = j.value("gamma_min", base.gamma_min);
    base.gamma_max = j.value("gamma_max", base.gamma_max);
    base.seed = j.value("seed", base.seed);
    base.checkpoint_every = j.value("checkpoint_every", base.checkpoint_every);
    if (j.contains("variant")) base.variant = variant_from_string(j.at("variant").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("malformed training config: " + std::string(e.what()));
  }
  base.validate();
  return base;
}

struct StepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double gamma_now = 0.0;
  LossBreakdown loss;
};

struct TrainingHistory {
  std::vector<StepRecord> steps;
  /// [epoch][dimension] means over every input seen during the epoch.
  std::vector<std::vector<double>> epoch_mean_sigma;
  std::vector<std::vector<double>> epoch_mean_log_sigma;
  /// Set when a non-finite loss or gradient stopped training; parameters hold
  /// the last finite state.
  std::optional<std::size_t> aborted_at_step;

  /// Mean reconstruction term per epoch.
  std::vector<double> epoch_reconstruction() const {
    std::vector<double> sum;
    std::vector<std::size_t> count;
    for (const auto& r : steps) {
      if (r.epoch >= sum.size()) {
        sum.resize(r.epoch + 1, 0.0);
        count.resize(r.epoch + 1, 0);
      }
      sum[r.epoch] += r.loss.reconstruction_nll;
      ++count[r.epoch];
    }
    for (std::size_t e = 0; e < sum.size(); ++e) sum[e] /= static_cast<double>(std::max<std::size_t>(1, count[e]));
    return sum;
  }
};

inline std::string history_csv(const TrainingHistory& h) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,step,reconstruction_nll,MI,TC,dimKL,gamma_now,total\n";
  for (const auto& r : h.steps) {
    out << r.epoch << ',' << r.step << ',' << r.loss.reconstruction_nll << ','
        << r.loss.mutual_information << ',' << r.loss.total_correlation << ','
        << r.loss.dimension_wise_kl << ',' << r.gamma_now << ',' << r.loss.total << '\n';
  }
  return out.str();
}

inline std::string sigma_csv(const TrainingHistory& h) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,dimension,mean_sigma,mean_log_sigma\n";
  for (std::size_t e = 0; e < h.epoch_mean_sigma.size(); ++e) {
    for (std::size_t j = 0; j < h.epoch_mean_sigma[e].size(); ++j) {
      out << e << ',' << j << ',' << h.epoch_mean_sigma[e][j] << ','
          << h.epoch_mean_log_sigma[e][j] << '\n';
    }
  }
  return out.str();
}

struct TrainCallbacks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(std::size_t epoch, const TrainingHistory&)> on_epoch;
};

namespace detail {

inline bool gradients_finite(const std::vector<Parameter*>& params) {
  for (const Parameter* p : params) {
    for (double g : p->grad.values()) {
      if (!std::isfinite(g)) return false;
    }
  }
  return true;
}

inline bool parameters_finite(const std::vector<Parameter*>& params) {
  for (const Parameter* p : params) {
    for (double v : p->value.values()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

inline std::size_t batches_per_epoch(std::size_t n, std::size_t batch) {
  const std::size_t full = n / batch;
  return full + (n % batch >= 2 ? 1 : 0);
}

}  // namespace detail

/// AdaBelief training over `data`, reshuffled every epoch. A trailing partial
/// batch with fewer than two rows is skipped.
inline TrainingHistory train(Vae& model, const ConfigBatch& data, const TrainConfig& config,
                             const TrainCallbacks& callbacks = {}) {
  config.validate();
  detail::require(model.config().variant == config.variant,
                  "training config variant does not match the model");
  detail::require_length(model, data.n_sites());
  detail::require(data.size() >= 2, "training needs at least two configurations");

  const std::size_t n = data.size();
  const std::size_t sites = data.n_sites();
  const std::size_t d = model.latent_dim();
  const std::size_t per_epoch = detail::batches_per_epoch(n, config.batch_size);
  const std::size_t total_steps = config.epochs * per_epoch;
  const std::size_t schedule_span = std::max<std::size_t>(1, total_steps - 1);

  Rng shuffle_rng(derive_seed(config.seed, 0, 2));
  Rng noise_rng(derive_seed(config.seed, 0, 3));
  auto params = model.parameters();
  AdaBeliefState state;
  std::vector<Tensor> last_good;
  last_good.reserve(params.size());
  for (const Parameter* p : params) last_good.push_back(p->value);

  TrainingHistory history;
  history.steps.reserve(total_steps);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Spin> buffer;
  std::size_t step = 0;

  auto save = [&] {
    if (!config.checkpoint_path.empty()) {
      save_model(model, config.checkpoint_path, {{"train_config", to_json(config)}});
    }
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::vector<double> sigma_sum(d, 0.0);
    std::vector<double> log_sigma_sum(d, 0.0);
    std::size_t seen = 0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::size_t start = b * config.batch_size;
      const std::size_t rows = std::min(config.batch_size, n - start);
      buffer.resize(rows * sites);
      for (std::size_t r = 0; r < rows; ++r) {
        const auto src = data.row(order[start + r]);
        std::copy(src.begin(), src.end(), buffer.begin() + static_cast<std::ptrdiff_t>(r * sites));
      }
      const ConfigBatch batch(sites, buffer);

      BatchObjective job;
      job.batch = &batch;
      job.epsilon = standard_normal(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d),
                                    noise_rng);
      job.weights = config.weights;
      job.gamma_now = gamma_schedule(step, schedule_span, config.gamma_min, config.gamma_max);
      job.dataset_size = n;

      model.zero_grad();
      const BatchEvaluation eval = evaluate_batch(model, job, true);
      if (!std::isfinite(eval.loss.total) || !detail::gradients_finite(params) ||
          !detail::parameters_finite(params)) {
        for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = last_good[k];
        model.zero_grad();
        history.aborted_at_step = step;
        save();
        return history;
      }
      adabelief_step(params, state, config.learning_rate, step + 1, config.optimizer);
      for (std::size_t k = 0; k < params.size(); ++k) last_good[k] = params[k]->value;

      for (Eigen::Index r = 0; r < eval.log_var.rows(); ++r) {
        for (std::size_t j = 0; j < d; ++j) {
          const double half_lv = 0.5 * eval.log_var(r, static_cast<Eigen::Index>(j));
          sigma_sum[j] += std::exp(half_lv);
          log_sigma_sum[j] += half_lv;
        }
      }
      seen += rows;

      StepRecord record{epoch, step, job.gamma_now, eval.loss};
      history.steps.push_back(record);
      if (callbacks.on_step) callbacks.on_step(record);
      ++step;
    }
    for (std::size_t j = 0; j < d; ++j) {
      sigma_sum[j] /= static_cast<double>(seen);
      log_sigma_sum[j] /= static_cast<double>(seen);
    }
    history.epoch_mean_sigma.push_back(sigma_sum);
    history.epoch_mean_log_sigma.push_back(log_sigma_sum);
    if (config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0) save();
    if (callbacks.on_epoch) callbacks.on_epoch(epoch, history);
  }
  model.zero_grad();
  save();
  return history;
}

inline TrainingHistory train(Vae& model, const GridDataset& dataset, const TrainConfig& config,
                             const TrainCallbacks& callbacks = {}) {
  detail::require(dataset.n_sites() == model.n_sites(),
                  "dataset and model site counts differ");
  return train(model, dataset.all_configurations(), config, callbacks);
}

/// Mean posterior sigma per latent dimension over `data`.
inline std::vector<double> mean_posterior_sigma(const Vae& model, const ConfigBatch& data) {
  const std::size_t d = model.latent_dim();
  std::vector<double> sum(d, 0.0);
  constexpr std::size_t kChunk = 2048;
  const std::size_t sites = data.n_sites();
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const std::size_t rows = std::min(kChunk, data.size() - start);
    const auto all = data.data();
    ConfigBatch chunk(sites, std::vector<Spin>(all.begin() + static_cast<std::ptrdiff_t>(start * sites),
                                               all.begin() + static_cast<std::ptrdiff_t>((start + rows) * sites)));
    const auto [mu, lv] = encode_batch(model, chunk);
    for (Eigen::Index r = 0; r < lv.rows(); ++r) {
      for (std::size_t j = 0; j < d; ++j) sum[j] += std::exp(0.5 * lv(r, static_cast<Eigen::Index>(j)));
    }
  }
  for (double& s : sum) s /= static_cast<double>(std::max<std::size_t>(1, data.size()));
  return sum;
}

/// Dimensions whose mean posterior sigma over `data` is below `threshold`.
inline std::vector<std::size_t> active_latent_neurons(const Vae& model, const ConfigBatch& data,
                                                      double threshold = 0.5) {
  const auto sigma = mean_posterior_sigma(model, data);
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < sigma.size(); ++j) {
    if (sigma[j] < threshold) active.push_back(j);
  }
  return active;
}

inline std::vector<std::size_t> active_latent_neurons(const Vae& model, const GridDataset& dataset,
                                                      double threshold = 0.5) {
  return active_latent_neurons(model, dataset.all_configurations(), threshold);
}

}  // namespace cpvae
