// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "cpvae/autodiff/gradcheck.hpp"
#include "cpvae/models/vae.hpp"
#include "cpvae/objective/losses.hpp"
#include "cpvae/objective/total_correlation.hpp"

namespace cpvae {

/// Everything needed to evaluate the objective on one minibatch: the inputs, the
/// reparameterization noise (one draw per input) and the loss weights.
struct BatchObjective {
  const ConfigBatch* batch = nullptr;
  RowMatrix epsilon;
  LossWeights weights;
  double gamma_now = 0.0;
  std::size_t dataset_size = 0;
};

struct BatchEvaluation {
  LossBreakdown loss;
  RowMatrix mu;
  RowMatrix log_var;
};

/// Forward pass of the full model and objective; with `backward` set, parameter
/// gradients are accumulated into the model.
inline BatchEvaluation evaluate_batch(Vae& model, const BatchObjective& job, bool backward,
                                      BranchSignature* signature = nullptr) {
  detail::require(job.batch != nullptr && !job.batch->empty(), "objective needs a non-empty batch");
  const ConfigBatch& batch = *job.batch;
  detail::require_length(model, batch.n_sites());
  const std::size_t m = batch.size();
  const std::size_t n = batch.n_sites();
  const std::size_t d = model.latent_dim();
  detail::require(static_cast<std::size_t>(job.epsilon.rows()) == m &&
                      static_cast<std::size_t>(job.epsilon.cols()) == d,
                  "epsilon must be [batch, latent_dim]");
  job.weights.validate();

  const auto enc = model.encoder().forward(spins_tensor(batch));
  BatchEvaluation out;
  out.mu = enc.mu.matrix();
  out.log_var = enc.log_var.matrix();
  const RowMatrix sigma_eps = (0.5 * out.log_var.array()).exp() * job.epsilon.array();
  const RowMatrix z = out.mu + sigma_eps;
  const Tensor zt = Tensor::from_matrix(z);
  const double inv_m = 1.0 / static_cast<double>(m);

  Tensor d_out({m, n});
  detail::CompensatedSum recon_sum;
  ContextStack::Pass dec;
  const auto spins = batch.data();
  if (model.autoregressive()) {
    const Tensor sites = shifted_sites(batch);
    dec = model.decoder().forward(zt, &sites);
    for (std::size_t k = 0; k < m * n; ++k) {
      const double p = dec.output[k];
      const double q = clamp_probability(p);
      recon_sum -= spins[k] > 0 ? std::log(q) : std::log1p(-q);
      d_out[k] = inv_m * bernoulli_nll_grad(p, spins[k]);
      if (signature != nullptr) {
        signature->mix(p < kProbabilityFloor);
        signature->mix(p > 1.0 - kProbabilityFloor);
      }
    }
  } else {
    dec = model.decoder().forward(zt, nullptr);
    const double scale = 2.0 * inv_m / static_cast<double>(n);
    for (std::size_t k = 0; k < m * n; ++k) {
      const double diff = dec.output[k] - spins[k];
      recon_sum += diff * diff / static_cast<double>(n);
      d_out[k] = scale * diff;
    }
  }
  const double recon = recon_sum.value() * inv_m;

  TcTerms tc;
  TcGradients tc_grads;
  LossWeights effective = job.weights;
  effective.gamma = job.gamma_now;
  if (model.autoregressive()) {
    tc = tc_decomposition_minibatch(out.mu, out.log_var, z, job.dataset_size, &effective,
                                    backward ? &tc_grads : nullptr);
  }
  out.loss = total_objective(model.config().variant, recon, tc.mutual_information,
                             tc.total_correlation, tc.dimension_wise_kl, job.weights,
                             job.gamma_now);

  if (signature != nullptr) {
    model.encoder().record_branches(enc, *signature);
    model.decoder().record_branches(dec, *signature);
  }
  if (!backward) return out;

  RowMatrix dz = model.decoder().backward(dec, d_out).matrix();
  RowMatrix d_mu = dz;
  RowMatrix d_lv = 0.5 * dz.cwiseProduct(sigma_eps);
  if (model.autoregressive()) {
    d_mu += tc_grads.d_mu + tc_grads.d_z;
    d_lv += tc_grads.d_log_var + 0.5 * tc_grads.d_z.cwiseProduct(sigma_eps);
  }
  model.encoder().backward(enc, Tensor::from_matrix(d_mu), Tensor::from_matrix(d_lv));
  return out;
}

/// Adapter exposing a fixed minibatch objective to finite_difference_check.
class ModelObjective {
 public:
  ModelObjective(Vae& model, BatchObjective job) : model_(&model), job_(std::move(job)) {}

  std::vector<Parameter*> parameters() { return model_->parameters(); }
  double evaluate(BranchSignature* signature) {
    return evaluate_batch(*model_, job_, false, signature).loss.total;
  }
  void accumulate_gradients() { evaluate_batch(*model_, job_, true); }

 private:
  Vae* model_;
  BatchObjective job_;
};

/// Masked-out decoder weights, which must carry an exactly zero gradient.
inline std::function<bool(std::size_t, std::size_t)> masked_weight_predicate(Vae& model) {
  auto params = model.parameters();
  std::vector<std::vector<bool>> zero(params.size());
  for (const auto& layer : model.decoder().layers()) {
    if (layer.spec.kind != LayerKind::MaskedDenseTriangular) continue;
    const RowMatrix mask = triangular_mask(layer.spec);
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (params[k] != &layer.params[0]) continue;
      zero[k].resize(static_cast<std::size_t>(mask.size()));
      for (Eigen::Index e = 0; e < mask.size(); ++e) {
        zero[k][static_cast<std::size_t>(e)] = mask.data()[e] == 0.0;
      }
    }
  }
  return [zero = std::move(zero)](std::size_t p, std::size_t e) {
    return p < zero.size() && e < zero[p].size() && zero[p][e];
  };
}

}  // namespace cpvae
