// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "cpvae/autodiff/tensor.hpp"
#include "cpvae/error.hpp"
#include "cpvae/models/latent.hpp"
#include "cpvae/objective/losses.hpp"

namespace cpvae {

struct TcTerms {
  double mutual_information = 0.0;
  double total_correlation = 0.0;
  double dimension_wise_kl = 0.0;

  double sum() const { return mutual_information + total_correlation + dimension_wise_kl; }
};

/// Gradients of alpha*MI + beta*TC + gamma*dimKL with respect to the batch
/// statistics and the sampled latents, all [M, d].
struct TcGradients {
  RowMatrix d_mu;
  RowMatrix d_log_var;
  RowMatrix d_z;
};

/// Minibatch estimate of the aggregate posterior q(z) = (1/N) sum_k q(z | x_k).
/// The density of z_n under its own input is exact and carries weight 1/N; the
/// remaining N - 1 dataset members are represented by the other M - 1 batch rows.
/// Marginals q(z_j) use the same weights per dimension.
///
/// Rows of `mu`, `log_var` and `z` index the batch; columns index latent dimensions.
inline TcTerms tc_decomposition_minibatch(const RowMatrix& mu, const RowMatrix& log_var,
                                          const RowMatrix& z, std::size_t dataset_size,
                                          const LossWeights* weights = nullptr,
                                          TcGradients* grads = nullptr) {
  const auto m = static_cast<std::size_t>(mu.rows());
  const auto d = static_cast<std::size_t>(mu.cols());
  detail::require(m >= 2, "total-correlation estimator needs a batch of at least 2");
  detail::require(dataset_size >= m, "dataset size must be >= batch size");
  detail::require(log_var.rows() == mu.rows() && z.rows() == mu.rows() &&
                      log_var.cols() == mu.cols() && z.cols() == mu.cols(),
                  "mu, log_var and z must share shape");
  detail::require(d >= 1, "latent dimension must be >= 1");
  detail::require((grads == nullptr) || (weights != nullptr), "gradients need loss weights");

  const double n_data = static_cast<double>(dataset_size);
  const double log_w_self = -std::log(n_data);
  const double log_w_other = std::log((n_data - 1.0) / (n_data * static_cast<double>(m - 1)));

  const auto mm = static_cast<Eigen::Index>(m);
  const auto dd = static_cast<Eigen::Index>(d);
  const double inv_m = 1.0 / static_cast<double>(m);
  // Per-k quantities laid out as rows so they broadcast across a block of n.
  const Eigen::ArrayXXd mu_t = mu.transpose().array();
  const Eigen::ArrayXXd prec_t = (-log_var.array()).exp().matrix().transpose().array();
  const Eigen::ArrayXXd offset_t = (-kHalfLog2Pi - 0.5 * log_var.array()).matrix().transpose().array();

  const bool want_grads = grads != nullptr;
  double a = 0.0;
  double b = 0.0;
  double g = 0.0;
  if (want_grads) {
    a = weights->alpha;
    b = weights->beta;
    g = weights->gamma;
    grads->d_mu = RowMatrix::Zero(mm, dd);
    grads->d_log_var = RowMatrix::Zero(mm, dd);
    grads->d_z = g * inv_m * z;
  }

  detail::CompensatedSum mi;
  detail::CompensatedSum tc;
  detail::CompensatedSum dkl;

  // Rows n are independent, so work proceeds in cache-sized blocks of n.
  constexpr Eigen::Index kBlock = 32;
  std::vector<Eigen::ArrayXXd> diff(d);
  std::vector<Eigen::ArrayXXd> ell(d);
  std::vector<Eigen::ArrayXXd> marg_soft(d);
  Eigen::ArrayXXd joint;
  Eigen::ArrayXXd joint_soft;
  Eigen::ArrayXXd log_w;

  // Row-wise weighted log-sum-exp; `soft` receives the normalized weights.
  auto weighted_lse = [&](const Eigen::ArrayXXd& logits, Eigen::ArrayXXd& soft) {
    soft = logits + log_w;
    const Eigen::ArrayXd hi = soft.rowwise().maxCoeff();
    soft.colwise() -= hi;
    soft = soft.exp();
    const Eigen::ArrayXd s = soft.rowwise().sum();
    soft.colwise() /= s;
    return Eigen::ArrayXd(hi + s.log());
  };

  for (Eigen::Index n0 = 0; n0 < mm; n0 += kBlock) {
    const Eigen::Index rows = std::min(kBlock, mm - n0);
    log_w.setConstant(rows, mm, log_w_other);
    for (Eigen::Index r = 0; r < rows; ++r) log_w(r, n0 + r) = log_w_self;

    // ell[j](n, k) = log N(z_nj; mu_kj, sigma_kj^2)
    joint.setZero(rows, mm);
    for (std::size_t j = 0; j < d; ++j) {
      const auto ji = static_cast<Eigen::Index>(j);
      diff[j] = z.col(ji).segment(n0, rows).array().replicate(1, mm);
      diff[j].rowwise() -= mu_t.row(ji);
      ell[j] = (-0.5 * diff[j].square()).rowwise() * prec_t.row(ji);
      ell[j].rowwise() += offset_t.row(ji);
      joint += ell[j];
    }
    const Eigen::ArrayXd log_q = weighted_lse(joint, joint_soft);
    Eigen::ArrayXd log_q_marg = Eigen::ArrayXd::Zero(rows);
    for (std::size_t j = 0; j < d; ++j) log_q_marg += weighted_lse(ell[j], marg_soft[j]);

    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index n = n0 + r;
      double log_p = 0.0;
      for (Eigen::Index j = 0; j < dd; ++j) log_p += -kHalfLog2Pi - 0.5 * z(n, j) * z(n, j);
      mi += joint(r, n) - log_q(r);
      tc += log_q(r) - log_q_marg(r);
      dkl += log_q_marg(r) - log_p;
    }
    if (!want_grads) continue;

    Eigen::ArrayXXd joint_weight = (b - a) * joint_soft;
    for (Eigen::Index r = 0; r < rows; ++r) joint_weight(r, n0 + r) += a;
    for (std::size_t j = 0; j < d; ++j) {
      const auto ji = static_cast<Eigen::Index>(j);
      const Eigen::ArrayXXd w = inv_m * (joint_weight + (g - b) * marg_soft[j]);
      const Eigen::ArrayXXd scaled = diff[j].rowwise() * prec_t.row(ji);
      const Eigen::ArrayXXd pull = w * scaled;
      grads->d_z.col(ji).segment(n0, rows) -= pull.rowwise().sum().matrix();
      grads->d_mu.col(ji) += pull.colwise().sum().matrix().transpose();
      grads->d_log_var.col(ji) +=
          (w * (0.5 * scaled * diff[j] - 0.5)).colwise().sum().matrix().transpose();
    }
  }
  return {mi.value() * inv_m, tc.value() * inv_m, dkl.value() * inv_m};
}

inline TcTerms tc_decomposition_minibatch(const std::vector<LatentStats>& stats,
                                          const std::vector<LatentSample>& samples,
                                          std::size_t dataset_size) {
  detail::require(stats.size() == samples.size(), "stats and samples must have equal length");
  detail::require(!stats.empty(), "total-correlation estimator needs a batch of at least 2");
  const std::size_t d = stats.front().dim();
  RowMatrix mu(stats.size(), d);
  RowMatrix lv(stats.size(), d);
  RowMatrix z(stats.size(), d);
  for (std::size_t n = 0; n < stats.size(); ++n) {
    detail::require(stats[n].dim() == d && stats[n].log_var.size() == d &&
                        samples[n].z.size() == d,
                    "inconsistent latent dimensions in batch");
    for (std::size_t j = 0; j < d; ++j) {
      const auto r = static_cast<Eigen::Index>(n);
      const auto c = static_cast<Eigen::Index>(j);
      mu(r, c) = stats[n].mu[j];
      lv(r, c) = stats[n].log_var[j];
      z(r, c) = samples[n].z[j];
    }
  }
  return tc_decomposition_minibatch(mu, lv, z, dataset_size);
}

}  // namespace cpvae
