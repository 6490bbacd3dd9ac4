// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "cpvae/objective/model_objective.hpp"
#include "cpvae/objective/total_correlation.hpp"
#include "cpvae/trainer/train.hpp"

namespace cpvae {
namespace {

RowMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                          double mean, double sd) {
  std::normal_distribution<double> normal(mean, sd);
  RowMatrix out(rows, cols);
  for (Eigen::Index k = 0; k < out.size(); ++k) out.data()[k] = normal(rng);
  return out;
}

double closed_form_batch_kl(const RowMatrix& mu, const RowMatrix& lv) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < mu.rows(); ++r) {
    LatentStats s;
    for (Eigen::Index c = 0; c < mu.cols(); ++c) {
      s.mu.push_back(mu(r, c));
      s.log_var.push_back(lv(r, c));
    }
    for (double k : gaussian_kl_per_dimension(s)) total += k;
  }
  return total / double(mu.rows());
}

TEST(BernoulliNll, Examples) {
  const std::vector<Spin> x = {1, -1, 1, 1, -1, -1, 1};
  const std::vector<double> half(x.size(), 0.5);
  EXPECT_NEAR(bernoulli_nll(half, x), 7.0 * std::log(2.0), 1e-14);

  std::vector<double> sharp(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) sharp[i] = x[i] > 0 ? 1.0 - 1e-7 : 1e-7;
  EXPECT_NEAR(bernoulli_nll(sharp, x), 7.0 * 1e-7, 1e-12);

  EXPECT_NEAR(bernoulli_nll(std::vector<double>{0.9}, std::vector<Spin>{1}), 0.10536, 1e-5);
  EXPECT_THROW(bernoulli_nll(std::vector<double>{0.5}, x), InvalidInput);
}

TEST(BernoulliNll, SaturatedProbabilitiesAreClamped) {
  const double nll = bernoulli_nll(std::vector<double>{0.0, 1.0}, std::vector<Spin>{1, -1});
  EXPECT_TRUE(std::isfinite(nll));
  EXPECT_NEAR(nll, -2.0 * std::log(kProbabilityFloor), 1e-9);
}

TEST(BernoulliNll, NonNegativeAndMatchesJointCrossEntropy) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> p(12);
    std::vector<Spin> x(12);
    double joint = 1.0;
    for (std::size_t i = 0; i < 12; ++i) {
      p[i] = 0.05 + 0.9 * unit(rng);
      x[i] = coin(rng) ? 1 : -1;
      joint *= x[i] > 0 ? p[i] : 1.0 - p[i];
    }
    const double nll = bernoulli_nll(p, x);
    EXPECT_GE(nll, 0.0);
    EXPECT_NEAR(nll, -std::log(joint), 1e-10);
  }
}

TEST(MseLoss, Examples) {
  const std::vector<Spin> x = {1, -1, -1, 1};
  const std::vector<double> same = {1.0, -1.0, -1.0, 1.0};
  const std::vector<double> zero(4, 0.0);
  const std::vector<double> flipped = {-1.0, 1.0, 1.0, -1.0};
  EXPECT_EQ(mse_loss(same, x), 0.0);
  EXPECT_EQ(mse_loss(zero, x), 1.0);
  EXPECT_EQ(mse_loss(flipped, x), 4.0);
  EXPECT_THROW(mse_loss(std::vector<double>{1.0}, x), InvalidInput);
}

TEST(GaussianKl, Examples) {
  const auto kl = gaussian_kl_per_dimension({{0.0, 1.0}, {0.0, 0.0}});
  EXPECT_EQ(kl[0], 0.0);
  EXPECT_DOUBLE_EQ(kl[1], 0.5);
}

TEST(GaussianKl, MatchesQuadrature) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> mu_dist(-2.0, 2.0);
  std::uniform_real_distribution<double> sd_dist(0.2, 3.0);
  for (int t = 0; t < 20; ++t) {
    const double mu = mu_dist(rng);
    const double sd = sd_dist(rng);
    const double lv = 2.0 * std::log(sd);
    // Composite Simpson over mu +- 14 sd.
    constexpr int kIntervals = 20000;
    const double a = mu - 14.0 * sd;
    const double h = 28.0 * sd / kIntervals;
    double acc = 0.0;
    for (int k = 0; k <= kIntervals; ++k) {
      const double z = a + k * h;
      const double lq = log_normal_density(z, mu, lv);
      const double lp = log_normal_density(z, 0.0, 0.0);
      const double f = std::exp(lq) * (lq - lp);
      acc += f * ((k == 0 || k == kIntervals) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0));
    }
    const double quad = acc * h / 3.0;
    EXPECT_NEAR(gaussian_kl_per_dimension({{mu}, {lv}})[0], quad, 1e-6);
  }
}

TEST(TcEstimator, PriorPosteriorsGiveSmallTerms) {
  std::mt19937_64 rng(3);
  constexpr Eigen::Index kM = 256;
  const RowMatrix mu = RowMatrix::Zero(kM, 5);
  const RowMatrix lv = RowMatrix::Zero(kM, 5);
  const RowMatrix z = gaussian_matrix(kM, 5, rng, 0.0, 1.0);
  const TcTerms t = tc_decomposition_minibatch(mu, lv, z, kM);
  EXPECT_LE(std::abs(t.mutual_information), 0.05);
  EXPECT_LE(std::abs(t.total_correlation), 0.05);
  EXPECT_LE(std::abs(t.dimension_wise_kl), 0.05);
}

TEST(TcEstimator, IdenticalPosteriorsHaveNoMutualInformation) {
  std::mt19937_64 rng(4);
  for (Eigen::Index m : {4, 32, 256}) {
    RowMatrix mu(m, 3);
    RowMatrix lv(m, 3);
    for (Eigen::Index r = 0; r < m; ++r) {
      mu.row(r) << 0.3, -1.1, 2.0;
      lv.row(r) << -0.5, 0.2, -2.0;
    }
    const RowMatrix z = mu.array() + (0.5 * lv.array()).exp() *
                                         gaussian_matrix(m, 3, rng, 0.0, 1.0).array();
    const TcTerms t = tc_decomposition_minibatch(mu, lv, z, std::size_t(m));
    EXPECT_LE(t.mutual_information, std::log(double(m)));
    EXPECT_NEAR(t.mutual_information, 0.0, 1e-12);
  }
}

TEST(TcEstimator, SingleLatentHasZeroTotalCorrelation) {
  std::mt19937_64 rng(5);
  const RowMatrix mu = gaussian_matrix(64, 1, rng, 0.0, 1.0);
  const RowMatrix lv = gaussian_matrix(64, 1, rng, -1.0, 0.5);
  const RowMatrix z = gaussian_matrix(64, 1, rng, 0.0, 1.0);
  EXPECT_EQ(tc_decomposition_minibatch(mu, lv, z, 1000).total_correlation, 0.0);
}

TEST(TcEstimator, RejectsDegenerateBatches) {
  const RowMatrix one = RowMatrix::Zero(1, 3);
  EXPECT_THROW(tc_decomposition_minibatch(one, one, one, 10), InvalidInput);
  const RowMatrix two = RowMatrix::Zero(2, 3);
  EXPECT_THROW(tc_decomposition_minibatch(two, two, two, 1), InvalidInput);
  EXPECT_THROW(tc_decomposition_minibatch(two, RowMatrix::Zero(2, 2), two, 4), InvalidInput);
}

TEST(TcEstimator, SumTracksClosedFormKl) {
  std::mt19937_64 rng(6);
  constexpr Eigen::Index kM = 512;
  for (int trial = 0; trial < 3; ++trial) {
    const RowMatrix mu = gaussian_matrix(kM, 5, rng, 0.0, 0.4);
    const RowMatrix lv = gaussian_matrix(kM, 5, rng, -0.3, 0.2);
    const RowMatrix z =
        mu.array() + (0.5 * lv.array()).exp() * gaussian_matrix(kM, 5, rng, 0.0, 1.0).array();
    const TcTerms t = tc_decomposition_minibatch(mu, lv, z, std::size_t(kM));
    EXPECT_NEAR(t.sum(), closed_form_batch_kl(mu, lv), 0.05) << "trial " << trial;
  }
}

TEST(TcEstimator, VectorOverloadAgreesWithMatrixForm) {
  std::mt19937_64 rng(7);
  const RowMatrix mu = gaussian_matrix(8, 2, rng, 0.0, 1.0);
  const RowMatrix lv = gaussian_matrix(8, 2, rng, 0.0, 0.3);
  const RowMatrix z = gaussian_matrix(8, 2, rng, 0.0, 1.0);
  std::vector<LatentStats> stats;
  std::vector<LatentSample> samples;
  for (Eigen::Index r = 0; r < 8; ++r) {
    stats.push_back({{mu(r, 0), mu(r, 1)}, {lv(r, 0), lv(r, 1)}});
    samples.push_back({{z(r, 0), z(r, 1)}, {}});
  }
  const TcTerms a = tc_decomposition_minibatch(mu, lv, z, 50);
  const TcTerms b = tc_decomposition_minibatch(stats, samples, 50);
  EXPECT_EQ(a.mutual_information, b.mutual_information);
  EXPECT_EQ(a.total_correlation, b.total_correlation);
  EXPECT_EQ(a.dimension_wise_kl, b.dimension_wise_kl);
}

TEST(TcEstimator, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(8);
  const LossWeights w{0.7, 1.3, 0.4};
  RowMatrix mu = gaussian_matrix(6, 3, rng, 0.0, 1.0);
  RowMatrix lv = gaussian_matrix(6, 3, rng, -0.2, 0.4);
  RowMatrix z = gaussian_matrix(6, 3, rng, 0.0, 1.0);
  auto value = [&]() {
    const TcTerms t = tc_decomposition_minibatch(mu, lv, z, 40);
    return w.alpha * t.mutual_information + w.beta * t.total_correlation +
           w.gamma * t.dimension_wise_kl;
  };
  TcGradients g;
  tc_decomposition_minibatch(mu, lv, z, 40, &w, &g);
  constexpr double kStep = 1e-6;
  for (auto [target, grad] : {std::pair{&mu, &g.d_mu}, {&lv, &g.d_log_var}, {&z, &g.d_z}}) {
    for (Eigen::Index k = 0; k < target->size(); ++k) {
      const double orig = target->data()[k];
      target->data()[k] = orig + kStep;
      const double up = value();
      target->data()[k] = orig - kStep;
      const double down = value();
      target->data()[k] = orig;
      EXPECT_NEAR(grad->data()[k], (up - down) / (2.0 * kStep), 1e-6);
    }
  }
}

TEST(TotalObjective, WeightedSum) {
  const LossBreakdown zero = total_objective(Variant::CpVae, 3.5, 0.2, 0.1, 0.7, {}, 0.0);
  EXPECT_EQ(zero.total, 3.5);
  const LossBreakdown b = total_objective(Variant::CpVae, 3.5, 0.2, 0.1, 0.7, {0.1, 30.0, 0.1},
                                          0.15);
  EXPECT_DOUBLE_EQ(b.total, 3.5 + 0.1 * 0.2 + 30.0 * 0.1 + 0.15 * 0.7);
  EXPECT_EQ(b.mutual_information, 0.2);
  const LossBreakdown d = total_objective(Variant::DVae, 0.8, 0.2, 0.1, 0.7, {1.0, 1.0, 1.0}, 1.0);
  EXPECT_EQ(d.total, 0.8);
  EXPECT_EQ(d.total_correlation, 0.0);
  EXPECT_THROW(total_objective(Variant::CpVae, 1.0, 0.0, 0.0, 0.0, {-1.0, 0.0, 0.0}, 0.0),
               InvalidInput);
  EXPECT_THROW(total_objective(Variant::CpVae, 1.0, 0.0, 0.0, 0.0, {0.0, NAN, 0.0}, 0.0),
               InvalidInput);
}

TEST(TotalObjective, PublishedWeightPresets) {
  const TrainConfig nnn = weight_preset("nnn");
  EXPECT_EQ(nnn.weights.alpha, 0.1);
  EXPECT_EQ(nnn.weights.beta, 30.0);
  EXPECT_EQ(nnn.weights.gamma, 0.1);
  EXPECT_EQ(nnn.gamma_max, 0.2);
  const TrainConfig lr = weight_preset("lr");
  EXPECT_EQ(lr.weights.alpha, 0.1);
  EXPECT_EQ(lr.weights.beta, 0.5);
  EXPECT_EQ(lr.weights.gamma, 0.5);
  EXPECT_EQ(lr.gamma_max, 10.0);
}

class FullModelObjective : public ::testing::TestWithParam<Variant> {};

TEST_P(FullModelObjective, ZeroWeightsGiveMeanReconstruction) {
  ModelConfig mc;
  mc.n_sites = 6;
  mc.variant = GetParam();
  Vae model(mc, 5);
  std::mt19937_64 rng(9);
  std::vector<Spin> spins(6 * 4);
  std::bernoulli_distribution coin(0.5);
  for (Spin& s : spins) s = coin(rng) ? 1 : -1;
  const ConfigBatch batch(6, spins);
  BatchObjective job;
  job.batch = &batch;
  job.epsilon = gaussian_matrix(4, Eigen::Index(model.latent_dim()), rng, 0.0, 1.0);
  job.dataset_size = 4;
  const BatchEvaluation eval = evaluate_batch(model, job, false);
  EXPECT_EQ(eval.loss.total, eval.loss.reconstruction_nll);

  const RowMatrix z = eval.mu.array() + (0.5 * eval.log_var.array()).exp() * job.epsilon.array();
  double expected = 0.0;
  if (model.autoregressive()) {
    const RowMatrix p = decode_conditionals_batch(model, z, batch);
    for (std::size_t r = 0; r < 4; ++r) {
      std::vector<double> row(6);
      for (std::size_t i = 0; i < 6; ++i) row[i] = p(Eigen::Index(r), Eigen::Index(i));
      expected += bernoulli_nll(row, batch.row(r));
    }
  } else {
    const RowMatrix r = dvae_decode_batch(model, z);
    for (std::size_t b = 0; b < 4; ++b) {
      std::vector<double> row(6);
      for (std::size_t i = 0; i < 6; ++i) row[i] = r(Eigen::Index(b), Eigen::Index(i));
      expected += mse_loss(row, batch.row(b));
    }
  }
  EXPECT_NEAR(eval.loss.reconstruction_nll, expected / 4.0, 1e-12);
}

TEST_P(FullModelObjective, GradientCheckIncludingTcPath) {
  for (std::uint64_t seed : {1U, 2U}) {
    ModelConfig mc;
    mc.n_sites = 8;
    mc.variant = GetParam();
    Vae model(mc, seed);
    std::mt19937_64 rng(seed + 10);
    std::vector<Spin> spins(8 * 16);
    std::bernoulli_distribution coin(0.5);
    for (Spin& s : spins) s = coin(rng) ? 1 : -1;
    const ConfigBatch batch(8, spins);
    BatchObjective job;
    job.batch = &batch;
    job.epsilon = gaussian_matrix(16, Eigen::Index(model.latent_dim()), rng, 0.0, 1.0);
    job.weights = {1.0, 1.0, 1.0};
    job.gamma_now = 1.0;
    job.dataset_size = 16;
    ModelObjective objective(model, job);
    GradCheckOptions options;
    options.structural_zero = masked_weight_predicate(model);
    const GradCheckReport report = finite_difference_check(objective, options);
    EXPECT_LE(report.max_relative_error, 1e-4)
        << report.worst_parameter << "[" << report.worst_entry << "] analytic "
        << report.worst_analytic << " numeric " << report.worst_numeric;
    if (model.autoregressive()) {
      EXPECT_GT(report.structural_zeros, 0U);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Variants, FullModelObjective,
                         ::testing::Values(Variant::CpVae, Variant::DVae),
                         [](const auto& info) { return to_string(info.param); });

}  // namespace
}  // namespace cpvae
