// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "cpvae/autodiff/tensor.hpp"
#include "cpvae/error.hpp"

namespace cpvae {

struct AdaBeliefOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-16;
};

/// First moment m and belief second moment s, one entry per parameter element.
struct AdaBeliefState {
  std::vector<Tensor> m;
  std::vector<Tensor> s;
  std::size_t step = 0;
};

/// One AdaBelief update. `step_index` is 1-based and drives bias correction.
inline void adabelief_step(const std::vector<Parameter*>& params, AdaBeliefState& state,
                           double lr, std::size_t step_index,
                           const AdaBeliefOptions& options = {}) {
  detail::require(step_index >= 1, "adabelief step index is 1-based");
  detail::require(std::isfinite(lr) && lr >= 0.0, "learning rate must be finite and >= 0");
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.emplace_back(p->value.shape());
      state.s.emplace_back(p->value.shape());
    }
  }
  detail::require(state.m.size() == params.size(), "optimizer state does not match parameters");
  const double b1 = options.beta1;
  const double b2 = options.beta2;
  const double eps = options.epsilon;
  const double t = static_cast<double>(step_index);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    detail::require(p.grad.shape() == p.value.shape() && state.m[k].shape() == p.value.shape(),
                    "gradient or state shape mismatch for " + p.name);
    double* m = state.m[k].data();
    double* s = state.s[k].data();
    const double* g = p.grad.data();
    double* theta = p.value.data();
    for (std::size_t e = 0; e < p.value.size(); ++e) {
      m[e] = b1 * m[e] + (1.0 - b1) * g[e];
      const double dev = g[e] - m[e];
      s[e] = b2 * s[e] + (1.0 - b2) * dev * dev + eps;
      theta[e] -= lr * (m[e] / c1) / (std::sqrt(s[e] / c2) + eps);
    }
  }
  state.step = step_index;
}

/// gamma_min + (gamma_max - gamma_min) * step / total_steps.
inline double gamma_schedule(std::size_t step, std::size_t total_steps, double gamma_min,
                             double gamma_max) {
  detail::require(total_steps > 0, "gamma schedule needs total_steps > 0");
  detail::require(step <= total_steps, "gamma schedule step exceeds total_steps");
  return gamma_min +
         (gamma_max - gamma_min) * static_cast<double>(step) / static_cast<double>(total_steps);
}

}  // namespace cpvae
