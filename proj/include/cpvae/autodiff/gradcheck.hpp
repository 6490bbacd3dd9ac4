// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "cpvae/autodiff/sequential.hpp"
#include "cpvae/autodiff/tensor.hpp"

namespace cpvae {

/// A scalar function of a parameter set with a reverse-mode gradient.
template <class T>
concept DifferentiableObjective = requires(T& obj, BranchSignature* sig) {
  { obj.parameters() } -> std::convertible_to<std::vector<Parameter*>>;
  { obj.evaluate(sig) } -> std::convertible_to<double>;
  obj.accumulate_gradients();
};

struct GradCheckOptions {
  double step = 1e-5;
  /// Denominator floor: relative error is |a - f| / max(|a|, |f|, floor). Central
  /// differences at step 1e-5 resolve gradients only down to about this size.
  double scale_floor = 1e-5;
  /// Entries known to be structurally zero (masked weights). They are not perturbed;
  /// instead their analytic gradient must be exactly 0.
  std::function<bool(std::size_t parameter, std::size_t entry)> structural_zero;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_entry = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  std::size_t structural_zeros = 0;
  /// Entries whose central stencil crossed a relu/selu/clamp branch; a one-sided
  /// difference on the side of the unperturbed branch pattern was used instead.
  std::size_t one_sided = 0;
  std::size_t skipped = 0;
};

/// Compares every parameter's reverse-mode gradient against central differences.
template <DifferentiableObjective Objective>
GradCheckReport finite_difference_check(Objective& objective, const GradCheckOptions& options) {
  detail::require(options.step > 0.0, "finite-difference step must be > 0");
  auto params = objective.parameters();
  for (Parameter* p : params) p->zero_grad();
  objective.accumulate_gradients();
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  BranchSignature center_sig;
  const double center = objective.evaluate(&center_sig);

  GradCheckReport report;
  auto record = [&](std::size_t pi, std::size_t e, double a, double f) {
    const double denom = std::max({std::abs(a), std::abs(f), options.scale_floor});
    const double rel = std::abs(a - f) / denom;
    ++report.checked;
    if (report.checked == 1 || rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_parameter = params[pi]->name;
      report.worst_entry = e;
      report.worst_analytic = a;
      report.worst_numeric = f;
    }
  };

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    for (std::size_t e = 0; e < p.value.size(); ++e) {
      const double a = analytic[pi][e];
      if (options.structural_zero && options.structural_zero(pi, e)) {
        ++report.structural_zeros;
        if (a != 0.0) record(pi, e, a, 0.0);
        continue;
      }
      const double original = p.value[e];
      auto eval_at = [&](double delta, BranchSignature& sig) {
        p.value[e] = original + delta;
        const double v = objective.evaluate(&sig);
        p.value[e] = original;
        return v;
      };
      bool done = false;
      double h = options.step;
      for (int attempt = 0; attempt < 3 && !done; ++attempt, h *= 0.1) {
        BranchSignature plus_sig;
        BranchSignature minus_sig;
        const double plus = eval_at(h, plus_sig);
        const double minus = eval_at(-h, minus_sig);
        const bool plus_ok = plus_sig.value() == center_sig.value();
        const bool minus_ok = minus_sig.value() == center_sig.value();
        if (plus_ok && minus_ok) {
          record(pi, e, a, (plus - minus) / (2.0 * h));
          done = true;
        } else if (attempt == 2 && (plus_ok || minus_ok)) {
          ++report.one_sided;
          record(pi, e, a, plus_ok ? (plus - center) / h : (center - minus) / h);
          done = true;
        }
      }
      if (!done) ++report.skipped;
    }
  }
  for (Parameter* p : params) p->zero_grad();
  return report;
}

}  // namespace cpvae
