// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "dmgnn/autodiff.hpp"
#include "dmgnn/error.hpp"
#include "dmgnn/params.hpp"

namespace dmgnn {

/// Numeric derivatives use the five-point stencil
/// (−f(x+2h) + 8f(x+h) − 8f(x−h) + f(x−2h)) / 12h, whose O(h⁴) truncation error
/// allows a step large enough to keep roundoff far below 1e-4 relative error
/// even for gradients near 1e-8.
struct GradCheckOptions {
  double eps = 1e-3;
  /// Skip coordinates where central differences at h and 2h disagree, i.e.
  /// the stencil straddles a ReLU kink. Skips are counted, never hidden.
  bool skip_kinks = false;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  /// Max relative error per parameter-name prefix (text before the first '.').
  std::map<std::string, double> per_group;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

inline std::string param_group(const std::string& name) {
  const auto dot = name.find('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

/// Compares the reverse-mode gradient of `loss` against central differences for
/// every scalar parameter. `loss` builds its graph on the given tape and must
/// be deterministic.
inline GradCheckReport finite_diff_check(const std::function<ad::Var(ad::Tape&, ModelParams&)>& loss, ModelParams& params,
                                         const GradCheckOptions& opt = {}) {
  if (!(opt.eps > 0.0)) throw InputError("finite_diff_check: eps must be positive");
  auto evaluate = [&]() {
    ad::Tape tape;
    const double v = loss(tape, params).scalar();
    if (!std::isfinite(v)) throw NumericError("finite_diff_check: loss is not finite");
    return v;
  };

  params.zero_grads();
  {
    ad::Tape tape;
    ad::Var l = loss(tape, params);
    if (!std::isfinite(l.scalar())) throw NumericError("finite_diff_check: loss is not finite");
    tape.backward(l);
  }

  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = params[p];
    const std::string group = param_group(params.name(p));
    double& group_max = report.per_group[group];
    for (std::size_t i = 0; i < t.value.size(); ++i) {
      const double saved = t.value.data[i];
      auto at = [&](double offset) {
        t.value.data[i] = saved + offset;
        const double v = evaluate();
        t.value.data[i] = saved;
        return v;
      };
      const double h = opt.eps;
      const double fp1 = at(h), fm1 = at(-h), fp2 = at(2 * h), fm2 = at(-2 * h);
      const double numeric = (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h);
      if (opt.skip_kinks) {
        const double d1 = (fp1 - fm1) / (2.0 * h);
        const double d2 = (fp2 - fm2) / (4.0 * h);
        if (std::abs(d1 - d2) > 1e-6 + 1e-2 * std::max(std::abs(d1), std::abs(d2))) {
          ++report.skipped;
          continue;
        }
      }
      const double err = relative_error(t.grad.data[i], numeric);
      ++report.checked;
      group_max = std::max(group_max, err);
      if (err >= report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = params.name(p) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace dmgnn
