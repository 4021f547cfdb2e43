#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "qgen/tensor.hpp"

namespace qgen::ad {

struct GradCheckResult {
  bool ok = true;
  double worst_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
};

// Compares reverse-mode gradients of loss_fn against central differences for
// every coordinate of every named parameter. loss_fn must be deterministic
// and must read the parameter tensors themselves, since coordinates are
// perturbed in place and restored afterwards. The relative error of a
// coordinate is |analytic - numeric| / max(1, |analytic| + |numeric|).
GradCheckResult finite_diff_check(
    const std::function<Tensor()>& loss_fn,
    const std::vector<std::pair<std::string, Tensor>>& params, double h = 1e-5,
    double tol = 1e-4);

}  // namespace qgen::ad
