#include "qgen/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "qgen/error.hpp"

namespace qgen::ad {

namespace {

double eval_without_grad(const std::function<Tensor()>& loss_fn) {
  // A throwaway tape shields any tape the caller may have open; its record is
  // dropped unread.
  Tape scratch;
  TapeScope scope(scratch);
  return loss_fn().value();
}

}  // namespace

GradCheckResult finite_diff_check(
    const std::function<Tensor()>& loss_fn,
    const std::vector<std::pair<std::string, Tensor>>& params, double h,
    double tol) {
  if (h <= 0.0) throw ContractError("finite_diff_check: step must be positive");

  for (const auto& entry : params) {
    Tensor p = entry.second;
    p.zero_grad();
  }

  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = loss_fn();
    tape.backward(loss);
  }

  GradCheckResult result;
  for (const auto& entry : params) {
    const std::string& name = entry.first;
    Tensor p = entry.second;  // handle copy, shares the underlying storage
    std::vector<double> analytic(p.size(), 0.0);
    if (p.has_grad()) analytic = p.grad();
    for (std::size_t i = 0; i < p.size(); ++i) {
      double saved = p.data()[i];
      p.data()[i] = saved + h;
      double up = eval_without_grad(loss_fn);
      p.data()[i] = saved - h;
      double down = eval_without_grad(loss_fn);
      p.data()[i] = saved;

      double numeric = (up - down) / (2.0 * h);
      double a = analytic[i];
      double rel = std::abs(a - numeric) /
                   std::max(1.0, std::abs(a) + std::abs(numeric));
      ++result.coords_checked;
      if (rel > result.worst_rel_err) {
        result.worst_rel_err = rel;
        result.worst_param = name;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  result.ok = result.worst_rel_err <= tol;
  return result;
}

}  // namespace qgen::ad
