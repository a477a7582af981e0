#pragma once

#include <functional>
#include <string>

#include "ahgn/params.hpp"

namespace ahgn {

using LossBuilder = std::function<Var(ParamScope&)>;

struct GradCheckOptions {
  double step = 1e-4;
  double tol = 1e-4;
  // Denominator floor of the relative error, so that gradients which are zero
  // up to rounding are compared in absolute terms.
  double rel_floor = 1e-6;
};

struct GradCheckReport {
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
  bool passed = true;
};

// Compares the reverse-mode gradient of `f` against central differences on
// every coordinate of every parameter. `f` must be deterministic; each
// evaluation is recorded on a fresh tape. Parameter values are restored.
GradCheckReport grad_check(const LossBuilder& f, ParamStore& params, const GradCheckOptions& options = {});

double relative_error(double analytic, double numeric, double floor);

}  // namespace ahgn
