#include "ahgn/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ahgn {

namespace {

double evaluate(const LossBuilder& f, const ParamStore& params) {
  Tape tape;
  ParamScope scope(tape, params);
  return f(scope).item();
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const LossBuilder& f, ParamStore& params, const GradCheckOptions& options) {
  GradientMap analytic;
  {
    Tape tape;
    ParamScope scope(tape, params);
    Var loss = f(scope);
    analytic = backward(loss, scope);
  }

  GradCheckReport report;
  for (const auto& name : params.names()) {
    Tensor& value = params.value(name);
    const Tensor& grad = analytic.at(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + options.step;
      const double up = evaluate(f, params);
      value[i] = saved - options.step;
      const double down = evaluate(f, params);
      value[i] = saved;

      const double numeric = (up - down) / (2.0 * options.step);
      const double abs_err = std::abs(grad[i] - numeric);
      const double rel_err = relative_error(grad[i], numeric, options.rel_floor);
      report.max_abs_err = std::max(report.max_abs_err, abs_err);
      if (rel_err > report.max_rel_err || report.coordinates == 0) {
        report.max_rel_err = rel_err;
        report.worst_param = name;
        report.worst_index = i;
        report.worst_analytic = grad[i];
        report.worst_numeric = numeric;
      }
      ++report.coordinates;
    }
  }
  report.passed = report.max_rel_err <= options.tol;
  return report;
}

}  // namespace ahgn
