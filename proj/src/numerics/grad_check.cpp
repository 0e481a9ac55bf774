#include "gcf/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "gcf/errors.hpp"

namespace gcf::num {

namespace {

std::size_t stride_for(std::size_t n, std::size_t max_entries) {
  if (max_entries == 0 || n <= max_entries) return 1;
  return (n + max_entries - 1) / max_entries;
}

void record(GradCheckReport& r, double analytic, double numeric, const GradCheckOptions& o,
            const std::string& name, std::size_t index) {
  const double rel = relative_error(analytic, numeric, o.floor);
  const double abs = std::abs(analytic - numeric);
  ++r.checked;
  r.max_abs_error = std::max(r.max_abs_error, abs);
  if (rel > r.max_rel_error || std::isnan(rel)) {
    r.max_rel_error = rel;
    r.worst_param = name;
    r.worst_index = index;
  }
  if (!(rel < o.tolerance)) r.passed = false;
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, GradCheckOptions options) {
  Tensor analytic;
  {
    Tape tape;
    Var xv = tape.variable(x);
    Var y = f(tape, xv);
    tape.backward(y);
    analytic = tape.grad(xv);
  }
  auto eval = [&](const Tensor& at) {
    Tape tape;
    Var xv = tape.constant(at);
    return f(tape, xv).value().item();
  };
  GradCheckReport report;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); i += stride_for(x.size(), options.max_entries)) {
    const double orig = probe[i];
    probe[i] = orig + options.step;
    const double fp = eval(probe);
    probe[i] = orig - options.step;
    const double fm = eval(probe);
    probe[i] = orig;
    record(report, analytic[i], (fp - fm) / (2.0 * options.step), options, "", i);
  }
  return report;
}

GradCheckReport grad_check_params(const std::function<Var(ParamBinding&)>& f, ParamSet params,
                                  GradCheckOptions options) {
  GradMap analytic;
  {
    Tape tape;
    ParamBinding binding(tape, params, true);
    Var y = f(binding);
    tape.backward(y);
    analytic = binding.gradients();
  }
  auto eval = [&]() {
    Tape tape;
    ParamBinding binding(tape, params, false);
    return f(binding).value().item();
  };
  GradCheckReport report;
  for (auto& [name, tensor] : params) {
    const Tensor& g = analytic.at(name);
    for (std::size_t i = 0; i < tensor.size(); i += stride_for(tensor.size(), options.max_entries)) {
      const double orig = tensor[i];
      tensor[i] = orig + options.step;
      const double fp = eval();
      tensor[i] = orig - options.step;
      const double fm = eval();
      tensor[i] = orig;
      record(report, g[i], (fp - fm) / (2.0 * options.step), options, name, i);
    }
  }
  return report;
}

}  // namespace gcf::num
