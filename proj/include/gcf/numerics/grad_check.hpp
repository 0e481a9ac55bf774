#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "gcf/numerics/params.hpp"

namespace gcf::num {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst_param;  // empty for single-input checks
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool passed = true;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Relative errors use max(|tape|, |fd|, floor) as denominator so that
  // exactly-zero gradients compare on an absolute scale.
  double floor = 1e-6;
  // Entries checked per tensor; 0 checks every entry.
  std::size_t max_entries = 0;
};

double relative_error(double analytic, double numeric, double floor);

// Central differences of a scalar function of one tensor against its tape
// gradient.
GradCheckReport grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x,
                           GradCheckOptions options = {});

// Same, over every tensor of a parameter set.
GradCheckReport grad_check_params(const std::function<Var(ParamBinding&)>& f, ParamSet params,
                                  GradCheckOptions options = {});

}  // namespace gcf::num
