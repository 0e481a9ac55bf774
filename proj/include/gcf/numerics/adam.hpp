#pragma once

#include <cstdint>

#include "gcf/numerics/params.hpp"

namespace gcf::num {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam. Moments are created on first use with the shape of
// their parameter.
class AdamState {
 public:
  explicit AdamState(AdamOptions options = {}) : options_(options) {}

  const AdamOptions& options() const { return options_; }
  std::int64_t step_count() const { return step_; }
  const GradMap& first_moment() const { return m_; }
  const GradMap& second_moment() const { return v_; }

  // Applies one update to every parameter that has an entry in `grads`.
  void step(ParamSet& params, const GradMap& grads);

 private:
  AdamOptions options_;
  std::int64_t step_ = 0;
  GradMap m_;
  GradMap v_;
};

inline void adam_step(ParamSet& params, const GradMap& grads, AdamState& state) { state.step(params, grads); }

}  // namespace gcf::num
