#pragma once

#include <map>
#include <random>
#include <string>

#include "gcf/numerics/tape.hpp"

namespace gcf::num {

// Named parameter tensors, iterated in name order.
using ParamSet = std::map<std::string, Tensor>;
using GradMap = std::map<std::string, Tensor>;

// Lazily places parameters on a tape. With `trainable` false the parameters
// enter as constants and no adjoints are recorded.
class ParamBinding {
 public:
  ParamBinding(Tape& tape, const ParamSet& params, bool trainable = true)
      : tape_(tape), params_(params), trainable_(trainable) {}

  Var operator[](const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tape& tape() { return tape_; }
  bool trainable() const { return trainable_; }

  // Gradient of every parameter in the set; unused parameters get zeros.
  GradMap gradients() const;

 private:
  Tape& tape_;
  const ParamSet& params_;
  bool trainable_;
  std::map<std::string, Var> bound_;
};

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

// Sum of `b` into `a`, matching keys; throws ShapeError on mismatch.
void add_into(GradMap& a, const GradMap& b);
void scale_grads(GradMap& g, double factor);
bool all_finite(const GradMap& g);

}  // namespace gcf::num
