#include "gcf/numerics/params.hpp"

#include <cmath>

#include "gcf/errors.hpp"

namespace gcf::num {

Var ParamBinding::operator[](const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const Tensor& t = value(name);
  Var v = trainable_ ? tape_.parameter(t) : tape_.constant_ref(t);
  bound_.emplace(name, v);
  return v;
}

const Tensor& ParamBinding::value(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

GradMap ParamBinding::gradients() const {
  GradMap out;
  for (const auto& [name, t] : params_) {
    auto it = bound_.find(name);
    if (it != bound_.end() && tape_.has_grad(it->second)) {
      out.emplace(name, tape_.grad(it->second));
    } else {
      out.emplace(name, Tensor(t.shape(), 0.0));
    }
  }
  return out;
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  Tensor t({fan_in, fan_out});
  for (double& v : t.data()) v = dist(rng);
  return t;
}

void add_into(GradMap& a, const GradMap& b) {
  for (const auto& [name, g] : b) {
    auto it = a.find(name);
    if (it == a.end()) {
      a.emplace(name, g);
      continue;
    }
    if (!it->second.same_shape(g)) throw ShapeError("gradient shape mismatch for '" + name + "'");
    auto dst = it->second.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

void scale_grads(GradMap& g, double factor) {
  for (auto& [name, t] : g)
    for (double& v : t.data()) v *= factor;
}

bool all_finite(const GradMap& g) {
  for (const auto& [name, t] : g)
    for (double v : t.data())
      if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace gcf::num
