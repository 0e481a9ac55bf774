#include "gcf/numerics/adam.hpp"

#include <cmath>

#include "gcf/errors.hpp"

namespace gcf::num {

void AdamState::step(ParamSet& params, const GradMap& grads) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ContractError("gradient for unknown parameter '" + name + "'");
    if (!it->second.same_shape(g)) {
      throw ShapeError("gradient " + shape_str(g.shape()) + " vs parameter " + shape_str(it->second.shape()) +
                       " for '" + name + "'");
    }
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(options_.beta1, t);
  const double c2 = 1.0 - std::pow(options_.beta2, t);
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    auto [mit, m_new] = m_.try_emplace(name, Tensor(p.shape(), 0.0));
    auto [vit, v_new] = v_.try_emplace(name, Tensor(p.shape(), 0.0));
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g[i];
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

}  // namespace gcf::num
