#include "ahgn/optimizer.hpp"

#include <cmath>

namespace ahgn {

void Adam::step(ParamStore& store) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (auto& [name, p] : store) {
    auto [it, inserted] = moments_.try_emplace(name);
    if (inserted) {
      it->second.m = Tensor(p.value.shape(), 0.0);
      it->second.v = Tensor(p.value.shape(), 0.0);
    }
    Tensor& m = it->second.m;
    Tensor& v = it->second.v;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      p.value[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

}  // namespace ahgn
