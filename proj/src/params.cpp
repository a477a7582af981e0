#include "ahgn/params.hpp"

#include <cmath>

#include "ahgn/errors.hpp"

namespace ahgn {

void ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter name: " + name);
  Tensor grad(value.shape(), 0.0);
  params_.emplace(name, Parameter{std::move(value), std::move(grad)});
}

void ParamStore::add_uniform(const std::string& name, std::size_t rows, std::size_t cols, std::size_t fan_in,
                             std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t({rows, cols});
  for (auto& v : t.raw()) v = dist(rng);
  add(name, std::move(t));
}

Tensor& ParamStore::value(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw LookupError("unknown parameter: " + name);
  return it->second.value;
}

const Tensor& ParamStore::value(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw LookupError("unknown parameter: " + name);
  return it->second.value;
}

Tensor& ParamStore::grad(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw LookupError("unknown parameter: " + name);
  return it->second.grad;
}

const Tensor& ParamStore::grad(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw LookupError("unknown parameter: " + name);
  return it->second.grad;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.fill(0.0);
}

Var ParamScope::operator[](const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Var v = tape_.leaf(store_.value(name));
  bound_.emplace(name, v);
  return v;
}

GradientMap backward(Var loss, ParamScope& scope) {
  Tape& tape = scope.tape();
  tape.backward(loss);
  GradientMap out;
  for (const auto& [name, p] : scope.store()) {
    auto it = scope.bound().find(name);
    if (it != scope.bound().end() && tape.has_grad(it->second.id())) {
      out.emplace(name, tape.grad(it->second.id()));
    } else {
      out.emplace(name, Tensor(p.value.shape(), 0.0));
    }
  }
  return out;
}

void accumulate(ParamStore& store, const GradientMap& grads, double weight) {
  for (const auto& [name, g] : grads) {
    Tensor& dst = store.grad(name);
    if (dst.shape() != g.shape()) {
      throw ShapeError("gradient shape " + shape_str(g.shape()) + " does not match parameter " + name);
    }
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += weight * g[i];
  }
}

}  // namespace ahgn
