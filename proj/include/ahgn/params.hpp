#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ahgn/autodiff.hpp"
#include "ahgn/tensor.hpp"

namespace ahgn {

struct Parameter {
  Tensor value;
  Tensor grad;
};

// Named parameters, iterated in name order.
class ParamStore {
 public:
  void add(const std::string& name, Tensor value);
  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  void add_uniform(const std::string& name, std::size_t rows, std::size_t cols, std::size_t fan_in,
                   std::mt19937_64& rng);

  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);
  const Tensor& grad(const std::string& name) const;

  std::vector<std::string> names() const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Parameter> params_;
};

// Binds parameters of a store onto one tape, creating each leaf at most once.
class ParamScope {
 public:
  ParamScope(Tape& tape, const ParamStore& store) : tape_(tape), store_(store) {}

  Var operator[](const std::string& name);
  Tape& tape() { return tape_; }
  const ParamStore& store() const { return store_; }
  const std::map<std::string, Var>& bound() const { return bound_; }

 private:
  Tape& tape_;
  const ParamStore& store_;
  std::map<std::string, Var> bound_;
};

using GradientMap = std::map<std::string, Tensor>;

// Reverse pass from a scalar loss. Every parameter of the scope's store gets an
// entry; parameters never touched by the forward pass receive zeros.
GradientMap backward(Var loss, ParamScope& scope);

// Adds a gradient map into the store's grad buffers.
void accumulate(ParamStore& store, const GradientMap& grads, double weight = 1.0);

}  // namespace ahgn
