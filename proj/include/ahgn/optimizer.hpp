#pragma once

#include <map>
#include <string>

#include "ahgn/params.hpp"

namespace ahgn {

// Adam with bias correction. Reads the store's grad buffers, does not clear them.
class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& store);
  long steps() const { return steps_; }

 private:
  struct Moments {
    Tensor m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  long steps_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace ahgn
