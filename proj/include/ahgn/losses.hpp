#pragma once

#include <optional>
#include <vector>

#include "ahgn/config.hpp"
#include "ahgn/mi.hpp"
#include "ahgn/model.hpp"
#include "ahgn/ot.hpp"

namespace ahgn {

struct LossBundle {
  double l_ent = 0.0;
  double l_qe_surrogate = 0.0;
  double l_qe_literal = 0.0;  // tau * N, reported only
  double l_cm = 0.0;
  double l_cl = 0.0;
  double total = 0.0;         // l_ent + l_qe_surrogate + l_cm + l_cl
  double tau = 0.0, alpha = 0.0, beta = 0.0, lambda = 0.0;

  static LossBundle from_components(double l_ent, double l_qe, double l_cm, double l_cl);
};

// Binary cross-entropy on a logit: softplus(z) - y z.
Var entropy_loss(Var logit, int label);

// Discrete decisions held fixed so a loss is a smooth function of the
// parameters: query count and the transport plan of every segment.
struct FrozenDecisions {
  int queries = 0;
  std::vector<Tensor> plans;
};

struct ClipLoss {
  ForwardResult forward;
  CrossModalLoss cross_modal;
  CrossLevelLoss cross_level;
  Var total;
  LossBundle values;
};

// Full objective for one clip. Throws NumericalError naming the first
// non-finite component.
ClipLoss clip_loss(const ClipRecord& clip, ParamScope& scope, const TrainConfig& cfg, const NegativeBuffer& buffer,
                   const FrozenDecisions* frozen = nullptr);

FrozenDecisions freeze(const ClipLoss& loss);

}  // namespace ahgn
