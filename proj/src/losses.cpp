#include "ahgn/losses.hpp"

#include <cmath>

#include "ahgn/errors.hpp"

namespace ahgn {

LossBundle LossBundle::from_components(double l_ent, double l_qe, double l_cm, double l_cl) {
  LossBundle b;
  b.l_ent = l_ent;
  b.l_qe_surrogate = l_qe;
  b.l_cm = l_cm;
  b.l_cl = l_cl;
  b.total = l_ent + l_qe + l_cm + l_cl;
  return b;
}

Var entropy_loss(Var logit, int label) {
  if (label != 0 && label != 1) throw ContractError("label must be 0 or 1");
  Var loss = softplus(logit);
  return label == 1 ? sub(loss, logit) : loss;
}

ClipLoss clip_loss(const ClipRecord& clip, ParamScope& scope, const TrainConfig& cfg, const NegativeBuffer& buffer,
                   const FrozenDecisions* frozen) {
  ModelConfig model = cfg.model();
  if (frozen) model.halting.fixed_queries = frozen->queries;

  ClipLoss out;
  out.forward = forward(clip, scope, model);

  std::vector<SegmentPair> pairs;
  for (const auto& seg : out.forward.segments) pairs.push_back({seg.subtitle, seg.visual});
  out.cross_modal = loss_cm(pairs, cfg.ot(), frozen ? &frozen->plans : nullptr);
  out.cross_level = loss_cl(out.forward.temporal, buffer, cfg.beta, scope);

  Var ent = entropy_loss(out.forward.prediction.logit, clip.label);
  Var qe = out.forward.queries.efficiency_surrogate;
  const Var terms[] = {ent, qe, out.cross_modal.loss, out.cross_level.loss};
  out.total = sum_all(concat(terms, 1));

  auto& b = out.values;
  b = LossBundle::from_components(ent.item(), qe.item(), out.cross_modal.loss.item(), out.cross_level.loss.item());
  b.l_qe_literal = out.forward.queries.efficiency_literal;
  b.tau = cfg.tau;
  b.alpha = cfg.alpha;
  b.beta = cfg.beta;
  b.lambda = cfg.lambda;

  const std::pair<const char*, double> checks[] = {
      {"l_ent", b.l_ent}, {"l_qe", b.l_qe_surrogate}, {"l_cm", b.l_cm}, {"l_cl", b.l_cl}};
  for (const auto& [name, v] : checks) {
    if (!std::isfinite(v)) {
      throw NumericalError("non-finite loss component " + std::string(name) + " on clip " + clip.clip_id);
    }
  }
  return out;
}

FrozenDecisions freeze(const ClipLoss& loss) {
  FrozenDecisions f;
  f.queries = loss.forward.queries.count;
  for (const auto& c : loss.cross_modal.couplings) f.plans.push_back(c.plan);
  return f;
}

}  // namespace ahgn
