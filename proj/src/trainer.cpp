#include "ahgn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <sstream>

#include "ahgn/errors.hpp"
#include "ahgn/model.hpp"

namespace ahgn {

ParamStore init_params(const FeatureDims& dims, std::size_t d, std::mt19937_64& rng) {
  ParamStore store;
  init_model_params(store, dims, d, rng);
  init_discriminator(store, d, rng);
  return store;
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

std::mt19937_64 rng_from_state(const std::string& state) {
  std::mt19937_64 rng;
  std::istringstream is(state);
  is >> rng;
  if (!is) throw FormatError("invalid RNG state");
  return rng;
}

nlohmann::json metrics_to_json(const EpochMetrics& m) {
  return {{"epoch", m.epoch},
          {"acc", m.acc},
          {"train_acc", m.train_acc},
          {"l_ent", m.mean.l_ent},
          {"l_qe_surrogate", m.mean.l_qe_surrogate},
          {"l_qe_literal", m.mean.l_qe_literal},
          {"l_cm", m.mean.l_cm},
          {"l_cl", m.mean.l_cl},
          {"total", m.mean.total},
          {"mean_N", m.mean_n},
          {"seconds", m.seconds}};
}

namespace {

struct LossAverager {
  LossBundle sum;
  double queries = 0.0;
  std::size_t n = 0;

  void add(const ClipLoss& l) {
    sum.l_ent += l.values.l_ent;
    sum.l_qe_surrogate += l.values.l_qe_surrogate;
    sum.l_qe_literal += l.values.l_qe_literal;
    sum.l_cm += l.values.l_cm;
    sum.l_cl += l.values.l_cl;
    sum.total += l.values.total;
    sum.tau = l.values.tau;
    sum.alpha = l.values.alpha;
    sum.beta = l.values.beta;
    sum.lambda = l.values.lambda;
    queries += l.forward.queries.count;
    ++n;
  }

  LossBundle mean() const {
    LossBundle m = sum;
    if (n == 0) return m;
    const double k = static_cast<double>(n);
    m.l_ent /= k;
    m.l_qe_surrogate /= k;
    m.l_qe_literal /= k;
    m.l_cm /= k;
    m.l_cl /= k;
    m.total /= k;
    return m;
  }
  double mean_queries() const { return n ? queries / static_cast<double>(n) : 0.0; }
};

bool predicts_positive(const ClipLoss& l) { return l.forward.prediction.probability.item() > 0.5; }

}  // namespace

EvalResult evaluate(const Dataset& data, const ParamStore& params, const TrainConfig& cfg) {
  if (data.clips.empty()) throw EmptyInputError("evaluation set is empty");
  const NegativeBuffer no_negatives(0);
  LossAverager avg;
  EvalResult r;
  for (const auto& clip : data.clips) {
    Tape tape;
    ParamScope scope(tape, params);
    ClipLoss l = clip_loss(clip, scope, cfg, no_negatives);
    avg.add(l);
    if (static_cast<int>(predicts_positive(l)) == clip.label) ++r.correct;
  }
  r.count = data.clips.size();
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.count);
  r.mean = avg.mean();
  r.mean_n = avg.mean_queries();
  return r;
}

Trainer::Trainer(const TrainConfig& cfg, const FeatureDims& dims)
    : cfg_(cfg),
      dims_(dims),
      rng_(cfg.seed),
      adam_(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
      buffer_(cfg.negative_buffer) {
  cfg_.validate();
  params_ = init_params(dims, cfg.d, rng_);
}

Trainer::Trainer(const TrainConfig& cfg, const FeatureDims& dims, ParamStore params, std::mt19937_64 rng)
    : cfg_(cfg),
      dims_(dims),
      rng_(std::move(rng)),
      params_(std::move(params)),
      adam_(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
      buffer_(cfg.negative_buffer) {
  cfg_.validate();
}

ClipLoss Trainer::accumulate_clip(const ClipRecord& clip, double weight, Tape& tape) {
  ParamScope scope(tape, params_);
  ClipLoss l = clip_loss(clip, scope, cfg_, buffer_);
  accumulate(params_, backward(l.total, scope), weight);
  for (const auto& ts : l.forward.temporal) pending_negatives_.push_back(ts.nodes.value());
  return l;
}

void Trainer::step() {
  adam_.step(params_);
  params_.zero_grad();
  for (const auto& rows : pending_negatives_) buffer_.push_rows(rows);
  pending_negatives_.clear();
}

EpochMetrics Trainer::run_epoch(const Dataset& train, const Dataset* validation) {
  if (train.clips.empty()) throw EmptyInputError("training set is empty");
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(train.clips.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);

  LossAverager avg;
  std::size_t correct = 0;
  params_.zero_grad();
  for (std::size_t begin = 0; begin < order.size(); begin += cfg_.effective_batch) {
    const std::size_t end = std::min(order.size(), begin + cfg_.effective_batch);
    const double weight = 1.0 / static_cast<double>(end - begin);
    for (std::size_t k = begin; k < end; ++k) {
      const ClipRecord& clip = train.clips[order[k]];
      Tape tape;
      ClipLoss l = accumulate_clip(clip, weight, tape);
      avg.add(l);
      if (static_cast<int>(predicts_positive(l)) == clip.label) ++correct;
    }
    step();
  }
  ++epoch_;

  EpochMetrics m;
  m.epoch = epoch_;
  m.train_acc = static_cast<double>(correct) / static_cast<double>(train.clips.size());
  m.mean = avg.mean();
  m.mean_n = avg.mean_queries();
  m.acc = validation && !validation->clips.empty() ? evaluate(*validation, params_, cfg_).accuracy : m.train_acc;
  m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return m;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.params = params_;
  c.config = cfg_;
  c.dims = dims_;
  c.rng_state = rng_state(rng_);
  return c;
}

TrainResult train(const Dataset& train_set, const Dataset* validation, const TrainConfig& cfg,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  Trainer trainer(cfg, train_set.dims);
  TrainResult result;
  for (int e = 0; e < cfg.epochs; ++e) {
    EpochMetrics m = trainer.run_epoch(train_set, validation);
    if (on_epoch) on_epoch(m);
    result.metrics.push_back(m);
  }
  result.checkpoint = trainer.checkpoint();
  return result;
}

}  // namespace ahgn
