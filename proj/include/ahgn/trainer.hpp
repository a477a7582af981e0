#pragma once

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "ahgn/checkpoint.hpp"
#include "ahgn/config.hpp"
#include "ahgn/dataset.hpp"
#include "ahgn/losses.hpp"
#include "ahgn/mi.hpp"
#include "ahgn/optimizer.hpp"

namespace ahgn {

// All model parameters plus the NCE discriminator, initialized from `rng`.
ParamStore init_params(const FeatureDims& dims, std::size_t d, std::mt19937_64& rng);

std::string rng_state(const std::mt19937_64& rng);
std::mt19937_64 rng_from_state(const std::string& state);

struct EpochMetrics {
  int epoch = 0;
  double acc = 0.0;        // validation accuracy when a validation set is given, else training
  double train_acc = 0.0;  // running accuracy of the training forward passes
  LossBundle mean;         // epoch means of the training losses
  double mean_n = 0.0;
  double seconds = 0.0;
};

nlohmann::json metrics_to_json(const EpochMetrics& m);

struct EvalResult {
  double accuracy = 0.0;
  LossBundle mean;
  double mean_n = 0.0;
  std::size_t count = 0;
  std::size_t correct = 0;
};

// Prediction is 1 iff p > 0.5. Throws EmptyInputError for an empty set.
EvalResult evaluate(const Dataset& data, const ParamStore& params, const TrainConfig& cfg);

// Single-owner training loop: per-clip forward/backward, gradient averaged over
// windows of `effective_batch` clips, one Adam step per window.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const FeatureDims& dims);
  // Resumes from existing parameters (for example a loaded checkpoint).
  Trainer(const TrainConfig& cfg, const FeatureDims& dims, ParamStore params, std::mt19937_64 rng);

  // Adds the gradient of one clip's loss, weighted by `weight`, into the
  // store's grad buffers. Returns the clip's loss values.
  ClipLoss accumulate_clip(const ClipRecord& clip, double weight, Tape& tape);
  // Adam step on the accumulated gradient, then clears it and releases the
  // pending temporal nodes into the negative buffer.
  void step();

  EpochMetrics run_epoch(const Dataset& train, const Dataset* validation);

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const TrainConfig& config() const { return cfg_; }
  std::mt19937_64& rng() { return rng_; }
  NegativeBuffer& buffer() { return buffer_; }
  int epochs_done() const { return epoch_; }

  Checkpoint checkpoint() const;

 private:
  TrainConfig cfg_;
  FeatureDims dims_;
  std::mt19937_64 rng_;
  ParamStore params_;
  Adam adam_;
  NegativeBuffer buffer_;
  std::vector<Tensor> pending_negatives_;
  int epoch_ = 0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochMetrics> metrics;
};

TrainResult train(const Dataset& train_set, const Dataset* validation, const TrainConfig& cfg,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace ahgn
