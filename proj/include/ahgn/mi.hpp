#pragma once

#include <cstddef>
#include <deque>
#include <random>
#include <span>
#include <vector>

#include "ahgn/autodiff.hpp"
#include "ahgn/model.hpp"
#include "ahgn/params.hpp"

namespace ahgn {

inline constexpr const char* kDiscriminator = "disc.bilinear";

// Bilinear critic score(t, o) = t W o^T, W is d x d.
void init_discriminator(ParamStore& store, std::size_t d, std::mt19937_64& rng);

// Scores of every candidate row against one global vector: (k x d, 1 x d) -> k x 1.
Var discriminator_scores(Var candidates, Var global, ParamScope& scope);

struct NcePair {
  Var positive;                // t, 1 x d
  Var global;                  // o, 1 x d
  std::vector<Var> negatives;  // t', each 1 x d; never the positive itself
};

// Mean over pairs of score(t, o) - log sum_{t' in {t} U negatives} exp(score(t', o)).
// Throws ContractError on an empty batch or a pair without negatives.
Var nce_estimate(std::span<const NcePair> batch, ParamScope& scope);

// FIFO of detached temporal nodes from earlier accumulation windows.
class NegativeBuffer {
 public:
  explicit NegativeBuffer(std::size_t capacity = 256) : capacity_(capacity) {}

  void push(const Tensor& row);
  void push_rows(const Tensor& rows);
  std::size_t size() const { return rows_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return rows_.empty(); }
  void clear() { rows_.clear(); }
  // All buffered rows stacked into an n x d tensor (empty tensor when n = 0).
  Tensor stacked() const;

 private:
  std::size_t capacity_;
  std::deque<Tensor> rows_;
};

struct PairScore {
  std::size_t query = 0;
  std::size_t segment = 0;
  double positive_score = 0.0;
  double estimate = 0.0;  // I-hat for the pair
  std::size_t candidates = 0;
};

struct CrossLevelLoss {
  Var loss;  // -beta * mean of I-hat over scored pairs; constant 0 if none
  std::vector<PairScore> pairs;
  std::size_t skipped = 0;  // pairs without any negative
};

// Negatives for pair (i, n): every other temporal node of the clip plus the
// buffered nodes. Gradients reach the temporal nodes, the global nodes and the
// discriminator; buffered rows are constants.
CrossLevelLoss loss_cl(std::span<const TemporalState> temporal, const NegativeBuffer& buffer, double beta,
                       ParamScope& scope);

}  // namespace ahgn
