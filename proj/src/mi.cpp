#include "ahgn/mi.hpp"

#include "ahgn/errors.hpp"

namespace ahgn {

void init_discriminator(ParamStore& store, std::size_t d, std::mt19937_64& rng) {
  store.add_uniform(kDiscriminator, d, d, d, rng);
}

Var discriminator_scores(Var candidates, Var global, ParamScope& scope) {
  return matmul(candidates, transpose(matmul(global, transpose(scope[kDiscriminator]))));
}

Var nce_estimate(std::span<const NcePair> batch, ParamScope& scope) {
  if (batch.empty()) throw ContractError("nce_estimate on an empty batch");
  Var total;
  for (const auto& pair : batch) {
    if (pair.negatives.empty()) throw ContractError("NCE pair has no negatives");
    std::vector<Var> rows{pair.positive};
    rows.insert(rows.end(), pair.negatives.begin(), pair.negatives.end());
    Var scores = discriminator_scores(stack_rows(rows), pair.global, scope);
    Var estimate = sub(take_row(scores, 0), log_sum_exp(scores));
    total = total.valid() ? add(total, estimate) : estimate;
  }
  return scale(total, 1.0 / static_cast<double>(batch.size()));
}

void NegativeBuffer::push(const Tensor& row) {
  if (capacity_ == 0) return;
  if (!rows_.empty() && rows_.front().cols() != row.cols()) {
    throw ShapeError("negative buffer width mismatch: " + shape_str(row.shape()));
  }
  rows_.push_back(row);
  while (rows_.size() > capacity_) rows_.pop_front();
}

void NegativeBuffer::push_rows(const Tensor& rows) {
  for (std::size_t i = 0; i < rows.rows(); ++i) push(rows.row_copy(i));
}

Tensor NegativeBuffer::stacked() const {
  if (rows_.empty()) return Tensor{};
  const std::size_t d = rows_.front().cols();
  Tensor out({rows_.size(), d});
  for (std::size_t i = 0; i < rows_.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) = rows_[i][j];
  return out;
}

CrossLevelLoss loss_cl(std::span<const TemporalState> temporal, const NegativeBuffer& buffer, double beta,
                       ParamScope& scope) {
  CrossLevelLoss out;
  Tape& tape = scope.tape();
  if (temporal.empty()) throw ContractError("loss_cl needs at least one query");
  std::vector<Var> blocks;
  for (const auto& ts : temporal) blocks.push_back(ts.nodes);
  if (!buffer.empty()) blocks.push_back(tape.constant(buffer.stacked()));
  Var candidates = concat(blocks, 0);
  const std::size_t total_candidates = candidates.rows();

  Var sum;
  std::size_t offset = 0;
  for (std::size_t n = 0; n < temporal.size(); ++n) {
    const std::size_t m = temporal[n].nodes.rows();
    if (total_candidates < 2) {
      out.skipped += m;
      offset += m;
      continue;
    }
    Var scores = discriminator_scores(candidates, temporal[n].global, scope);
    Var normalizer = log_sum_exp(scores);
    for (std::size_t i = 0; i < m; ++i) {
      Var positive = take_row(scores, offset + i);
      Var estimate = sub(positive, normalizer);
      sum = sum.valid() ? add(sum, estimate) : estimate;
      out.pairs.push_back({n, i, positive.item(), estimate.item(), total_candidates});
    }
    offset += m;
  }
  if (out.pairs.empty()) {
    out.loss = tape.constant(Tensor::scalar(0.0));
    return out;
  }
  out.loss = scale(sum, beta == 0.0 ? 0.0 : -beta / static_cast<double>(out.pairs.size()));
  return out;
}

}  // namespace ahgn
