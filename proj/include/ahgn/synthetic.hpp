#pragma once

#include <cstdint>
#include <filesystem>

#include "ahgn/dataset.hpp"

namespace ahgn {

// Planted-structure task. Each clip is a sequence of 2-6 segments, one event
// per segment. Frames carry the event code; subtitle tokens carry the event
// code and the segment's position code. A statement is 2-4 clauses
// [event | position] taken from the clip in order. A negative statement either
// swaps the position codes of two clauses or replaces one clause's event with
// an event absent from the clip.
//
// Feature layout (zero padded to the requested widths):
//   frame  [event (16)]
//   token  [event (16) | position (8)]
//   clause [event (16) | position (8)]
// so d_v >= 16 and d_s, d_h >= 24.
//
// `difficulty` scales all noise; 0 gives noiseless features. At 1 frames and
// tokens get N(0, 0.35^2) per coordinate and clauses N(0, 0.1^2).
struct SyntheticOptions {
  std::uint64_t seed = 0;
  std::size_t n_train = 2000;
  std::size_t n_val = 500;
  FeatureDims dims{32, 32, 32};
  double difficulty = 1.0;
  double swap_rate = 0.5;  // share of negatives made by swapping positions rather than replacing an event
};

inline constexpr std::size_t kSyntheticEvents = 16;
inline constexpr std::size_t kSyntheticPositions = 6;
inline constexpr std::size_t kSyntheticEventDim = 16;
inline constexpr std::size_t kSyntheticPositionDim = 8;

struct SyntheticSplits {
  Dataset train;
  Dataset val;
};

std::uint64_t splitmix64(std::uint64_t x);

// Throws ValidationError for widths below the layout minimum or a negative difficulty.
void check_synthetic_options(const SyntheticOptions& opts);

// Clip `index` of a split (0 = train, 1 = val); depends only on (seed, split, index).
// Even indices are positives, so every split of even size is exactly balanced.
ClipRecord synthetic_clip(const SyntheticOptions& opts, int split, std::size_t index);

SyntheticSplits gen_synthetic(const SyntheticOptions& opts);

// Writes <dir>/train.jsonl and <dir>/val.jsonl.
void write_synthetic(const std::filesystem::path& dir, const SyntheticSplits& splits);

}  // namespace ahgn
