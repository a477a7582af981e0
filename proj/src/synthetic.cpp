#include "ahgn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ahgn/errors.hpp"

namespace ahgn {

namespace {

constexpr double kFrameNoise = 0.35;
constexpr double kClauseNoise = 0.1;
constexpr double kOrphanRate = 0.15;

using Basis = std::vector<std::vector<double>>;

// `count` orthogonal vectors of length `dim`, each with norm sqrt(dim).
Basis orthogonal_codes(std::size_t count, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Basis basis;
  while (basis.size() < count) {
    std::vector<double> v(dim);
    for (auto& x : v) x = normal(rng);
    for (const auto& b : basis) {
      const double proj = std::inner_product(v.begin(), v.end(), b.begin(), 0.0) / static_cast<double>(dim);
      for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * b[i];
    }
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norm < 1e-6) continue;
    const double s = std::sqrt(static_cast<double>(dim)) / norm;
    for (auto& x : v) x *= s;
    basis.push_back(std::move(v));
  }
  return basis;
}

struct Codes {
  Basis events;
  Basis positions;
};

Codes make_codes(std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(seed ^ 0xC0DE5ULL));
  Codes c;
  c.events = orthogonal_codes(kSyntheticEvents, kSyntheticEventDim, rng);
  c.positions = orthogonal_codes(kSyntheticPositions, kSyntheticPositionDim, rng);
  return c;
}

Feature compose(std::size_t width, const std::vector<double>& event, const std::vector<double>* position,
                double noise, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Feature f(width, 0.0);
  for (std::size_t i = 0; i < event.size(); ++i) f[i] = event[i];
  if (position) {
    for (std::size_t i = 0; i < position->size(); ++i) f[event.size() + i] = (*position)[i];
  }
  const std::size_t used = event.size() + (position ? position->size() : 0);
  if (noise > 0.0) {
    for (std::size_t i = 0; i < used; ++i) f[i] += noise * normal(rng);
  }
  return f;
}

ClipRecord make_clip(const SyntheticOptions& opts, const Codes& codes, int split, std::size_t index) {
  std::mt19937_64 rng(splitmix64(splitmix64(opts.seed) ^ splitmix64((static_cast<std::uint64_t>(split) << 40) ^ index)));
  auto uniform_int = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const double frame_noise = kFrameNoise * opts.difficulty;
  const double clause_noise = kClauseNoise * opts.difficulty;

  ClipRecord clip;
  clip.clip_id = (split == 0 ? "train-" : "val-") + std::to_string(index);
  clip.label = static_cast<int>(index % 2 == 0);

  const std::size_t m = uniform_int(2, kSyntheticPositions);
  std::vector<std::size_t> events(kSyntheticEvents);
  std::iota(events.begin(), events.end(), 0);
  std::shuffle(events.begin(), events.end(), rng);
  const std::vector<std::size_t> present(events.begin(), events.begin() + static_cast<std::ptrdiff_t>(m));

  std::vector<double> mids;
  double t = uniform(0.0, 0.5);
  for (std::size_t i = 0; i < m; ++i) {
    const double t0 = t;
    const double t1 = t0 + uniform(1.0, 3.0);
    SubtitleLine line{t0, t1, {}};
    const std::size_t n_tokens = uniform_int(2, 4);
    for (std::size_t k = 0; k < n_tokens; ++k) {
      line.tokens.push_back(compose(opts.dims.d_s, codes.events[present[i]], &codes.positions[i], frame_noise, rng));
    }
    clip.subs.push_back(std::move(line));
    const std::size_t n_frames = uniform_int(1, 4);
    for (std::size_t k = 0; k < n_frames; ++k) {
      const double ft = t0 + (t1 - t0) * (static_cast<double>(k) + 0.5) / static_cast<double>(n_frames);
      clip.frames.push_back({ft, compose(opts.dims.d_v, codes.events[present[i]], nullptr, frame_noise, rng)});
    }
    mids.push_back(0.5 * (t0 + t1));
    t = t1 + uniform(0.0, 0.6);
  }

  // Orphan frames fall in gaps or after the last line; they carry the event
  // of the segment with the nearest midpoint.
  if (uniform(0.0, 1.0) < kOrphanRate) {
    const std::size_t after = uniform_int(0, m - 1);
    const double lo = clip.subs[after].t1;
    const double hi = after + 1 < m ? clip.subs[after + 1].t0 : lo + 1.0;
    if (hi - lo > 1e-3) {
      const double ft = uniform(lo, hi);
      std::size_t best = 0;
      for (std::size_t i = 1; i < m; ++i) {
        if (std::abs(mids[i] - ft) < std::abs(mids[best] - ft)) best = i;
      }
      clip.frames.push_back({ft, compose(opts.dims.d_v, codes.events[present[best]], nullptr, frame_noise, rng)});
      std::stable_sort(clip.frames.begin(), clip.frames.end(),
                       [](const FrameNode& a, const FrameNode& b) { return a.t < b.t; });
    }
  }

  const std::size_t n_clauses = std::min(m, uniform_int(2, 4));
  std::vector<std::size_t> chosen(m);
  std::iota(chosen.begin(), chosen.end(), 0);
  std::shuffle(chosen.begin(), chosen.end(), rng);
  chosen.resize(n_clauses);
  std::sort(chosen.begin(), chosen.end());

  std::vector<std::size_t> clause_event;
  std::vector<std::size_t> clause_pos;
  for (std::size_t seg : chosen) {
    clause_event.push_back(present[seg]);
    clause_pos.push_back(seg);
  }
  if (clip.label == 0) {
    const bool swap = uniform(0.0, 1.0) < opts.swap_rate;
    const std::size_t a = uniform_int(0, n_clauses - 1);
    if (swap) {
      std::size_t b = uniform_int(0, n_clauses - 2);
      if (b >= a) ++b;
      std::swap(clause_pos[a], clause_pos[b]);
    } else {
      clause_event[a] = events[uniform_int(m, kSyntheticEvents - 1)];
    }
  }
  for (std::size_t c = 0; c < n_clauses; ++c) {
    clip.statement.push_back(
        compose(opts.dims.d_h, codes.events[clause_event[c]], &codes.positions[clause_pos[c]], clause_noise, rng));
  }
  return clip;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void check_synthetic_options(const SyntheticOptions& opts) {
  const std::size_t text_min = kSyntheticEventDim + kSyntheticPositionDim;
  if (opts.dims.d_v < kSyntheticEventDim) {
    throw ValidationError("synthetic d_v must be >= " + std::to_string(kSyntheticEventDim));
  }
  if (opts.dims.d_s < text_min || opts.dims.d_h < text_min) {
    throw ValidationError("synthetic d_s and d_h must be >= " + std::to_string(text_min));
  }
  if (!(opts.difficulty >= 0.0) || !std::isfinite(opts.difficulty)) {
    throw ValidationError("difficulty must be a finite value >= 0");
  }
  if (!(opts.swap_rate >= 0.0 && opts.swap_rate <= 1.0)) throw ValidationError("swap_rate must lie in [0, 1]");
}

ClipRecord synthetic_clip(const SyntheticOptions& opts, int split, std::size_t index) {
  check_synthetic_options(opts);
  return make_clip(opts, make_codes(opts.seed), split, index);
}

SyntheticSplits gen_synthetic(const SyntheticOptions& opts) {
  check_synthetic_options(opts);
  const Codes codes = make_codes(opts.seed);
  SyntheticSplits out;
  out.train.dims = opts.dims;
  out.val.dims = opts.dims;
  for (std::size_t i = 0; i < opts.n_train; ++i) out.train.clips.push_back(make_clip(opts, codes, 0, i));
  for (std::size_t i = 0; i < opts.n_val; ++i) out.val.clips.push_back(make_clip(opts, codes, 1, i));
  return out;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticSplits& splits) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  write_dataset(dir / "train.jsonl", splits.train);
  write_dataset(dir / "val.jsonl", splits.val);
}

}  // namespace ahgn
