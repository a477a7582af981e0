#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ahgn/autodiff.hpp"
#include "ahgn/params.hpp"

namespace ahgn {

using Feature = std::vector<double>;

struct FrameNode {
  double t = 0.0;
  Feature feature;
};

struct SubtitleLine {
  double t0 = 0.0;
  double t1 = 0.0;
  std::vector<Feature> tokens;
};

struct ClipRecord {
  std::string clip_id;
  std::vector<FrameNode> frames;
  std::vector<SubtitleLine> subs;
  std::vector<Feature> statement;
  int label = 0;
};

struct FeatureDims {
  std::size_t d_v = 0;
  std::size_t d_s = 0;
  std::size_t d_h = 0;
};

// Assignment of frames and subtitle tokens to segments, before projection.
struct Segmentation {
  struct Span {
    std::size_t line = 0;  // index into the caller's subtitle list
    double t0 = 0.0;
    double t1 = 0.0;      // after overlap clipping
    std::vector<std::size_t> frames;  // indices into the caller's frame list, time ordered
    std::vector<std::size_t> tokens;  // global token ids: running count over all lines in input order
  };
  std::vector<Span> segments;
  std::vector<std::size_t> dropped_lines;  // lines that received no frame
};

// Sorts lines by start time, clips overlaps at the next line's start, assigns
// each frame to the half-open span containing it or, failing that, to the
// span with the nearest midpoint (ties go to the earlier span). Lines left
// without frames are dropped and reported.
Segmentation segment_clip(const std::vector<FrameNode>& frames, const std::vector<SubtitleLine>& subs);

struct Segment {
  Var visual;    // K x d
  Var subtitle;  // L x d
  Segmentation::Span span;
};

struct ClipGraph {
  std::vector<Segment> segments;
  std::vector<std::size_t> dropped_lines;
  std::size_t size() const { return segments.size(); }
};

// Parameter names of the per-modality input projections.
inline constexpr const char* kProjVisual = "proj.visual";
inline constexpr const char* kProjSubtitle = "proj.subtitle";
inline constexpr const char* kProjStatement = "proj.statement";

// Registers `<prefix>.weight` (in x d) and `<prefix>.bias` (1 x d).
void init_projection(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t d,
                     std::mt19937_64& rng);

// tanh(X W + b) applied to each row.
Var project(Var rows, ParamScope& scope, const std::string& prefix);

// Stacks raw feature vectors into an n x width constant on the scope's tape.
Var feature_matrix(Tape& tape, const std::vector<Feature>& rows, std::size_t width);

ClipGraph build_clip_graph(const std::vector<FrameNode>& frames, const std::vector<SubtitleLine>& subs,
                           ParamScope& scope);

}  // namespace ahgn
