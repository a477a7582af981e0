#include "ahgn/graph_builder.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>

#include "ahgn/errors.hpp"

namespace ahgn {

Segmentation segment_clip(const std::vector<FrameNode>& frames, const std::vector<SubtitleLine>& subs) {
  if (frames.empty()) throw EmptyInputError("clip has no frames");
  if (subs.empty()) throw EmptyInputError("clip has no subtitle lines");
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!(subs[i].t0 < subs[i].t1)) {
      throw ValidationError("subtitle line " + std::to_string(i) + " has non-positive span [" +
                            std::to_string(subs[i].t0) + ", " + std::to_string(subs[i].t1) + ")");
    }
    if (subs[i].tokens.empty()) throw ValidationError("subtitle line " + std::to_string(i) + " has no tokens");
  }

  // Global token ids follow input line order.
  std::vector<std::size_t> token_base(subs.size(), 0);
  for (std::size_t i = 1; i < subs.size(); ++i) token_base[i] = token_base[i - 1] + subs[i - 1].tokens.size();

  std::vector<std::size_t> order(subs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return subs[a].t0 < subs[b].t0; });

  std::vector<Segmentation::Span> spans;
  std::vector<std::size_t> dropped;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& line = subs[order[k]];
    double t1 = line.t1;
    if (k + 1 < order.size()) t1 = std::min(t1, subs[order[k + 1]].t0);
    if (!(line.t0 < t1)) {
      dropped.push_back(order[k]);  // fully shadowed by the next line
      continue;
    }
    Segmentation::Span span;
    span.line = order[k];
    span.t0 = line.t0;
    span.t1 = t1;
    for (std::size_t j = 0; j < line.tokens.size(); ++j) span.tokens.push_back(token_base[order[k]] + j);
    spans.push_back(std::move(span));
  }

  std::vector<std::size_t> frame_order(frames.size());
  std::iota(frame_order.begin(), frame_order.end(), 0);
  std::stable_sort(frame_order.begin(), frame_order.end(),
                   [&](std::size_t a, std::size_t b) { return frames[a].t < frames[b].t; });

  for (std::size_t f : frame_order) {
    const double t = frames[f].t;
    std::size_t target = spans.size();
    for (std::size_t i = 0; i < spans.size(); ++i) {
      if (t >= spans[i].t0 && t < spans[i].t1) {
        target = i;
        break;
      }
    }
    if (target == spans.size()) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < spans.size(); ++i) {
        const double dist = std::abs(t - 0.5 * (spans[i].t0 + spans[i].t1));
        if (dist < best) {  // strict: ties keep the earlier span
          best = dist;
          target = i;
        }
      }
    }
    spans[target].frames.push_back(f);
  }

  Segmentation out;
  for (auto& span : spans) {
    if (span.frames.empty()) {
      dropped.push_back(span.line);
    } else {
      out.segments.push_back(std::move(span));
    }
  }
  std::sort(dropped.begin(), dropped.end());
  out.dropped_lines = std::move(dropped);
  return out;
}

void init_projection(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t d,
                     std::mt19937_64& rng) {
  store.add_uniform(prefix + ".weight", in, d, in, rng);
  store.add_uniform(prefix + ".bias", 1, d, in, rng);
}

Var project(Var rows, ParamScope& scope, const std::string& prefix) {
  return tanh(add_row(matmul(rows, scope[prefix + ".weight"]), scope[prefix + ".bias"]));
}

Var feature_matrix(Tape& tape, const std::vector<Feature>& rows, std::size_t width) {
  Tensor t({rows.size(), width});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != width) {
      throw ShapeError("feature row " + std::to_string(i) + " has width " + std::to_string(rows[i].size()) +
                       ", expected " + std::to_string(width));
    }
    std::copy(rows[i].begin(), rows[i].end(), t.raw().begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  return tape.constant(std::move(t));
}

ClipGraph build_clip_graph(const std::vector<FrameNode>& frames, const std::vector<SubtitleLine>& subs,
                           ParamScope& scope) {
  Segmentation seg = segment_clip(frames, subs);
  const std::size_t d_v = scope.store().value(std::string(kProjVisual) + ".weight").rows();
  const std::size_t d_s = scope.store().value(std::string(kProjSubtitle) + ".weight").rows();

  ClipGraph graph;
  graph.dropped_lines = seg.dropped_lines;
  for (auto& span : seg.segments) {
    std::vector<Feature> vrows;
    for (std::size_t f : span.frames) vrows.push_back(frames[f].feature);
    const auto& tokens = subs[span.line].tokens;
    Segment s;
    s.visual = project(feature_matrix(scope.tape(), vrows, d_v), scope, kProjVisual);
    s.subtitle = project(feature_matrix(scope.tape(), tokens, d_s), scope, kProjSubtitle);
    s.span = std::move(span);
    graph.segments.push_back(std::move(s));
  }
  return graph;
}

}  // namespace ahgn
