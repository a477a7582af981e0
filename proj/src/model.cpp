#include "ahgn/model.hpp"

#include "ahgn/errors.hpp"

namespace ahgn {

AdjacencyNorm parse_adjacency_norm(const std::string& s) {
  if (s == "softmax") return AdjacencyNorm::kSoftmax;
  if (s == "none") return AdjacencyNorm::kNone;
  throw ValidationError("adjacency_norm must be softmax|none, got '" + s + "'");
}

std::string to_string(AdjacencyNorm n) { return n == AdjacencyNorm::kSoftmax ? "softmax" : "none"; }

void init_model_params(ParamStore& store, const FeatureDims& dims, std::size_t d, std::mt19937_64& rng) {
  init_projection(store, kProjVisual, dims.d_v, d, rng);
  init_projection(store, kProjSubtitle, dims.d_s, d, rng);
  init_projection(store, kProjStatement, dims.d_h, d, rng);

  // Gates read [guidance; node; guidance] -> 3d inputs.
  for (const char* name : {"ger.visual", "ger.subtitle", "gra.visual", "gra.subtitle", "pool.fusion", "temporal.gate"}) {
    store.add_uniform(std::string(name) + ".weight", 3 * d, d, 3 * d, rng);
    store.add_uniform(std::string(name) + ".bias", 1, d, 3 * d, rng);
  }
  store.add_uniform("pool.visual_query", d, d, d, rng);
  store.add_uniform("pool.subtitle_query", d, d, d, rng);

  store.add_uniform("query.attention", 2 * d, d, 2 * d, rng);
  store.add_uniform("query.halt.weight", d, d, d, rng);
  store.add_uniform("query.halt.bias", 1, d, d, rng);

  store.add_uniform("temporal.pool_query", d, d, d, rng);

  store.add_uniform("head.hidden.weight", d, d, d, rng);
  store.add_uniform("head.hidden.bias", 1, d, d, rng);
  store.add_uniform("head.out.weight", d, 1, d, rng);
  store.add_uniform("head.out.bias", 1, 1, d, rng);
}

namespace {

Var normalize_rows(Var scores, AdjacencyNorm norm) {
  return norm == AdjacencyNorm::kSoftmax ? softmax(scores, 1) : scores;
}

// sigma([left; node; right] W + b) for every node row.
Var context_gate(Var left, Var nodes, Var right, ParamScope& scope, const std::string& prefix) {
  const std::size_t n = nodes.rows();
  const Var parts[] = {repeat_rows(left, n), nodes, repeat_rows(right, n)};
  return sigmoid(add_row(matmul(concat(parts, 1), scope[prefix + ".weight"]), scope[prefix + ".bias"]));
}

// Attention of a 1 x d key over node rows, returning (weights 1 x n, pooled 1 x d).
std::pair<Var, Var> attend(Var key, Var nodes) {
  Var weights = softmax(matmul(key, transpose(nodes)), 1);
  return {weights, matmul(weights, nodes)};
}

}  // namespace

GerState ger(Var visual, Var subtitle, ParamScope& scope, AdjacencyNorm norm) {
  if (visual.cols() != subtitle.cols()) {
    throw ShapeError("ger width mismatch: " + shape_str(visual.shape()) + " vs " + shape_str(subtitle.shape()));
  }
  GerState s;
  Var g_v = mean(visual, 0);
  Var g_s = mean(subtitle, 0);
  s.adjacency = matmul(visual, transpose(subtitle));
  s.visual_attention = normalize_rows(s.adjacency, norm);
  s.subtitle_attention = normalize_rows(transpose(s.adjacency), norm);
  Var msg_v = matmul(s.visual_attention, subtitle);
  Var msg_s = matmul(s.subtitle_attention, visual);
  s.visual_gate = context_gate(g_v, visual, g_s, scope, "ger.visual");
  s.subtitle_gate = context_gate(g_s, subtitle, g_v, scope, "ger.subtitle");
  s.visual = gated_mix(visual, msg_v, s.visual_gate);
  s.subtitle = gated_mix(subtitle, msg_s, s.subtitle_gate);
  return s;
}

GraState gra(Var visual, Var subtitle, ParamScope& scope, AdjacencyNorm norm) {
  GraState s;
  Var g_v = mean(visual, 0);
  Var g_s = mean(subtitle, 0);
  s.visual_adjacency = normalize_rows(matmul(visual, transpose(visual)), norm);
  s.subtitle_adjacency = normalize_rows(matmul(subtitle, transpose(subtitle)), norm);
  Var msg_v = matmul(s.visual_adjacency, visual);
  Var msg_s = matmul(s.subtitle_adjacency, subtitle);
  s.visual_gate = context_gate(g_v, visual, g_v, scope, "gra.visual");
  s.subtitle_gate = context_gate(g_s, subtitle, g_s, scope, "gra.subtitle");
  s.visual = gated_mix(visual, msg_v, s.visual_gate);
  s.subtitle = gated_mix(subtitle, msg_s, s.subtitle_gate);
  return s;
}

PoolState semantic_pool(Var visual, Var subtitle, Var query, ParamScope& scope) {
  PoolState s;
  Var g_v = mean(visual, 0);
  Var g_s = mean(subtitle, 0);
  auto [c_v, pooled_v] = attend(matmul(query, scope["pool.visual_query"]), visual);
  auto [c_s, pooled_s] = attend(matmul(query, scope["pool.subtitle_query"]), subtitle);
  s.visual_attention = c_v;
  s.subtitle_attention = c_s;
  s.gate = context_gate(g_v, query, g_s, scope, "pool.fusion");
  s.node = gated_mix(pooled_v, pooled_s, s.gate);
  return s;
}

namespace {

bool should_halt(double cumulative, int step, const HaltingConfig& cfg) {
  if (cfg.fixed_queries > 0) return step >= cfg.fixed_queries;
  return cumulative > 1.0 - cfg.epsilon || step >= cfg.max_queries;
}

}  // namespace

int halting_count(std::span<const double> halts, const HaltingConfig& cfg) {
  double cumulative = 0.0;
  for (std::size_t n = 0; n < halts.size(); ++n) {
    cumulative += halts[n];
    if (should_halt(cumulative, static_cast<int>(n) + 1, cfg)) return static_cast<int>(n) + 1;
  }
  throw ContractError("halting sequence ended before a stop decision");
}

HaltingSummary summarize_halting(std::span<const double> halts, const HaltingConfig& cfg) {
  HaltingSummary s;
  s.count = halting_count(halts, cfg);
  double p = 0.0;
  for (int n = 0; n < s.count; ++n) s.cumulative.push_back(p += halts[static_cast<std::size_t>(n)]);
  s.remainder = s.count == 1 ? 1.0 : 1.0 - s.cumulative[static_cast<std::size_t>(s.count) - 2];
  s.literal = cfg.tau * s.count;
  s.surrogate = cfg.tau * (s.count + s.remainder);
  return s;
}

QueryState generate_queries(Var statement, ParamScope& scope, const HaltingConfig& cfg) {
  if (statement.rows() == 0) throw EmptyInputError("statement has no tokens");
  if (cfg.max_queries < 1) throw ContractError("max_queries must be >= 1");
  if (cfg.fixed_queries < 0) throw ContractError("fixed_queries must be >= 0");

  QueryState s;
  s.statement = statement;
  s.mean = mean(statement, 0);
  Var previous = s.mean;
  const int limit = cfg.fixed_queries > 0 ? cfg.fixed_queries : cfg.max_queries;
  for (int n = 1; n <= limit; ++n) {
    const Var ctx[] = {s.mean, previous};
    auto [weights, query] = attend(matmul(concat(ctx, 1), scope["query.attention"]), statement);
    Var halt = mean_all(sigmoid(add(matmul(query, scope["query.halt.weight"]), scope["query.halt.bias"])));
    s.queries.push_back(query);
    s.attention.push_back(weights);
    s.halts.push_back(halt);
    s.cumulative.push_back((s.cumulative.empty() ? 0.0 : s.cumulative.back()) + halt.item());
    previous = query;
    if (should_halt(s.cumulative.back(), n, cfg)) break;
  }
  s.count = static_cast<int>(s.queries.size());

  Tape& tape = scope.tape();
  if (s.count == 1) {
    s.remainder = tape.constant(Tensor::scalar(1.0));
  } else {
    Var before_last = s.halts.front();
    for (int n = 1; n + 1 < s.count; ++n) before_last = add(before_last, s.halts[static_cast<std::size_t>(n)]);
    s.remainder = one_minus(before_last);
  }
  s.efficiency_surrogate = scale(add_scalar(s.remainder, static_cast<double>(s.count)), cfg.tau);
  s.efficiency_literal = cfg.tau * s.count;
  return s;
}

TemporalReasoning temporal_reason(Var nodes, ParamScope& scope, AdjacencyNorm norm) {
  TemporalReasoning r;
  Var g = mean(nodes, 0);
  r.adjacency = normalize_rows(matmul(nodes, transpose(nodes)), norm);
  Var messages = matmul(r.adjacency, nodes);
  r.gate = context_gate(g, nodes, g, scope, "temporal.gate");
  r.refined = gated_mix(nodes, messages, r.gate);
  return r;
}

TemporalPool temporal_pool(Var refined, Var query, ParamScope& scope) {
  auto [weights, global] = attend(matmul(query, scope["temporal.pool_query"]), refined);
  return {weights, global};
}

Prediction global_predict(std::span<const Var> globals, ParamScope& scope) {
  if (globals.empty()) throw ContractError("global_predict needs at least one global node");
  Var g = mean(stack_rows(globals), 0);
  Var hidden = tanh(add_row(matmul(g, scope["head.hidden.weight"]), scope["head.hidden.bias"]));
  Var logit = add(matmul(hidden, scope["head.out.weight"]), scope["head.out.bias"]);
  return {logit, sigmoid(logit)};
}

ForwardResult forward(const ClipRecord& clip, ParamScope& scope, const ModelConfig& cfg) {
  ForwardResult out;
  out.graph = build_clip_graph(clip.frames, clip.subs, scope);

  for (const auto& seg : out.graph.segments) {
    SegmentTrace trace;
    Var v = seg.visual, s = seg.subtitle;
    if (cfg.use_ger) {
      trace.ger = ger(v, s, scope, cfg.adjacency_norm);
      v = trace.ger.visual;
      s = trace.ger.subtitle;
    }
    if (cfg.use_gra) {
      trace.gra = gra(v, s, scope, cfg.adjacency_norm);
      v = trace.gra.visual;
      s = trace.gra.subtitle;
    }
    trace.visual = v;
    trace.subtitle = s;
    out.segments.push_back(std::move(trace));
  }

  const std::size_t d_h = scope.store().value(std::string(kProjStatement) + ".weight").rows();
  Var statement = project(feature_matrix(scope.tape(), clip.statement, d_h), scope, kProjStatement);
  out.queries = generate_queries(statement, scope, cfg.halting);

  std::vector<Var> globals;
  for (const Var& q : out.queries.queries) {
    TemporalState ts;
    std::vector<Var> nodes;
    for (auto& seg : out.segments) {
      PoolState pool = semantic_pool(seg.visual, seg.subtitle, q, scope);
      nodes.push_back(pool.node);
      ts.fusion_gates.push_back(pool.gate);
      seg.pools.push_back(std::move(pool));
    }
    ts.nodes = stack_rows(nodes);
    if (cfg.use_temporal) {
      TemporalReasoning r = temporal_reason(ts.nodes, scope, cfg.adjacency_norm);
      ts.refined = r.refined;
      ts.adjacency = r.adjacency;
      ts.gate = r.gate;
    } else {
      ts.refined = ts.nodes;
    }
    TemporalPool pool = temporal_pool(ts.refined, q, scope);
    ts.pool_weights = pool.weights;
    ts.global = pool.global;
    globals.push_back(pool.global);
    out.temporal.push_back(std::move(ts));
  }
  out.prediction = global_predict(globals, scope);
  return out;
}

}  // namespace ahgn
