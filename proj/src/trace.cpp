#include "ahgn/trace.hpp"

#include "ahgn/errors.hpp"

namespace ahgn {

using nlohmann::json;

json tensor_to_json(const Tensor& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < t.cols(); ++c) row.push_back(t(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

json vec(const Var& v) { return tensor_to_json(v.value()); }

json gates(const ClipLoss& l) {
  json segs = json::array();
  for (std::size_t i = 0; i < l.forward.segments.size(); ++i) {
    const SegmentTrace& s = l.forward.segments[i];
    json seg = {{"segment", i}};
    if (s.ger.visual_gate.valid()) {
      seg["ger"] = {{"adjacency", vec(s.ger.adjacency)},
                    {"visual_attention", vec(s.ger.visual_attention)},
                    {"subtitle_attention", vec(s.ger.subtitle_attention)},
                    {"visual_gate", vec(s.ger.visual_gate)},
                    {"subtitle_gate", vec(s.ger.subtitle_gate)}};
    }
    if (s.gra.visual_gate.valid()) {
      seg["gra"] = {{"visual_adjacency", vec(s.gra.visual_adjacency)},
                    {"subtitle_adjacency", vec(s.gra.subtitle_adjacency)},
                    {"visual_gate", vec(s.gra.visual_gate)},
                    {"subtitle_gate", vec(s.gra.subtitle_gate)}};
    }
    json pools = json::array();
    for (const auto& p : s.pools) {
      pools.push_back({{"visual_attention", vec(p.visual_attention)},
                       {"subtitle_attention", vec(p.subtitle_attention)},
                       {"gate", vec(p.gate)}});
    }
    seg["pool"] = std::move(pools);
    segs.push_back(std::move(seg));
  }
  return segs;
}

json alignment(const ClipLoss& l) {
  json segs = json::array();
  for (std::size_t i = 0; i < l.cross_modal.couplings.size(); ++i) {
    const Coupling& c = l.cross_modal.couplings[i];
    segs.push_back({{"segment", i},
                    {"plan", tensor_to_json(c.plan)},
                    {"node_cost", tensor_to_json(c.node_cost)},
                    {"distance", c.distance},
                    {"row_residual", c.row_residual},
                    {"col_residual", c.col_residual},
                    {"outer_iterations", c.outer_iterations},
                    {"converged", c.converged}});
  }
  return segs;
}

json queries(const ClipLoss& l) {
  const QueryState& q = l.forward.queries;
  json attention = json::array();
  for (const auto& r : q.attention) attention.push_back(vec(r)[0]);
  json halts = json::array();
  for (const auto& h : q.halts) halts.push_back(h.item());
  return {{"N", q.count},
          {"attention", std::move(attention)},
          {"halting", std::move(halts)},
          {"cumulative", q.cumulative},
          {"remainder", q.remainder.item()}};
}

json temporal(const ClipLoss& l) {
  json per_query = json::array();
  for (std::size_t n = 0; n < l.forward.temporal.size(); ++n) {
    const TemporalState& t = l.forward.temporal[n];
    json fusion = json::array();
    for (const auto& g : t.fusion_gates) fusion.push_back(vec(g)[0]);
    json entry = {{"query", n},
                  {"nodes", vec(t.nodes)},
                  {"pool_weights", vec(t.pool_weights)[0]},
                  {"global", vec(t.global)[0]},
                  {"fusion_gates", std::move(fusion)}};
    if (t.adjacency.valid()) entry["adjacency"] = vec(t.adjacency);
    if (t.gate.valid()) entry["gate"] = vec(t.gate);
    per_query.push_back(std::move(entry));
  }
  json pairs = json::array();
  for (const auto& p : l.cross_level.pairs) {
    pairs.push_back({{"query", p.query},
                     {"segment", p.segment},
                     {"positive_score", p.positive_score},
                     {"estimate", p.estimate},
                     {"candidates", p.candidates}});
  }
  return {{"queries", std::move(per_query)}, {"nce_pairs", std::move(pairs)}};
}

}  // namespace

const std::vector<std::string>& trace_sections() {
  static const std::vector<std::string> names{"gates", "alignment", "queries", "temporal"};
  return names;
}

json trace_section(const ClipLoss& loss, const std::string& section) {
  if (section == "gates") return gates(loss);
  if (section == "alignment") return alignment(loss);
  if (section == "queries") return queries(loss);
  if (section == "temporal") return temporal(loss);
  throw ValidationError("unknown trace section '" + section + "' (expected gates, alignment, queries or temporal)");
}

json trace_all(const ClipLoss& loss) {
  json out = {{"probability", loss.forward.prediction.probability.item()},
              {"logit", loss.forward.prediction.logit.item()}};
  for (const auto& s : trace_sections()) out[s] = trace_section(loss, s);
  return out;
}

}  // namespace ahgn
