#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ahgn/autodiff.hpp"
#include "ahgn/graph_builder.hpp"
#include "ahgn/params.hpp"

namespace ahgn {

enum class AdjacencyNorm { kSoftmax, kNone };

AdjacencyNorm parse_adjacency_norm(const std::string& s);
std::string to_string(AdjacencyNorm n);

struct HaltingConfig {
  double epsilon = 0.1;   // stop once cumulative halting probability exceeds 1 - epsilon
  int max_queries = 5;    // N_max
  double tau = 0.05;      // query-efficiency weight
  int fixed_queries = 0;  // > 0 forces exactly this many queries
};

struct ModelConfig {
  std::size_t d = 512;
  HaltingConfig halting;
  AdjacencyNorm adjacency_norm = AdjacencyNorm::kSoftmax;
  bool use_ger = true;
  bool use_gra = true;
  bool use_temporal = true;
};

// Registers every network parameter (projections, message passing, pooling,
// query generation, temporal reasoning, prediction head). The NCE
// discriminator is registered separately by the coherence module.
void init_model_params(ParamStore& store, const FeatureDims& dims, std::size_t d, std::mt19937_64& rng);

// ---- segment level -------------------------------------------------------

struct GerState {
  Var visual, subtitle;     // updated nodes
  Var adjacency;            // K x L raw dot products
  Var visual_attention;     // K x L, rows normalized over subtitle nodes
  Var subtitle_attention;   // L x K, rows normalized over visual nodes
  Var visual_gate, subtitle_gate;
};

struct GraState {
  Var visual, subtitle;
  Var visual_adjacency, subtitle_adjacency;  // normalized K x K, L x L
  Var visual_gate, subtitle_gate;
};

// Gated inter-modal message passing.
GerState ger(Var visual, Var subtitle, ParamScope& scope, AdjacencyNorm norm = AdjacencyNorm::kSoftmax);
// Gated intra-modal message passing.
GraState gra(Var visual, Var subtitle, ParamScope& scope, AdjacencyNorm norm = AdjacencyNorm::kSoftmax);

struct PoolState {
  Var node;                // 1 x d temporal node
  Var visual_attention;    // 1 x K
  Var subtitle_attention;  // 1 x L
  Var gate;                // 1 x d fusion gate
};

PoolState semantic_pool(Var visual, Var subtitle, Var query, ParamScope& scope);

// ---- statement queries ---------------------------------------------------

// Number of queries produced by cumulative halting on a given sequence of
// per-step halting probabilities (the sequence may be longer than needed).
int halting_count(std::span<const double> halts, const HaltingConfig& cfg);

struct HaltingSummary {
  int count = 0;
  std::vector<double> cumulative;
  double remainder = 0.0;  // 1 - P^(N-1), or 1 when N = 1
  double surrogate = 0.0;  // tau * (N + remainder)
  double literal = 0.0;    // tau * N
};

HaltingSummary summarize_halting(std::span<const double> halts, const HaltingConfig& cfg);

struct QueryState {
  Var statement;  // l_h x d
  Var mean;       // g_h
  std::vector<Var> queries;    // q^(1..N), each 1 x d
  std::vector<Var> attention;  // R^(1..N), each 1 x l_h
  std::vector<Var> halts;      // h^(1..N), each 1 x 1
  std::vector<double> cumulative;  // P^(1..N)
  int count = 0;                   // N
  Var remainder;                   // 1 - P^(N-1), or constant 1 when N = 1
  Var efficiency_surrogate;        // tau * (N + remainder)
  double efficiency_literal = 0.0; // tau * N
};

QueryState generate_queries(Var statement, ParamScope& scope, const HaltingConfig& cfg);

// ---- temporal level ------------------------------------------------------

struct TemporalState {
  Var nodes;      // T^(n), M x d
  Var refined;    // M x d
  Var adjacency;  // normalized M x M
  Var gate;       // M x d
  Var pool_weights;  // U^(n), 1 x M
  Var global;        // o_n, 1 x d
  std::vector<Var> fusion_gates;  // gamma per segment
};

struct TemporalReasoning {
  Var refined, adjacency, gate;
};

TemporalReasoning temporal_reason(Var nodes, ParamScope& scope, AdjacencyNorm norm = AdjacencyNorm::kSoftmax);

struct TemporalPool {
  Var weights;  // 1 x M
  Var global;   // 1 x d
};

TemporalPool temporal_pool(Var refined, Var query, ParamScope& scope);

struct Prediction {
  Var logit;
  Var probability;
};

Prediction global_predict(std::span<const Var> globals, ParamScope& scope);

// ---- full pass -----------------------------------------------------------

struct SegmentTrace {
  GerState ger;
  GraState gra;
  Var visual, subtitle;  // refined nodes feeding pooling and the coherence loss
  std::vector<PoolState> pools;  // one per query
};

struct ForwardResult {
  ClipGraph graph;
  std::vector<SegmentTrace> segments;
  QueryState queries;
  std::vector<TemporalState> temporal;  // one per query
  Prediction prediction;
};

ForwardResult forward(const ClipRecord& clip, ParamScope& scope, const ModelConfig& cfg);

}  // namespace ahgn
