#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "ahgn/model.hpp"
#include "ahgn/ot.hpp"

namespace ahgn {

// Training and model hyperparameters. Defaults for d, epsilon, max_queries,
// tau, lr and effective_batch follow the published implementation details;
// alpha, beta, lambda and the solver settings are local choices.
struct TrainConfig {
  std::size_t d = 512;
  double epsilon = 0.1;
  int max_queries = 5;
  double tau = 0.05;
  double lr = 1e-4;
  std::size_t effective_batch = 128;
  double alpha = 0.1;
  double beta = 0.1;
  double lambda = 0.5;
  int epochs = 30;
  std::uint64_t seed = 0;

  double ot_eps_reg = 0.05;
  int sinkhorn_iters = 200;
  int gw_outer_iters = 10;
  double ot_tol = 1e-6;

  std::string adjacency_norm = "softmax";
  bool use_ger = true;
  bool use_gra = true;
  bool use_temporal = true;
  int fixed_queries = 0;
  std::size_t negative_buffer = 256;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  ModelConfig model() const;
  OTConfig ot() const;
  // Throws ValidationError naming the first offending field.
  void validate() const;
};

nlohmann::json config_to_json(const TrainConfig& cfg);
// Applies the keys of `j` on top of `base`; unknown keys are rejected.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});
TrainConfig load_config_file(const std::string& path, TrainConfig base = {});

}  // namespace ahgn
