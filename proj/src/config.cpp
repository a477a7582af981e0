#include "ahgn/config.hpp"

#include <fstream>

#include "ahgn/errors.hpp"

namespace ahgn {

using nlohmann::json;

ModelConfig TrainConfig::model() const {
  ModelConfig m;
  m.d = d;
  m.halting = HaltingConfig{epsilon, max_queries, tau, fixed_queries};
  m.adjacency_norm = parse_adjacency_norm(adjacency_norm);
  m.use_ger = use_ger;
  m.use_gra = use_gra;
  m.use_temporal = use_temporal;
  return m;
}

OTConfig TrainConfig::ot() const {
  return OTConfig{lambda, alpha, ot_eps_reg, sinkhorn_iters, gw_outer_iters, ot_tol};
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("invalid config: ") + what);
  };
  require(d > 0, "d must be positive");
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
  require(max_queries >= 1, "max_queries must be >= 1");
  require(fixed_queries >= 0 && fixed_queries <= max_queries, "fixed_queries must lie in [0, max_queries]");
  require(tau >= 0.0, "tau must be nonnegative");
  require(lr >= 0.0, "lr must be nonnegative");
  require(effective_batch >= 1, "effective_batch must be >= 1");
  require(alpha >= 0.0 && beta >= 0.0 && lambda >= 0.0, "alpha, beta, lambda must be nonnegative");
  require(epochs >= 0, "epochs must be nonnegative");
  require(ot_eps_reg > 0.0, "ot_eps_reg must be positive");
  require(sinkhorn_iters >= 1 && gw_outer_iters >= 1, "solver iteration caps must be >= 1");
  require(ot_tol > 0.0, "ot_tol must be positive");
  require(adjacency_norm == "softmax" || adjacency_norm == "none", "adjacency_norm must be softmax|none");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0,
          "adam parameters out of range");
}

json config_to_json(const TrainConfig& c) {
  return {{"d", c.d},
          {"epsilon", c.epsilon},
          {"max_queries", c.max_queries},
          {"tau", c.tau},
          {"lr", c.lr},
          {"effective_batch", c.effective_batch},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"lambda", c.lambda},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"ot_eps_reg", c.ot_eps_reg},
          {"sinkhorn_iters", c.sinkhorn_iters},
          {"gw_outer_iters", c.gw_outer_iters},
          {"ot_tol", c.ot_tol},
          {"adjacency_norm", c.adjacency_norm},
          {"use_ger", c.use_ger},
          {"use_gra", c.use_gra},
          {"use_temporal", c.use_temporal},
          {"fixed_queries", c.fixed_queries},
          {"negative_buffer", c.negative_buffer},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps}};
}

TrainConfig config_from_json(const json& j, TrainConfig base) {
  if (!j.is_object()) throw ValidationError("config must be a flat JSON object");
  json merged = config_to_json(base);
  for (const auto& [key, value] : j.items()) {
    if (!merged.contains(key)) throw ValidationError("unknown config key: " + key);
    if (value.type() != merged[key].type() &&
        !(value.is_number() && merged[key].is_number())) {
      throw ValidationError("config key '" + key + "' has the wrong type");
    }
    merged[key] = value;
  }
  TrainConfig c;
  try {
    c.d = merged.at("d").get<std::size_t>();
    c.epsilon = merged.at("epsilon").get<double>();
    c.max_queries = merged.at("max_queries").get<int>();
    c.tau = merged.at("tau").get<double>();
    c.lr = merged.at("lr").get<double>();
    c.effective_batch = merged.at("effective_batch").get<std::size_t>();
    c.alpha = merged.at("alpha").get<double>();
    c.beta = merged.at("beta").get<double>();
    c.lambda = merged.at("lambda").get<double>();
    c.epochs = merged.at("epochs").get<int>();
    c.seed = merged.at("seed").get<std::uint64_t>();
    c.ot_eps_reg = merged.at("ot_eps_reg").get<double>();
    c.sinkhorn_iters = merged.at("sinkhorn_iters").get<int>();
    c.gw_outer_iters = merged.at("gw_outer_iters").get<int>();
    c.ot_tol = merged.at("ot_tol").get<double>();
    c.adjacency_norm = merged.at("adjacency_norm").get<std::string>();
    c.use_ger = merged.at("use_ger").get<bool>();
    c.use_gra = merged.at("use_gra").get<bool>();
    c.use_temporal = merged.at("use_temporal").get<bool>();
    c.fixed_queries = merged.at("fixed_queries").get<int>();
    c.negative_buffer = merged.at("negative_buffer").get<std::size_t>();
    c.adam_beta1 = merged.at("adam_beta1").get<double>();
    c.adam_beta2 = merged.at("adam_beta2").get<double>();
    c.adam_eps = merged.at("adam_eps").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_config_file(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, base);
}

}  // namespace ahgn
