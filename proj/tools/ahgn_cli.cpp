#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "ahgn/checkpoint.hpp"
#include "ahgn/dataset.hpp"
#include "ahgn/errors.hpp"
#include "ahgn/synthetic.hpp"
#include "ahgn/trace.hpp"
#include "ahgn/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Overrides {
  std::optional<std::size_t> d;
  std::optional<double> lr;
  std::optional<std::size_t> batch;
  std::optional<double> alpha, beta, lambda, tau, epsilon;
  std::optional<int> max_queries;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* app) {
    app->add_option("--d", d, "node embedding width (default 512)");
    app->add_option("--lr", lr, "Adam learning rate (default 1e-4)");
    app->add_option("--batch", batch, "clips per optimizer step (default 128)");
    app->add_option("--alpha", alpha, "cross-modal OT loss weight (default 0.1)");
    app->add_option("--beta", beta, "cross-level NCE loss weight (default 0.1)");
    app->add_option("--lambda", lambda, "node-cost weight inside the OT distance (default 0.5)");
    app->add_option("--tau", tau, "query-efficiency weight (default 0.05)");
    app->add_option("--epsilon", epsilon, "halting threshold (default 0.1)");
    app->add_option("--max-queries", max_queries, "query cap N_max (default 5)");
    app->add_option("--seed", seed, "training seed (default 0)");
  }

  void apply(ahgn::TrainConfig& c) const {
    if (d) c.d = *d;
    if (lr) c.lr = *lr;
    if (batch) c.effective_batch = *batch;
    if (alpha) c.alpha = *alpha;
    if (beta) c.beta = *beta;
    if (lambda) c.lambda = *lambda;
    if (tau) c.tau = *tau;
    if (epsilon) c.epsilon = *epsilon;
    if (max_queries) c.max_queries = *max_queries;
    if (seed) c.seed = *seed;
  }
};

// A directory argument resolves to <dir>/<name>.
fs::path data_file(const fs::path& p, const char* name) {
  return fs::is_directory(p) ? p / name : p;
}

void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw ahgn::IoError("no such file: " + p.string());
}

fs::path metrics_path(const fs::path& ckpt) {
  fs::path m = ckpt;
  m.replace_extension(".metrics.jsonl");
  return m;
}

json bundle_json(const ahgn::LossBundle& b) {
  return {{"l_ent", b.l_ent}, {"l_qe_surrogate", b.l_qe_surrogate}, {"l_qe_literal", b.l_qe_literal},
          {"l_cm", b.l_cm},   {"l_cl", b.l_cl},                     {"total", b.total}};
}

int gen_data(const ahgn::SyntheticOptions& opts, const fs::path& out) {
  if (opts.n_train == 0) std::cerr << "warning: --train 0, writing a validation-only set\n";
  const auto splits = ahgn::gen_synthetic(opts);
  ahgn::write_synthetic(out, splits);
  std::cout << json{{"out", out.string()},
                    {"train", splits.train.clips.size()},
                    {"val", splits.val.clips.size()},
                    {"seed", opts.seed},
                    {"difficulty", opts.difficulty}}
                   .dump()
            << "\n";
  return 0;
}

int train(const fs::path& data_dir, const std::optional<fs::path>& config_file, const fs::path& out,
          std::optional<int> epochs, const Overrides& ov) {
  const fs::path train_path = data_file(data_dir, "train.jsonl");
  require_file(train_path);
  ahgn::TrainConfig cfg = config_file ? ahgn::load_config_file(config_file->string()) : ahgn::TrainConfig{};
  ov.apply(cfg);
  if (epochs) cfg.epochs = *epochs;
  cfg.validate();

  const ahgn::Dataset train_set = ahgn::load_dataset(train_path);
  std::optional<ahgn::Dataset> val;
  const fs::path val_path = fs::is_directory(data_dir) ? data_dir / "val.jsonl" : fs::path();
  if (!val_path.empty() && fs::exists(val_path)) val = ahgn::load_dataset(val_path);

  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream metrics(metrics_path(out), std::ios::trunc);
  if (!metrics) throw ahgn::IoError("cannot write metrics: " + metrics_path(out).string());

  ahgn::Trainer trainer(cfg, train_set.dims);
  for (int e = 0; e < cfg.epochs; ++e) {
    const auto m = trainer.run_epoch(train_set, val ? &*val : nullptr);
    const std::string line = ahgn::metrics_to_json(m).dump();
    metrics << line << "\n" << std::flush;
    std::cout << line << "\n" << std::flush;
  }
  ahgn::save_checkpoint(out, trainer.checkpoint());
  std::cerr << "checkpoint written to " << out.string() << "\n";
  return 0;
}

int eval(const fs::path& data, const fs::path& ckpt_path) {
  const fs::path path = data_file(data, "val.jsonl");
  require_file(path);
  require_file(ckpt_path);
  const ahgn::Checkpoint ckpt = ahgn::load_checkpoint(ckpt_path);
  const ahgn::Dataset ds = ahgn::load_dataset(path);
  const auto r = ahgn::evaluate(ds, ckpt.params, ckpt.config);
  json out = {{"accuracy", r.accuracy}, {"count", r.count}, {"correct", r.correct}, {"mean_N", r.mean_n}};
  out.update(bundle_json(r.mean));
  std::cout << out.dump() << "\n";
  return 0;
}

int inspect(const fs::path& data, const fs::path& ckpt_path, const std::string& clip_id, const std::string& dump) {
  const fs::path path = data_file(data, "val.jsonl");
  require_file(path);
  require_file(ckpt_path);
  const ahgn::Checkpoint ckpt = ahgn::load_checkpoint(ckpt_path);
  const ahgn::Dataset ds = ahgn::load_dataset(path);
  const ahgn::ClipRecord& clip = ahgn::find_clip(ds, clip_id);
  ahgn::Tape tape;
  ahgn::ParamScope scope(tape, ckpt.params);
  const ahgn::NegativeBuffer none(0);
  const ahgn::ClipLoss loss = ahgn::clip_loss(clip, scope, ckpt.config, none);
  json out = dump == "all" ? ahgn::trace_all(loss) : ahgn::trace_section(loss, dump);
  std::cout << json{{"clip_id", clip_id}, {"label", clip.label}, {dump, std::move(out)}}.dump() << "\n";
  return 0;
}

int validate(const fs::path& data) {
  const auto report = ahgn::validate_dataset(data);
  json issues = json::array();
  for (const auto& i : report.issues) {
    issues.push_back({{"line", i.line}, {"clip_id", i.clip_id}, {"field", i.field}, {"message", i.message}});
  }
  std::cout << json{{"path", data.string()},
                    {"records", report.records},
                    {"failures", report.failures},
                    {"issues", std::move(issues)}}
                   .dump()
            << "\n";
  return report.ok() ? 0 : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive hierarchical graph network: data generation, training, evaluation and inspection"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "write a synthetic train/val dataset");
  ahgn::SyntheticOptions gen_opts;
  fs::path gen_out;
  gen->add_option("--seed", gen_opts.seed, "generator seed")->capture_default_str();
  gen->add_option("--train", gen_opts.n_train, "training clips")->capture_default_str();
  gen->add_option("--val", gen_opts.n_val, "validation clips")->capture_default_str();
  gen->add_option("--d-v", gen_opts.dims.d_v, "frame feature width (>= 16)")->capture_default_str();
  gen->add_option("--d-s", gen_opts.dims.d_s, "subtitle token width (>= 24)")->capture_default_str();
  gen->add_option("--d-h", gen_opts.dims.d_h, "statement token width (>= 24)")->capture_default_str();
  gen->add_option("--difficulty", gen_opts.difficulty, "noise scale, 0 = noiseless")->capture_default_str();
  gen->add_option("--swap-rate", gen_opts.swap_rate, "share of negatives made by a position swap")
      ->capture_default_str();
  gen->add_option("--out", gen_out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train from <data>/train.jsonl, validating on <data>/val.jsonl if present");
  fs::path train_data, train_out;
  std::optional<fs::path> train_config;
  std::optional<int> train_epochs;
  Overrides overrides;
  tr->add_option("--data", train_data, "dataset directory")->required();
  tr->add_option("--config", train_config, "flat JSON config; flags override it (default: built-in defaults)");
  tr->add_option("--out", train_out, "checkpoint path; metrics go to <stem>.metrics.jsonl beside it")->required();
  tr->add_option("--epochs", train_epochs, "epoch cap (default 30)");
  overrides.add_to(tr);

  auto* ev = app.add_subcommand("eval", "print accuracy and mean losses as JSON");
  fs::path eval_data, eval_ckpt;
  ev->add_option("--data", eval_data, "dataset file, or a directory holding val.jsonl")->required();
  ev->add_option("--ckpt", eval_ckpt, "checkpoint")->required();

  auto* in = app.add_subcommand("inspect", "dump one clip's trace as JSON");
  fs::path in_data, in_ckpt;
  std::string in_clip, in_dump = "all";
  in->add_option("--data", in_data, "dataset file, or a directory holding val.jsonl")->required();
  in->add_option("--ckpt", in_ckpt, "checkpoint")->required();
  in->add_option("--clip", in_clip, "clip id")->required();
  in->add_option("--dump", in_dump, "section")
      ->check(CLI::IsMember({"gates", "alignment", "queries", "temporal", "all"}))
      ->capture_default_str();

  auto* va = app.add_subcommand("validate", "check a dataset file and list malformed records");
  fs::path va_data;
  va->add_option("--data", va_data, "dataset file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return gen_data(gen_opts, gen_out);
    if (*tr) return train(train_data, train_config, train_out, train_epochs, overrides);
    if (*ev) return eval(eval_data, eval_ckpt);
    if (*in) return inspect(in_data, in_ckpt, in_clip, in_dump);
    if (*va) return validate(va_data);
  } catch (const ahgn::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ahgn::DegenerateInputError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ahgn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}
