#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "ahgn_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

CliRun ahgn(const std::string& args) {
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd = std::string(AHGN_CLI_PATH) + " " + args + " 2>" + err.string();
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

std::size_t records(const fs::path& p) {
  std::ifstream in(p);
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) lines += !l.empty();
  return lines - 1;  // header
}

json last_json_line(const std::string& s) {
  std::istringstream in(s);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty() && line[0] == '{') last = line;
  return json::parse(last);
}

// Small dataset shared by the tests that need one.
const fs::path& small_data() {
  static const fs::path dir = [] {
    const fs::path d = work_dir() / "small";
    const CliRun r = ahgn("gen-data --seed 3 --train 40 --val 60 --out " + d.string());
    EXPECT_EQ(r.code, 0) << r.err;
    return d;
  }();
  return dir;
}

const fs::path& fresh_checkpoint() {
  static const fs::path ckpt = [] {
    const fs::path c = work_dir() / "fresh.ckpt";
    const CliRun r = ahgn("train --data " + small_data().string() + " --out " + c.string() + " --epochs 0 --d 8");
    EXPECT_EQ(r.code, 0) << r.err;
    return c;
  }();
  return ckpt;
}

void expect_open_unit(const json& j, const std::string& where) {
  if (j.is_number()) {
    EXPECT_GT(j.get<double>(), 0.0) << where;
    EXPECT_LT(j.get<double>(), 1.0) << where;
  } else {
    for (const auto& x : j) expect_open_unit(x, where);
  }
}

void check_gates(const json& j, const std::string& path) {
  if (!j.is_object() && !j.is_array()) return;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = j.is_object() ? it.key() : "";
    if (key.find("gate") != std::string::npos) expect_open_unit(*it, path + "/" + key);
    else check_gates(*it, path + "/" + key);
  }
}

}  // namespace

TEST(Cli, GenDataDefaults) {
  const fs::path d = work_dir() / "defaults";
  const CliRun r = ahgn("gen-data --out " + d.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(records(d / "train.jsonl"), 2000u);
  EXPECT_EQ(records(d / "val.jsonl"), 500u);
  const json summary = json::parse(r.out);
  EXPECT_EQ(summary["train"], 2000);
  EXPECT_EQ(summary["val"], 500);
}

TEST(Cli, GenDataRepeatable) {
  const fs::path a = work_dir() / "rep_a", b = work_dir() / "rep_b";
  ASSERT_EQ(ahgn("gen-data --seed 9 --train 30 --val 10 --out " + a.string()).code, 0);
  ASSERT_EQ(ahgn("gen-data --seed 9 --train 30 --val 10 --out " + b.string()).code, 0);
  EXPECT_EQ(slurp(a / "train.jsonl"), slurp(b / "train.jsonl"));
  EXPECT_EQ(slurp(a / "val.jsonl"), slurp(b / "val.jsonl"));
}

TEST(Cli, GenDataTrainZeroWarns) {
  const fs::path d = work_dir() / "val_only";
  const CliRun r = ahgn("gen-data --train 0 --val 8 --out " + d.string());
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_EQ(records(d / "val.jsonl"), 8u);
}

TEST(Cli, GenDataBadOptionIsValidationError) {
  const CliRun r = ahgn("gen-data --d-v 4 --out " + (work_dir() / "bad").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("d_v"), std::string::npos) << r.err;
}

TEST(Cli, UnknownFlagIsUsageError) {
  EXPECT_EQ(ahgn("gen-data --bogus 1 --out x").code, 1);
  EXPECT_EQ(ahgn("").code, 1);
  EXPECT_EQ(ahgn("train --out x.ckpt").code, 1);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(ahgn("--help").code, 0); }

TEST(Cli, TrainMissingDataNamesPath) {
  const fs::path missing = work_dir() / "no_such_dir";
  const CliRun r = ahgn("train --data " + missing.string() + " --out " + (work_dir() / "m.ckpt").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(missing.string()), std::string::npos) << r.err;
}

TEST(Cli, TrainZeroEpochsWritesInitialCheckpointOnly) {
  const fs::path c = work_dir() / "zero.ckpt";
  const CliRun r = ahgn("train --data " + small_data().string() + " --out " + c.string() + " --epochs 0 --d 8");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(c));
  const fs::path metrics = work_dir() / "zero.metrics.jsonl";
  EXPECT_TRUE(fs::exists(metrics));
  EXPECT_EQ(fs::file_size(metrics), 0u);
}

TEST(Cli, TrainRejectsBadConfig) {
  const fs::path cfg = work_dir() / "bad_config.json";
  std::ofstream(cfg) << R"({"d": 8, "learning_rate": 0.1})";
  const CliRun r = ahgn("train --data " + small_data().string() + " --config " + cfg.string() + " --out " +
                     (work_dir() / "bc.ckpt").string() + " --epochs 0");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("learning_rate"), std::string::npos) << r.err;

  const CliRun neg = ahgn("train --data " + small_data().string() + " --out " + (work_dir() / "bc.ckpt").string() +
                       " --epochs 0 --lr -1");
  EXPECT_EQ(neg.code, 2);
}

TEST(Cli, TrainWritesMetricsLines) {
  const fs::path c = work_dir() / "two.ckpt";
  const fs::path cfg = work_dir() / "two.json";
  std::ofstream(cfg) << R"({"d": 8, "effective_batch": 8, "lr": 0.01})";
  const CliRun r = ahgn("train --data " + small_data().string() + " --config " + cfg.string() + " --out " +
                     c.string() + " --epochs 2");
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(work_dir() / "two.metrics.jsonl");
  int lines = 0;
  for (std::string l; std::getline(in, l);) {
    const json m = json::parse(l);
    EXPECT_EQ(m["epoch"], ++lines);
    for (const char* key : {"acc", "l_ent", "l_qe_surrogate", "l_qe_literal", "l_cm", "l_cl", "mean_N"})
      EXPECT_TRUE(m.contains(key)) << key;
  }
  EXPECT_EQ(lines, 2);
}

TEST(Cli, EvalCorruptCheckpointIsFormatError) {
  const fs::path c = work_dir() / "corrupt.ckpt";
  std::string bytes = slurp(fresh_checkpoint());
  bytes[0] = 'Z';
  std::ofstream(c, std::ios::binary) << bytes;
  const CliRun r = ahgn("eval --data " + small_data().string() + " --ckpt " + c.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("magic"), std::string::npos) << r.err;
}

TEST(Cli, FreshCheckpointIsNearChance) {
  for (int seed : {0, 1, 2}) {
    const fs::path c = work_dir() / ("chance" + std::to_string(seed) + ".ckpt");
    ASSERT_EQ(ahgn("train --data " + small_data().string() + " --out " + c.string() + " --epochs 0 --d 16 --seed " +
                   std::to_string(seed))
                  .code,
              0);
    const CliRun r = ahgn("eval --data " + small_data().string() + " --ckpt " + c.string());
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_EQ(j["count"], 60);
    EXPECT_GE(j["accuracy"].get<double>(), 0.4) << "seed " << seed;
    EXPECT_LE(j["accuracy"].get<double>(), 0.6) << "seed " << seed;
  }
}

TEST(Cli, TrainedCheckpointFitsTrainingSplitAtLeastAsWell) {
  const fs::path c = work_dir() / "fit.ckpt";
  const CliRun t = ahgn("train --data " + small_data().string() + " --out " + c.string() +
                     " --epochs 15 --d 8 --lr 0.01 --batch 4");
  ASSERT_EQ(t.code, 0) << t.err;
  const CliRun on_train = ahgn("eval --data " + (small_data() / "train.jsonl").string() + " --ckpt " + c.string());
  const CliRun on_val = ahgn("eval --data " + small_data().string() + " --ckpt " + c.string());
  ASSERT_EQ(on_train.code, 0);
  ASSERT_EQ(on_val.code, 0);
  EXPECT_GE(json::parse(on_train.out)["accuracy"].get<double>(), json::parse(on_val.out)["accuracy"].get<double>());
}

TEST(Cli, InspectDumpInvariants) {
  const std::string base = "inspect --data " + small_data().string() + " --ckpt " + fresh_checkpoint().string();
  for (int i = 0; i < 5; ++i) {
    const std::string id = "val-" + std::to_string(i);
    const CliRun g = ahgn(base + " --clip " + id + " --dump gates");
    ASSERT_EQ(g.code, 0) << g.err;
    const json gates = json::parse(g.out);
    EXPECT_EQ(gates["clip_id"], id);
    check_gates(gates["gates"], id);

    const json q = json::parse(ahgn(base + " --clip " + id + " --dump queries").out)["queries"];
    EXPECT_GE(q["N"].get<int>(), 1);
    EXPECT_LE(q["N"].get<int>(), 5);
    for (const auto& row : q["attention"]) {
      double s = 0.0;
      for (const auto& x : row) s += x.get<double>();
      EXPECT_NEAR(s, 1.0, 1e-12);
    }

    const json a = json::parse(ahgn(base + " --clip " + id + " --dump alignment").out)["alignment"];
    ASSERT_FALSE(a.empty());
    for (const auto& seg : a) {
      const auto& plan = seg["plan"];
      const double n = static_cast<double>(plan.size()), m = static_cast<double>(plan[0].size());
      const double tol = seg["converged"].get<bool>() ? 1e-6 : 1e-2;
      for (const auto& row : plan) {
        double s = 0.0;
        for (const auto& x : row) s += x.get<double>();
        EXPECT_NEAR(s, 1.0 / n, tol);
      }
      for (std::size_t j = 0; j < plan[0].size(); ++j) {
        double s = 0.0;
        for (const auto& row : plan) s += row[j].get<double>();
        EXPECT_NEAR(s, 1.0 / m, tol);
      }
    }
  }
  const json all = json::parse(ahgn(base + " --clip val-0").out)["all"];
  for (const char* key : {"gates", "alignment", "queries", "temporal", "probability"}) EXPECT_TRUE(all.contains(key));
  EXPECT_TRUE(all["temporal"].contains("nce_pairs"));
}

TEST(Cli, InspectUnknownClip) {
  const CliRun r = ahgn("inspect --data " + small_data().string() + " --ckpt " + fresh_checkpoint().string() +
                     " --clip nope --dump queries");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope"), std::string::npos) << r.err;
  EXPECT_EQ(ahgn("inspect --data " + small_data().string() + " --ckpt " + fresh_checkpoint().string() +
                 " --clip val-0 --dump everything")
                .code,
            1);
}

TEST(Cli, ValidateListsMalformedRecords) {
  const fs::path good = small_data() / "val.jsonl";
  EXPECT_EQ(ahgn("validate --data " + good.string()).code, 0);

  const fs::path bad = work_dir() / "bad.jsonl";
  std::ofstream(bad) << R"({"d_v": 2, "d_s": 2, "d_h": 2})" << "\n"
                     << R"({"clip_id": "a", "frames": [{"t": 0.5, "f": [1, 2]}], "subs": [{"t0": 0, "t1": 1, "tokens": [[1, 2]]}], "statement": [[1, 2]], "label": 1})"
                     << "\n"
                     << R"({"clip_id": "b", "frames": [{"t": 0.5, "f": [1, 2, 3]}], "subs": [{"t0": 0, "t1": 1, "tokens": [[1, 2]]}], "statement": [[1, 2]], "label": 0})"
                     << "\n";
  const CliRun r = ahgn("validate --data " + bad.string());
  EXPECT_EQ(r.code, 2);
  const json report = last_json_line(r.out);
  EXPECT_EQ(report["failures"], 1);
  EXPECT_EQ(report["issues"][0]["clip_id"], "b");
}
