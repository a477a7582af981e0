#include "ahgn/dataset.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ahgn/errors.hpp"

namespace ahgn {

using nlohmann::json;

json clip_to_json(const ClipRecord& clip) {
  json frames = json::array();
  for (const auto& f : clip.frames) frames.push_back({{"t", f.t}, {"f", f.feature}});
  json subs = json::array();
  for (const auto& s : clip.subs) subs.push_back({{"t0", s.t0}, {"t1", s.t1}, {"tokens", s.tokens}});
  return {{"clip_id", clip.clip_id},
          {"frames", std::move(frames)},
          {"subs", std::move(subs)},
          {"statement", clip.statement},
          {"label", clip.label}};
}

ClipRecord clip_from_json(const json& j) {
  ClipRecord clip;
  clip.clip_id = j.at("clip_id").get<std::string>();
  for (const auto& f : j.at("frames")) clip.frames.push_back({f.at("t").get<double>(), f.at("f").get<Feature>()});
  for (const auto& s : j.at("subs")) {
    clip.subs.push_back({s.at("t0").get<double>(), s.at("t1").get<double>(), s.at("tokens").get<std::vector<Feature>>()});
  }
  clip.statement = j.at("statement").get<std::vector<Feature>>();
  clip.label = j.at("label").get<int>();
  return clip;
}

namespace {

bool is_vector_of_width(const json& v, std::size_t width) {
  if (!v.is_array() || v.size() != width) return false;
  for (const auto& x : v) {
    if (!x.is_number() || !std::isfinite(x.get<double>())) return false;
  }
  return true;
}

FeatureDims parse_header(const std::string& line) {
  json h;
  try {
    h = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("dataset header is not JSON: ") + e.what());
  }
  FeatureDims dims;
  try {
    dims.d_v = h.at("d_v").get<std::size_t>();
    dims.d_s = h.at("d_s").get<std::size_t>();
    dims.d_h = h.at("d_h").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("dataset header must declare d_v, d_s, d_h: ") + e.what());
  }
  if (dims.d_v == 0 || dims.d_s == 0 || dims.d_h == 0) throw FormatError("dataset header widths must be positive");
  return dims;
}

// Appends issues for one record; returns true when the record is clean.
bool check_record(const json& j, const FeatureDims& dims, std::size_t line, std::vector<ValidationIssue>& issues) {
  const std::size_t before = issues.size();
  std::string id = j.is_object() && j.contains("clip_id") && j["clip_id"].is_string() ? j["clip_id"].get<std::string>() : "";
  auto fail = [&](std::string field, std::string msg) { issues.push_back({line, id, std::move(field), std::move(msg)}); };

  if (!j.is_object()) {
    fail("record", "not a JSON object");
    return false;
  }
  if (id.empty()) fail("clip_id", "missing or not a string");

  if (!j.contains("frames") || !j["frames"].is_array() || j["frames"].empty()) {
    fail("frames", "missing or empty");
  } else {
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < j["frames"].size(); ++i) {
      const auto& f = j["frames"][i];
      const std::string where = "frames[" + std::to_string(i) + "]";
      if (!f.is_object() || !f.contains("t") || !f["t"].is_number()) {
        fail(where + ".t", "missing timestamp");
        continue;
      }
      const double t = f["t"].get<double>();
      if (!(t >= 0.0)) fail(where + ".t", "negative timestamp");
      if (t < prev) fail(where + ".t", "timestamps not monotone");
      prev = t;
      if (!f.contains("f") || !is_vector_of_width(f["f"], dims.d_v)) {
        fail(where + ".f", "feature width must equal d_v=" + std::to_string(dims.d_v));
      }
    }
  }

  if (!j.contains("subs") || !j["subs"].is_array() || j["subs"].empty()) {
    fail("subs", "missing or empty");
  } else {
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < j["subs"].size(); ++i) {
      const auto& s = j["subs"][i];
      const std::string where = "subs[" + std::to_string(i) + "]";
      if (!s.is_object() || !s.contains("t0") || !s.contains("t1") || !s["t0"].is_number() || !s["t1"].is_number()) {
        fail(where, "missing t0/t1");
        continue;
      }
      const double t0 = s["t0"].get<double>(), t1 = s["t1"].get<double>();
      if (!(t0 < t1)) fail(where, "requires t0 < t1");
      if (t0 < prev) fail(where + ".t0", "start times not monotone");
      prev = t0;
      if (!s.contains("tokens") || !s["tokens"].is_array() || s["tokens"].empty()) {
        fail(where + ".tokens", "missing or empty");
        continue;
      }
      for (std::size_t k = 0; k < s["tokens"].size(); ++k) {
        if (!is_vector_of_width(s["tokens"][k], dims.d_s)) {
          fail(where + ".tokens[" + std::to_string(k) + "]", "width must equal d_s=" + std::to_string(dims.d_s));
        }
      }
    }
  }

  if (!j.contains("statement") || !j["statement"].is_array() || j["statement"].empty()) {
    fail("statement", "missing or empty");
  } else {
    for (std::size_t k = 0; k < j["statement"].size(); ++k) {
      if (!is_vector_of_width(j["statement"][k], dims.d_h)) {
        fail("statement[" + std::to_string(k) + "]", "width must equal d_h=" + std::to_string(dims.d_h));
      }
    }
  }

  if (!j.contains("label") || !j["label"].is_number_integer() ||
      (j["label"].get<int>() != 0 && j["label"].get<int>() != 1)) {
    fail("label", "must be 0 or 1");
  }
  return issues.size() == before;
}

}  // namespace

ValidationReport validate_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read dataset: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw EmptyInputError("dataset file is empty: " + path.string());
  const FeatureDims dims = parse_header(line);

  ValidationReport report;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ++report.records;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      report.issues.push_back({lineno, "", "record", std::string("malformed JSON: ") + e.what()});
      ++report.failures;
      continue;
    }
    if (!check_record(j, dims, lineno, report.issues)) ++report.failures;
  }
  return report;
}

Dataset load_dataset(const std::filesystem::path& path) {
  const ValidationReport report = validate_dataset(path);
  if (!report.ok()) {
    std::ostringstream os;
    os << path.string() << ": " << report.failures << " invalid record(s)";
    for (std::size_t i = 0; i < report.issues.size() && i < 10; ++i) {
      const auto& is = report.issues[i];
      os << "\n  line " << is.line << " [" << is.clip_id << "] " << is.field << ": " << is.message;
    }
    throw ValidationError(os.str());
  }
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  Dataset ds;
  ds.dims = parse_header(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ds.clips.push_back(clip_from_json(json::parse(line)));
  }
  return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset: " + path.string());
  out << json{{"d_v", dataset.dims.d_v}, {"d_s", dataset.dims.d_s}, {"d_h", dataset.dims.d_h}}.dump() << '\n';
  for (const auto& clip : dataset.clips) out << clip_to_json(clip).dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

const ClipRecord& find_clip(const Dataset& dataset, const std::string& clip_id) {
  for (const auto& c : dataset.clips) {
    if (c.clip_id == clip_id) return c;
  }
  throw LookupError("unknown clip: " + clip_id);
}

}  // namespace ahgn
