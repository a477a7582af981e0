#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "ahgn/graph_builder.hpp"

namespace ahgn {

struct Dataset {
  FeatureDims dims;
  std::vector<ClipRecord> clips;
};

struct ValidationIssue {
  std::size_t line = 0;  // 1-based line number in the file
  std::string clip_id;
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::size_t records = 0;
  std::size_t failures = 0;  // records with at least one issue
  std::vector<ValidationIssue> issues;
  bool ok() const { return failures == 0; }
};

// JSON Lines: a header {"d_v","d_s","d_h"} then one clip object per line.
nlohmann::json clip_to_json(const ClipRecord& clip);
ClipRecord clip_from_json(const nlohmann::json& j);

// Per-record checks. Malformed records are listed, not fatal; an empty file or
// missing header throws EmptyInputError / FormatError.
ValidationReport validate_dataset(const std::filesystem::path& path);

// Loads a file that validates cleanly; otherwise throws ValidationError whose
// message lists the first issues.
Dataset load_dataset(const std::filesystem::path& path);

void write_dataset(const std::filesystem::path& path, const Dataset& dataset);

const ClipRecord& find_clip(const Dataset& dataset, const std::string& clip_id);

}  // namespace ahgn
