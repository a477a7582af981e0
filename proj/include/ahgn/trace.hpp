#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "ahgn/losses.hpp"

namespace ahgn {

nlohmann::json tensor_to_json(const Tensor& t);  // list of rows

// Sections of a clip trace: gates, alignment, queries, temporal.
const std::vector<std::string>& trace_sections();

// JSON view of one section of a finished clip loss. Throws ValidationError
// for an unknown section.
nlohmann::json trace_section(const ClipLoss& loss, const std::string& section);

// Every section keyed by name, plus the prediction.
nlohmann::json trace_all(const ClipLoss& loss);

}  // namespace ahgn
