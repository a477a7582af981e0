#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ahgn/config.hpp"
#include "ahgn/graph_builder.hpp"
#include "ahgn/params.hpp"

namespace ahgn {

// Binary layout:
//   "AHGN1" | u64 LE header length | header JSON | f32 LE payload
// The header maps each parameter name to {shape, dtype, offset} (offset in
// bytes from the start of the payload) and carries the config snapshot, the
// feature widths and the RNG state.
inline constexpr char kCheckpointMagic[] = "AHGN1";

struct Checkpoint {
  ParamStore params;
  TrainConfig config;
  FeatureDims dims;
  std::string rng_state;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
// Throws FormatError on a bad magic, truncated data or an inconsistent header.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ahgn
