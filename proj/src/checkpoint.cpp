#include "ahgn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ahgn/errors.hpp"

namespace ahgn {

using nlohmann::json;

namespace {

constexpr std::size_t kMagicLen = sizeof(kCheckpointMagic) - 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(std::span<const std::uint8_t> b) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

std::uint32_t get_u32(std::span<const std::uint8_t> b) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  json params = json::object();
  std::vector<std::uint8_t> payload;
  for (const auto& [name, p] : ckpt.params) {
    params[name] = {{"shape", p.value.shape()}, {"dtype", "f32"}, {"offset", payload.size()}};
    for (double v : p.value.raw()) put_u32(payload, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  json header = {{"params", std::move(params)},
                 {"config", config_to_json(ckpt.config)},
                 {"dims", {{"d_v", ckpt.dims.d_v}, {"d_s", ckpt.dims.d_s}, {"d_h", ckpt.dims.d_h}}},
                 {"rng", ckpt.rng_state},
                 {"payload_bytes", payload.size()}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + kMagicLen);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagicLen + 8 || std::memcmp(bytes.data(), kCheckpointMagic, kMagicLen) != 0) {
    throw FormatError("not a checkpoint: bad magic (expected AHGN1)");
  }
  const std::uint64_t header_len = get_u64(bytes.subspan(kMagicLen, 8));
  const std::size_t header_start = kMagicLen + 8;
  if (header_len > bytes.size() - header_start) throw FormatError("checkpoint header truncated");
  json header;
  try {
    header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(header_start),
                         bytes.begin() + static_cast<std::ptrdiff_t>(header_start + header_len));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("checkpoint header is not JSON: ") + e.what());
  }
  const auto payload = bytes.subspan(header_start + header_len);

  Checkpoint ckpt;
  try {
    if (header.at("payload_bytes").get<std::size_t>() != payload.size()) {
      throw FormatError("checkpoint payload size does not match header");
    }
    for (const auto& [name, meta] : header.at("params").items()) {
      if (meta.at("dtype").get<std::string>() != "f32") throw FormatError("unsupported dtype for " + name);
      const Shape shape = meta.at("shape").get<Shape>();
      const std::size_t offset = meta.at("offset").get<std::size_t>();
      const std::size_t n = shape_numel(shape);
      if (offset > payload.size() || n * 4 > payload.size() - offset) {
        throw FormatError("parameter " + name + " exceeds payload");
      }
      std::vector<double> data(n);
      for (std::size_t i = 0; i < n; ++i) {
        data[i] = static_cast<double>(std::bit_cast<float>(get_u32(payload.subspan(offset + 4 * i, 4))));
      }
      ckpt.params.add(name, Tensor(shape, std::move(data)));
    }
    ckpt.config = config_from_json(header.at("config"));
    const auto& dims = header.at("dims");
    ckpt.dims = {dims.at("d_v").get<std::size_t>(), dims.at("d_s").get<std::size_t>(), dims.at("d_h").get<std::size_t>()};
    ckpt.rng_state = header.at("rng").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header malformed: ") + e.what());
  } catch (const ValidationError& e) {
    throw FormatError(std::string("checkpoint config invalid: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace ahgn
