#pragma once

// Binary tensor (.skt) and Kronecker sequence (.sks) files.
//
//   magic (4 bytes) | version (1 byte) | header_len (u32 LE) | JSON header | payload
//
// .skt: magic "SKTN", header {"dtype":"f64","shape":[...]}, row-major f64 LE.
// .sks: magic "SKSQ", header {"S","N","ranks","factor_shapes","layout":"branch-major"},
//       factors 1..S concatenated, each row-major with its leading branch axis.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sekron/decompose.hpp"
#include "sekron/error.hpp"
#include "sekron/tensor.hpp"

namespace sekron {

inline constexpr std::string_view kTensorMagic = "SKTN";
inline constexpr std::string_view kSequenceMagic = "SKSQ";
inline constexpr std::uint8_t kFormatVersion = 1;

namespace detail {

using Bytes = std::vector<std::uint8_t>;

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f64(Bytes& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

inline double get_f64(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

inline Bytes frame(std::string_view magic, const nlohmann::json& header, std::span<const double> payload) {
  const std::string text = header.dump();
  Bytes out(magic.begin(), magic.end());
  out.push_back(kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + 8 * payload.size());
  for (double v : payload) put_f64(out, v);
  return out;
}

struct Frame {
  nlohmann::json header;
  const std::uint8_t* payload = nullptr;
  std::size_t payload_bytes = 0;
};

inline Frame unframe(std::span<const std::uint8_t> bytes, std::string_view magic) {
  require(bytes.size() >= 4 && std::memcmp(bytes.data(), magic.data(), 4) == 0, ErrorCode::kBadMagic,
          "expected \"" + std::string(magic) + "\"");
  require(bytes.size() >= 9, ErrorCode::kMalformedHeader, "file too short for header length");
  require(bytes[4] == kFormatVersion, ErrorCode::kVersionMismatch,
          "version " + std::to_string(bytes[4]) + ", expected " + std::to_string(kFormatVersion));
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(bytes[5 + i]) << (8 * i);
  require(bytes.size() - 9 >= len, ErrorCode::kMalformedHeader, "header length exceeds file size");
  Frame f;
  const auto* text = reinterpret_cast<const char*>(bytes.data() + 9);
  try {
    f.header = nlohmann::json::parse(text, text + len);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, e.what());
  }
  require(f.header.is_object(), ErrorCode::kMalformedHeader, "header is not a JSON object");
  f.payload = bytes.data() + 9 + len;
  f.payload_bytes = bytes.size() - 9 - len;
  return f;
}

inline std::vector<double> read_payload(const Frame& f, std::size_t count) {
  require(f.payload_bytes >= 8 * count, ErrorCode::kTruncatedPayload,
          std::to_string(f.payload_bytes) + " bytes, expected " + std::to_string(8 * count));
  require(f.payload_bytes == 8 * count, ErrorCode::kTrailingBytes,
          std::to_string(f.payload_bytes - 8 * count) + " bytes after payload");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = get_f64(f.payload + 8 * i);
  return out;
}

inline Shape shape_field(const nlohmann::json& j, const char* what) {
  require(j.is_array() && !j.empty(), ErrorCode::kMalformedHeader, std::string(what) + " must be a non-empty array");
  Shape out;
  for (const auto& v : j) {
    require(v.is_number_unsigned() && v.get<std::uint64_t>() >= 1, ErrorCode::kMalformedHeader,
            std::string(what) + " entries must be positive integers");
    out.push_back(v.get<Index>());
  }
  return out;
}

inline void write_file(const std::string& path, const Bytes& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), ErrorCode::kIo, "cannot open " + path + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(os), ErrorCode::kIo, "write failed for " + path);
}

inline Bytes read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::kIo, "cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_tensor(const DenseTensor& t) {
  nlohmann::json header{{"dtype", "f64"}, {"shape", t.shape()}};
  return detail::frame(kTensorMagic, header, t.data());
}

inline DenseTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  const auto f = detail::unframe(bytes, kTensorMagic);
  detail::require(f.header.contains("dtype") && f.header["dtype"] == "f64", ErrorCode::kMalformedHeader,
                  "dtype must be \"f64\"");
  detail::require(f.header.contains("shape"), ErrorCode::kMalformedHeader, "missing shape");
  Shape shape = detail::shape_field(f.header["shape"], "shape");
  auto data = detail::read_payload(f, product(shape));
  return DenseTensor(std::move(shape), std::move(data));
}

inline std::vector<std::uint8_t> encode_sequence(const KroneckerSequence& seq) {
  seq.validate();
  nlohmann::json header{{"S", seq.num_factors()},
                        {"N", seq.num_axes()},
                        {"ranks", seq.ranks.values()},
                        {"factor_shapes", seq.shapes.rows()},
                        {"layout", "branch-major"}};
  std::vector<double> payload;
  payload.reserve(seq.param_count());
  for (const auto& f : seq.factors) payload.insert(payload.end(), f.values().begin(), f.values().end());
  return detail::frame(kSequenceMagic, header, payload);
}

inline KroneckerSequence decode_sequence(std::span<const std::uint8_t> bytes) {
  const auto f = detail::unframe(bytes, kSequenceMagic);
  const auto& h = f.header;
  for (const char* key : {"S", "N", "ranks", "factor_shapes", "layout"})
    detail::require(h.contains(key), ErrorCode::kMalformedHeader, std::string("missing ") + key);
  detail::require(h["layout"] == "branch-major", ErrorCode::kMalformedHeader, "layout must be \"branch-major\"");
  detail::require(h["S"].is_number_unsigned() && h["N"].is_number_unsigned(), ErrorCode::kMalformedHeader,
                  "S and N must be non-negative integers");
  const auto s = h["S"].get<std::size_t>();
  const auto n = h["N"].get<std::size_t>();
  detail::require(h["factor_shapes"].is_array() && h["factor_shapes"].size() == s && s >= 1,
                  ErrorCode::kMalformedHeader, "factor_shapes must hold S rows");
  std::vector<Shape> rows;
  for (const auto& row : h["factor_shapes"]) {
    rows.push_back(detail::shape_field(row, "factor_shapes row"));
    detail::require(rows.back().size() == n, ErrorCode::kMalformedHeader, "factor_shapes rows must have N entries");
  }
  detail::require(h["ranks"].is_array() && h["ranks"].size() + 1 == s, ErrorCode::kMalformedHeader,
                  "ranks must hold S - 1 entries");
  std::vector<Index> ranks;
  for (const auto& r : h["ranks"]) {
    detail::require(r.is_number_unsigned() && r.get<std::uint64_t>() >= 1, ErrorCode::kMalformedHeader,
                    "ranks must be positive integers");
    ranks.push_back(r.get<Index>());
  }

  auto seq = KroneckerSequence::zeros(FactorShapeMatrix(std::move(rows)), RankVector(std::move(ranks)));
  const auto payload = detail::read_payload(f, seq.param_count());
  std::size_t off = 0;
  for (auto& factor : seq.factors) {
    std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(off), factor.size(), factor.data().begin());
    off += factor.size();
  }
  return seq;
}

inline void write_tensor(const std::string& path, const DenseTensor& t) {
  detail::write_file(path, encode_tensor(t));
}

inline DenseTensor read_tensor(const std::string& path) { return decode_tensor(detail::read_file(path)); }

inline void write_sequence(const std::string& path, const KroneckerSequence& seq) {
  detail::write_file(path, encode_sequence(seq));
}

inline KroneckerSequence read_sequence(const std::string& path) {
  return decode_sequence(detail::read_file(path));
}

}  // namespace sekron
