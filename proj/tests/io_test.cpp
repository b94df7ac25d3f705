#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "sekron/io.hpp"
#include "test_util.hpp"

namespace sekron {
namespace {

using Bytes = std::vector<std::uint8_t>;

ErrorCode decode_error(const Bytes& bytes, bool sequence) {
  try {
    if (sequence)
      decode_sequence(bytes);
    else
      decode_tensor(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "decode succeeded";
  return ErrorCode::kInvalidArgument;
}

KroneckerSequence sample_sequence() {
  const auto w = testing::random_tensor({8, 4, 3}, 101);
  return sekron_decompose(w, FactorShapeMatrix({{2, 2, 1}, {2, 1, 3}, {2, 2, 1}}), RankVector({2, 3}));
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sekron_io_test_" + name);
}

TEST(TensorFile, Layout) {
  const DenseTensor t({2}, {1.0, -2.0});
  const Bytes bytes = encode_tensor(t);
  ASSERT_GE(bytes.size(), 9u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SKTN");
  EXPECT_EQ(bytes[4], 1);
  const std::uint32_t len = bytes[5] | bytes[6] << 8 | bytes[7] << 16 | bytes[8] << 24;
  EXPECT_EQ(std::string(bytes.begin() + 9, bytes.begin() + 9 + len), R"({"dtype":"f64","shape":[2]})");
  ASSERT_EQ(bytes.size(), 9 + len + 16);
  // 1.0 little-endian
  EXPECT_EQ(bytes[9 + len + 7], 0x3f);
  EXPECT_EQ(bytes[9 + len + 6], 0xf0);
}

TEST(TensorFile, RoundTripIsByteExact) {
  std::mt19937_64 rng(102);
  for (const Shape& shape : std::vector<Shape>{{1}, {3, 4}, {2, 3, 1, 5}}) {
    const auto t = testing::random_tensor(shape, rng);
    const auto path = temp_path("t.skt");
    write_tensor(path, t);
    const auto back = read_tensor(path);
    EXPECT_EQ(back, t);
    EXPECT_EQ(encode_tensor(back), encode_tensor(t));
    EXPECT_EQ(detail::read_file(path), encode_tensor(t));
    std::filesystem::remove(path);
  }
}

TEST(SequenceFile, RoundTripIsByteExact) {
  const auto seq = sample_sequence();
  const auto path = temp_path("s.sks");
  write_sequence(path, seq);
  const auto back = read_sequence(path);
  EXPECT_EQ(back.shapes, seq.shapes);
  EXPECT_EQ(back.ranks, seq.ranks);
  for (std::size_t k = 0; k < seq.num_factors(); ++k) EXPECT_EQ(back.factors[k], seq.factors[k]);
  EXPECT_EQ(encode_sequence(back), detail::read_file(path));
  std::filesystem::remove(path);
}

TEST(SequenceFile, HeaderFields) {
  const Bytes bytes = encode_sequence(sample_sequence());
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SKSQ");
  const auto f = detail::unframe(bytes, kSequenceMagic);
  EXPECT_EQ(f.header["S"], 3);
  EXPECT_EQ(f.header["N"], 3);
  EXPECT_EQ(f.header["ranks"], nlohmann::json::array({2, 3}));
  EXPECT_EQ(f.header["layout"], "branch-major");
  EXPECT_EQ(f.payload_bytes, 8 * sample_sequence().param_count());
}

TEST(Corruption, BadMagic) {
  Bytes bytes = encode_tensor(DenseTensor({2}, {1, 2}));
  bytes[0] = 'X';
  EXPECT_EQ(decode_error(bytes, false), ErrorCode::kBadMagic);
  EXPECT_EQ(decode_error(encode_tensor(DenseTensor({2}, {1, 2})), true), ErrorCode::kBadMagic);
  EXPECT_EQ(decode_error(Bytes{'S', 'K'}, false), ErrorCode::kBadMagic);
}

TEST(Corruption, Version) {
  Bytes bytes = encode_sequence(sample_sequence());
  bytes[4] = 2;
  EXPECT_EQ(decode_error(bytes, true), ErrorCode::kVersionMismatch);
}

TEST(Corruption, TruncatedPayload) {
  Bytes bytes = encode_tensor(testing::random_tensor({3, 3}, 103));
  bytes.resize(bytes.size() - 1);
  EXPECT_EQ(decode_error(bytes, false), ErrorCode::kTruncatedPayload);
  Bytes seq = encode_sequence(sample_sequence());
  seq.resize(seq.size() - 8);
  EXPECT_EQ(decode_error(seq, true), ErrorCode::kTruncatedPayload);
}

TEST(Corruption, TrailingBytes) {
  Bytes bytes = encode_tensor(testing::random_tensor({3, 3}, 104));
  bytes.push_back(0);
  EXPECT_EQ(decode_error(bytes, false), ErrorCode::kTrailingBytes);
}

TEST(Corruption, MalformedHeader) {
  const Bytes good = encode_tensor(DenseTensor({2}, {1, 2}));
  Bytes short_file(good.begin(), good.begin() + 6);
  EXPECT_EQ(decode_error(short_file, false), ErrorCode::kMalformedHeader);

  Bytes long_len = good;
  long_len[8] = 0x7f;
  EXPECT_EQ(decode_error(long_len, false), ErrorCode::kMalformedHeader);

  Bytes bad_json = good;
  bad_json[9] = '[';
  EXPECT_EQ(decode_error(bad_json, false), ErrorCode::kMalformedHeader);

  const auto reframe = [](const nlohmann::json& header, std::size_t doubles) {
    return detail::frame(kSequenceMagic, header, std::vector<double>(doubles, 0.0));
  };
  EXPECT_EQ(decode_error(reframe({{"S", 2}, {"N", 1}, {"ranks", {1}}, {"factor_shapes", {{2}}}, {"layout", "branch-major"}}, 2), true),
            ErrorCode::kMalformedHeader);
  EXPECT_EQ(decode_error(reframe({{"S", 2}, {"N", 1}, {"ranks", {1}}, {"factor_shapes", {{2}, {2}}}, {"layout", "other"}}, 4), true),
            ErrorCode::kMalformedHeader);
  EXPECT_EQ(decode_error(reframe({{"S", 2}, {"N", 1}, {"ranks", {0}}, {"factor_shapes", {{2}, {2}}}, {"layout", "branch-major"}}, 4), true),
            ErrorCode::kMalformedHeader);
  EXPECT_NO_THROW(decode_sequence(
      reframe({{"S", 2}, {"N", 1}, {"ranks", {1}}, {"factor_shapes", {{2}, {2}}}, {"layout", "branch-major"}}, 4)));
}

TEST(Files, MissingFileIsIoError) {
  try {
    read_tensor("/nonexistent/dir/x.skt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

}  // namespace
}  // namespace sekron
