#include <gtest/gtest.h>

#include <random>

#include "sekron/conv.hpp"
#include "sekron/planner.hpp"
#include "test_util.hpp"

namespace sekron {
namespace {

using testing::random_tensor;
using testing::relative_error;

KroneckerSequence random_seq(const std::vector<Shape>& rows, const std::vector<Index>& ranks, std::mt19937_64& rng) {
  auto seq = KroneckerSequence::zeros(FactorShapeMatrix(rows), RankVector(ranks));
  for (std::size_t k = 0; k < seq.num_factors(); ++k) seq.factors[k] = random_tensor(seq.factor_shape(k), rng);
  return seq;
}

TEST(ConvReference, ZeroWeight) {
  const auto x = random_tensor({1, 2, 4, 4}, 81);
  const auto y = conv2d_reference(x, DenseTensor(Shape{3, 2, 3, 3}), {1});
  EXPECT_EQ(y.shape(), (Shape{1, 3, 4, 4}));
  EXPECT_EQ(y.squared_norm(), 0.0);
}

TEST(ConvReference, OneByOneIdentity) {
  const auto x = random_tensor({2, 3, 5, 4}, 82);
  DenseTensor w(Shape{3, 3, 1, 1});
  for (Index c = 0; c < 3; ++c) w[c * 3 + c] = 1.0;
  EXPECT_EQ(conv2d_reference(x, w), x);
}

TEST(ConvReference, SmallExample) {
  const DenseTensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  const DenseTensor w({1, 1, 2, 2}, {1, 1, 1, 1});
  EXPECT_EQ(conv2d_reference(x, w).values(), std::vector<double>{10});
  const auto padded = conv2d_reference(x, w, {1});
  EXPECT_EQ(padded.shape(), (Shape{1, 1, 3, 3}));
  EXPECT_EQ(padded.values(), (std::vector<double>{1, 3, 2, 4, 10, 6, 3, 7, 4}));
}

TEST(ConvReference, Errors) {
  const auto x = random_tensor({1, 2, 3, 3}, 83);
  EXPECT_THROW(conv2d_reference(x, DenseTensor(Shape{1, 3, 1, 1})), Error);
  EXPECT_THROW(conv2d_reference(x, DenseTensor(Shape{1, 2, 4, 4})), Error);
  EXPECT_NO_THROW(conv2d_reference(x, DenseTensor(Shape{1, 2, 4, 4}), {1}));
}

TEST(SekronConv, SingleFactorIsDense) {
  std::mt19937_64 rng(84);
  const auto seq = random_seq({{4, 3, 3, 3}}, {}, rng);
  const auto x = random_tensor({2, 3, 6, 5}, rng);
  EXPECT_LE(relative_error(sekron_conv2d(x, seq, {1}), conv2d_reference(x, reconstruct(seq), {1})), 1e-12);
}

TEST(SekronConv, UnitFactorsPassThrough) {
  auto seq = KroneckerSequence::zeros(FactorShapeMatrix({{1, 1, 1, 1}, {1, 1, 1, 1}}), RankVector({1}));
  seq.factors[0][0] = 1.0;
  seq.factors[1][0] = 1.0;
  const auto x = random_tensor({1, 1, 4, 4}, 85);
  EXPECT_EQ(sekron_conv2d(x, seq), x);
}

TEST(SekronConv, ThreeFactorExample) {
  std::mt19937_64 rng(86);
  const auto seq = random_seq({{2, 2, 1, 1}, {2, 2, 3, 1}, {2, 2, 1, 3}}, {2, 2}, rng);
  EXPECT_EQ(seq.target_shape(), (Shape{8, 8, 3, 3}));
  const auto x = random_tensor({2, 8, 6, 6}, rng);
  for (Index pad : {0u, 1u})
    EXPECT_LE(relative_error(sekron_conv2d(x, seq, {pad}), conv2d_reference(x, reconstruct(seq), {pad})), 1e-8);
}

TEST(SekronConv, RandomConfigurations) {
  std::mt19937_64 rng(87);
  int checked = 0;
  while (checked < 60) {
    const std::size_t s = 2 + rng() % 2;
    std::vector<Shape> rows(s, Shape(4, 1));
    for (std::size_t axis = 0; axis < 4; ++axis)
      for (std::size_t k = 0; k < s; ++k) rows[k][axis] = 1 + rng() % (axis < 2 ? 3 : 2);
    const FactorShapeMatrix shapes(rows);
    const Shape target = shapes.product_shape();
    if (target[1] > 16 || target[0] > 16) continue;
    std::vector<Index> ranks;
    for (std::size_t k = 0; k + 1 < s; ++k) ranks.push_back(1 + rng() % 2);
    const Index pad = rng() % 2;
    const Index h = std::max<Index>(target[2], 1 + rng() % 12);
    const Index w = std::max<Index>(target[3], 1 + rng() % 12);
    const Index batch = 1 + rng() % 4;
    const auto seq = random_seq(rows, ranks, rng);
    const auto x = random_tensor({batch, target[1], h, w}, rng);
    EXPECT_LE(relative_error(sekron_conv2d(x, seq, {pad}), conv2d_reference(x, reconstruct(seq), {pad})), 1e-8)
        << shapes.to_string() << " ranks " << seq.ranks.to_string();
    ++checked;
  }
}

TEST(SekronConv, Linear) {
  std::mt19937_64 rng(88);
  const auto seq = random_seq({{2, 2, 3, 1}, {2, 2, 1, 3}}, {3}, rng);
  const auto a = random_tensor({1, 4, 5, 5}, rng);
  const auto b = random_tensor({1, 4, 5, 5}, rng);
  DenseTensor mix(a.shape());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 2.0 * a[i] - 0.5 * b[i];
  const auto ya = sekron_conv2d(a, seq, {1});
  const auto yb = sekron_conv2d(b, seq, {1});
  DenseTensor want(ya.shape());
  for (std::size_t i = 0; i < want.size(); ++i) want[i] = 2.0 * ya[i] - 0.5 * yb[i];
  EXPECT_LE(relative_error(sekron_conv2d(mix, seq, {1}), want), 1e-10);
}

TEST(SekronConv, ChannelMismatch) {
  std::mt19937_64 rng(89);
  const auto seq = random_seq({{2, 2, 1, 1}, {2, 2, 3, 3}}, {1}, rng);
  EXPECT_THROW(sekron_conv2d(random_tensor({1, 3, 5, 5}, rng), seq), Error);
  EXPECT_THROW(sekron_conv2d(random_tensor({1, 4, 2, 2}, rng), seq), Error);
}

TEST(ConvMacs, DenseCount) {
  const auto seq = KroneckerSequence::zeros(FactorShapeMatrix({{6, 4, 3, 3}}), RankVector());
  EXPECT_EQ(conv_macs_per_position(seq), 6u * 4 * 3 * 3);
  EXPECT_EQ(conv_macs(seq, 5, 5, {1}), 6u * 4 * 3 * 3 * 25);
}

TEST(ConvMacs, TwoFactorExample) {
  const FactorShapeMatrix shapes({{2, 2, 1, 1}, {2, 2, 3, 3}});
  const auto seq = KroneckerSequence::zeros(shapes, RankVector({1}));
  EXPECT_EQ(conv_macs_per_position(seq), 80u);
  EXPECT_EQ(conv_macs_per_position(seq), flops_denominator(shapes, seq.ranks));
}

TEST(ConvMacs, MatchesFlopsDenominator) {
  std::mt19937_64 rng(90);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t s = 1 + rng() % 4;
    std::vector<Shape> rows(s, Shape(4));
    for (auto& row : rows)
      for (auto& d : row) d = 1 + rng() % 3;
    std::vector<Index> ranks;
    for (std::size_t k = 0; k + 1 < s; ++k) ranks.push_back(1 + rng() % 3);
    const FactorShapeMatrix shapes(rows);
    const auto seq = KroneckerSequence::zeros(shapes, RankVector(ranks));
    EXPECT_EQ(conv_macs_per_position(seq), flops_denominator(shapes, seq.ranks));
  }
}

}  // namespace
}  // namespace sekron
