#include <gtest/gtest.h>

#include <random>

#include "sekron/linalg.hpp"
#include "test_util.hpp"

namespace sekron {
namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

TEST(Svd, Identity) {
  const auto res = svd(Matrix::Identity(3, 3));
  EXPECT_NEAR((res.s - Vector::Ones(3)).norm(), 0.0, 1e-14);
}

TEST(Svd, ScaledRankOne) {
  Vector u(3), v(4);
  u << 1, 2, 2;
  v << 1, 1, 1, 1;
  u /= u.norm();
  v /= v.norm();
  const auto res = svd(5.0 * u * v.transpose());
  EXPECT_NEAR(res.s(0), 5.0, 1e-12);
  for (Eigen::Index r = 1; r < res.s.size(); ++r) EXPECT_NEAR(res.s(r), 0.0, 1e-12);
}

TEST(Svd, Diagonal) {
  Matrix m(2, 2);
  m << 3, 0, 0, 4;
  const auto res = svd(m);
  EXPECT_NEAR(res.s(0), 4.0, 1e-14);
  EXPECT_NEAR(res.s(1), 3.0, 1e-14);
}

TEST(Svd, RejectsNonFinite) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(svd(m), Error);
}

TEST(Svd, InvariantsOnRandomMatrices) {
  std::mt19937_64 rng(21);
  for (auto [rows, cols] : std::vector<std::pair<int, int>>{{8, 8}, {5, 9}, {12, 3}, {1, 6}, {6, 1}}) {
    const Matrix m = random_matrix(rows, cols, rng);
    const auto res = svd(m);
    const auto r = std::min(rows, cols);
    ASSERT_EQ(res.s.size(), r);
    EXPECT_LT((res.u.transpose() * res.u - Matrix::Identity(r, r)).norm(), 1e-10);
    EXPECT_LT((res.v.transpose() * res.v - Matrix::Identity(r, r)).norm(), 1e-10);
    for (Eigen::Index k = 1; k < r; ++k) EXPECT_GE(res.s(k - 1), res.s(k));
    EXPECT_GE(res.s.minCoeff(), 0.0);
    EXPECT_LT((res.u * res.s.asDiagonal() * res.v.transpose() - m).norm(), 1e-10 * m.norm());
    for (Eigen::Index k = 0; k < r; ++k) {
      Eigen::Index arg = 0;
      res.u.col(k).cwiseAbs().maxCoeff(&arg);
      EXPECT_GT(res.u(arg, k), 0.0);
    }
  }
}

TEST(Svd, DeterministicAcrossCalls) {
  std::mt19937_64 rng(22);
  const Matrix m = random_matrix(7, 5, rng);
  const auto a = svd(m);
  const auto b = svd(m);
  EXPECT_EQ(a.u, b.u);
  EXPECT_EQ(a.s, b.s);
  EXPECT_EQ(a.v, b.v);
}

TEST(Truncate, FullRankIsExact) {
  std::mt19937_64 rng(23);
  const Matrix m = random_matrix(4, 6, rng);
  const auto t = truncate(svd(m), 4);
  EXPECT_LT((t.left * t.right.transpose() - m).norm(), 1e-12 * m.norm());
}

TEST(Truncate, RankOneMatrixHasZeroResidual) {
  Vector u(3), v(2);
  u << 1, -2, 3;
  v << 0.5, 4;
  const Matrix m = u * v.transpose();
  const auto t = truncate(svd(m), 1);
  EXPECT_LT((t.left * t.right.transpose() - m).norm(), 1e-12 * m.norm());
}

TEST(Truncate, DiagonalResidual) {
  Matrix m(2, 2);
  m << 3, 0, 0, 4;
  const auto t = truncate(svd(m), 1);
  EXPECT_NEAR((m - t.left * t.right.transpose()).squaredNorm(), 9.0, 1e-12);
}

TEST(Truncate, RangeChecked) {
  const auto res = svd(Matrix::Identity(3, 2));
  EXPECT_THROW(truncate(res, 0), Error);
  EXPECT_THROW(truncate(res, 3), Error);
  EXPECT_THROW(tail_energy(res, 3), Error);
  EXPECT_THROW(tail_energy(res, -1), Error);
}

TEST(TailEnergy, Examples) {
  Matrix m(2, 2);
  m << 3, 0, 0, 4;
  const auto res = svd(m);
  EXPECT_NEAR(tail_energy(res, 2), 0.0, 0.0);
  EXPECT_NEAR(tail_energy(res, 1), 9.0, 1e-12);
  EXPECT_NEAR(tail_energy(res, 0), 25.0, 1e-12);
}

TEST(EckartYoung, ResidualEqualsTailEnergy) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = random_matrix(8, 8, rng);
    const auto res = svd(m);
    for (Eigen::Index r = 1; r <= 8; ++r) {
      const auto t = truncate(res, r);
      const double residual = (m - t.left * t.right.transpose()).squaredNorm();
      const double tail = tail_energy(res, r);
      // Independent route: eigenvalues of the Gram matrix.
      const double gram = testing::gram_tail(m, static_cast<Index>(r));
      EXPECT_NEAR(residual, tail, 1e-9 * std::max(tail, m.squaredNorm() * 1e-6));
      EXPECT_NEAR(gram, tail, 1e-9 * m.squaredNorm());
    }
  }
}

}  // namespace
}  // namespace sekron
