#pragma once

// CP, Tucker, tensor-train and tensor-ring factorizations written as Kronecker
// sequences, and direct evaluators of each format used to check them.

#include <string>
#include <utility>
#include <vector>

#include "sekron/decompose.hpp"
#include "sekron/error.hpp"
#include "sekron/tensor.hpp"

namespace sekron {

/// Factor n is a (rank x w_n) matrix.
struct CpFactors {
  std::vector<DenseTensor> factors;

  Index rank() const { return factors.at(0).dim(0); }
  Shape target_shape() const {
    Shape shape;
    for (const auto& f : factors) shape.push_back(f.dim(1));
    return shape;
  }
  void validate() const {
    detail::require(!factors.empty(), ErrorCode::kInvalidArgument, "CP needs at least one factor");
    for (const auto& f : factors) {
      detail::require(f.ndim() == 2, ErrorCode::kShapeMismatch, "CP factors must be matrices");
      detail::require(f.dim(0) == rank(), ErrorCode::kShapeMismatch, "inconsistent CP rank");
    }
  }
};

/// Core of shape (R_1, ..., R_N) and factor n of shape (w_n x R_n).
struct TuckerFactors {
  DenseTensor core;
  std::vector<DenseTensor> factors;

  Shape target_shape() const {
    Shape shape;
    for (const auto& f : factors) shape.push_back(f.dim(0));
    return shape;
  }
  void validate() const {
    detail::require(!factors.empty(), ErrorCode::kInvalidArgument, "Tucker needs at least one factor");
    detail::require(core.ndim() == factors.size(), ErrorCode::kShapeMismatch,
                    "core axis count must equal factor count");
    for (std::size_t n = 0; n < factors.size(); ++n) {
      detail::require(factors[n].ndim() == 2, ErrorCode::kShapeMismatch, "Tucker factors must be matrices");
      detail::require(factors[n].dim(1) == core.dim(n), ErrorCode::kShapeMismatch,
                      "Tucker factor " + std::to_string(n) + " rank disagrees with core");
    }
  }
};

/// Core n of shape (w_n, R_n, R_{n+1}) with R_{N+1} = R_1. A tensor train is
/// the case R_1 = R_{N+1} = 1.
struct TrCores {
  std::vector<DenseTensor> cores;

  Shape target_shape() const {
    Shape shape;
    for (const auto& c : cores) shape.push_back(c.dim(0));
    return shape;
  }
  void validate() const {
    detail::require(!cores.empty(), ErrorCode::kInvalidArgument, "ring needs at least one core");
    for (std::size_t n = 0; n < cores.size(); ++n) {
      detail::require(cores[n].ndim() == 3, ErrorCode::kShapeMismatch, "ring cores must have 3 axes");
      const auto& next = cores[(n + 1) % cores.size()];
      detail::require(cores[n].dim(2) == next.dim(1), ErrorCode::kShapeMismatch,
                      "rank mismatch between core " + std::to_string(n) + " and its successor");
    }
  }
};

namespace detail {

// Calls fn(index) for every multi-index of `shape`, row-major.
template <class Fn>
void for_each_index(const Shape& shape, Fn&& fn) {
  MultiIndex idx(shape.size(), 0);
  const Index total = product(shape);
  for (Index flat = 0; flat < total; ++flat) {
    fn(idx);
    for (std::size_t n = shape.size(); n-- > 0;) {
      if (++idx[n] < shape[n]) break;
      idx[n] = 0;
    }
  }
}

inline double m2(const DenseTensor& t, Index i, Index j) { return t[i * t.dim(1) + j]; }

inline double m3(const DenseTensor& t, Index i, Index j, Index k) {
  return t[(i * t.dim(1) + j) * t.dim(2) + k];
}

// Factor shape rows with w_n at axis `axis` and 1 elsewhere.
inline Shape axis_row(std::size_t n_axes, std::size_t axis, Index extent) {
  Shape row(n_axes, 1);
  if (axis < n_axes) row[axis] = extent;
  return row;
}

}  // namespace detail

inline DenseTensor native_reconstruct(const CpFactors& f) {
  f.validate();
  DenseTensor out(f.target_shape());
  Index flat = 0;
  detail::for_each_index(out.shape(), [&](const MultiIndex& i) {
    double acc = 0.0;
    for (Index r = 0; r < f.rank(); ++r) {
      double term = 1.0;
      for (std::size_t n = 0; n < i.size(); ++n) term *= detail::m2(f.factors[n], r, i[n]);
      acc += term;
    }
    out[flat++] = acc;
  });
  return out;
}

inline DenseTensor native_reconstruct(const TuckerFactors& f) {
  f.validate();
  DenseTensor out(f.target_shape());
  Index flat = 0;
  detail::for_each_index(out.shape(), [&](const MultiIndex& i) {
    double acc = 0.0;
    Index core_flat = 0;
    detail::for_each_index(f.core.shape(), [&](const MultiIndex& r) {
      double term = f.core[core_flat++];
      for (std::size_t n = 0; n < i.size(); ++n) term *= detail::m2(f.factors[n], i[n], r[n]);
      acc += term;
    });
    out[flat++] = acc;
  });
  return out;
}

inline DenseTensor native_reconstruct(const TrCores& f) {
  f.validate();
  const std::size_t n_axes = f.cores.size();
  Shape ranks;
  for (const auto& c : f.cores) ranks.push_back(c.dim(1));
  DenseTensor out(f.target_shape());
  Index flat = 0;
  detail::for_each_index(out.shape(), [&](const MultiIndex& i) {
    double acc = 0.0;
    detail::for_each_index(ranks, [&](const MultiIndex& r) {
      double term = 1.0;
      for (std::size_t n = 0; n < n_axes; ++n)
        term *= detail::m3(f.cores[n], i[n], r[n], r[(n + 1) % n_axes]);
      acc += term;
    });
    out[flat++] = acc;
  });
  return out;
}

/// S = N, ranks (R, 1, ..., 1); factor k carries w_k on axis k. A one-axis CP
/// gets a trailing unit factor so the rank sum still has a level to live on.
inline KroneckerSequence from_cp(const CpFactors& f) {
  f.validate();
  const std::size_t n_axes = f.factors.size();
  const Index rank = f.rank();
  std::vector<Shape> rows;
  for (std::size_t k = 0; k < n_axes; ++k) rows.push_back(detail::axis_row(n_axes, k, f.factors[k].dim(1)));
  if (n_axes == 1) rows.push_back(Shape{1});
  std::vector<Index> ranks(rows.size() - 1, 1);
  ranks[0] = rank;

  auto seq = KroneckerSequence::zeros(FactorShapeMatrix(rows), RankVector(ranks));
  for (std::size_t k = 0; k < n_axes; ++k) {
    const Index extent = f.factors[k].dim(1);
    for (Index r = 0; r < rank; ++r)
      for (Index i = 0; i < extent; ++i) seq.factors[k][r * extent + i] = detail::m2(f.factors[k], r, i);
  }
  if (n_axes == 1)
    for (Index r = 0; r < rank; ++r) seq.factors[1][r] = 1.0;
  return seq;
}

/// S = N + 1 with ranks (R_1, ..., R_N). Factor n carries w_n on axis n and
/// depends only on r_n; the last factor is the core, indexed by the full branch.
inline KroneckerSequence from_tucker(const TuckerFactors& f) {
  f.validate();
  const std::size_t n_axes = f.factors.size();
  std::vector<Shape> rows;
  for (std::size_t k = 0; k < n_axes; ++k) rows.push_back(detail::axis_row(n_axes, k, f.factors[k].dim(0)));
  rows.push_back(Shape(n_axes, 1));
  auto seq = KroneckerSequence::zeros(FactorShapeMatrix(rows), RankVector(f.core.shape()));

  for (std::size_t k = 0; k < n_axes; ++k) {
    const Index extent = f.factors[k].dim(0);
    const Index rank_k = f.core.dim(k);
    for (Index branch = 0; branch < seq.branches(k); ++branch) {
      const Index r = branch % rank_k;
      for (Index i = 0; i < extent; ++i) seq.factors[k][branch * extent + i] = detail::m2(f.factors[k], i, r);
    }
  }
  // Full branch index is the row-major flattening of (r_1..r_N), i.e. the core's own layout.
  for (Index branch = 0; branch < f.core.size(); ++branch) seq.factors[n_axes][branch] = f.core[branch];
  return seq;
}

/// S = N + 1 with ranks (R_1, ..., R_N). Factor 1 is all ones over r_1; factor
/// n + 1 carries w_n on axis n and holds core n at (r_n, r_{n+1}), with the last
/// factor closing the ring through r_1.
inline KroneckerSequence from_tr(const TrCores& f) {
  f.validate();
  const std::size_t n_axes = f.cores.size();
  std::vector<Shape> rows{Shape(n_axes, 1)};
  Shape ranks;
  for (std::size_t n = 0; n < n_axes; ++n) {
    rows.push_back(detail::axis_row(n_axes, n, f.cores[n].dim(0)));
    ranks.push_back(f.cores[n].dim(1));
  }
  auto seq = KroneckerSequence::zeros(FactorShapeMatrix(rows), RankVector(ranks));
  for (Index b = 0; b < seq.branches(0); ++b) seq.factors[0][b] = 1.0;

  for (std::size_t n = 0; n < n_axes; ++n) {
    const DenseTensor& core = f.cores[n];
    const Index extent = core.dim(0);
    const std::size_t k = n + 1;
    const Index depth = std::min(k + 1, n_axes);  // rank indices r_1..r_depth in this branch
    for (Index branch = 0; branch < seq.branches(k); ++branch) {
      // Digit m of the branch (0-based) is r_{m+1}.
      auto digit = [&](std::size_t m) {
        Index stride = 1;
        for (std::size_t j = m + 1; j < depth; ++j) stride *= ranks[j];
        return (branch / stride) % ranks[m];
      };
      const Index left = digit(n);
      const Index right = (n + 1 < n_axes) ? digit(n + 1) : digit(0);
      for (Index i = 0; i < extent; ++i) seq.factors[k][branch * extent + i] = detail::m3(core, i, left, right);
    }
  }
  return seq;
}

/// Tensor train: a ring whose boundary ranks are 1.
inline KroneckerSequence from_tt(const TrCores& f) {
  f.validate();
  detail::require(f.cores.front().dim(1) == 1 && f.cores.back().dim(2) == 1, ErrorCode::kInvalidArgument,
                  "tensor-train boundary ranks must be 1");
  return from_tr(f);
}

}  // namespace sekron
