#pragma once

// Recursive Kronecker-sequence decomposition.
//
// Level k unfolds every branch of the working tensor into a (block, element)
// matrix whose blocks have the shape of the remaining factors, keeps the top
// ranks[k] singular triplets, stores the left vectors as factor k and carries
// the sigma-scaled right vectors forward as the next working tensor. The last
// working tensor becomes the final factor.

#include <algorithm>
#include <cstddef>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sekron/error.hpp"
#include "sekron/linalg.hpp"
#include "sekron/tensor.hpp"

namespace sekron {

/// Retained ranks per level, one entry per factor boundary (S - 1 values).
class RankVector {
 public:
  RankVector() = default;
  explicit RankVector(std::vector<Index> values) : values_(std::move(values)) {
    for (Index r : values_) detail::require(r >= 1, ErrorCode::kInvalidArgument, "ranks must be >= 1");
  }

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  Index operator[](std::size_t k) const { return values_.at(k); }
  const std::vector<Index>& values() const noexcept { return values_; }

  /// Branch count of factor k: ranks[0] * ... * ranks[min(k, S-2)].
  Index branches(std::size_t k) const {
    Index rho = 1;
    for (std::size_t j = 0; j < values_.size() && j <= k; ++j) rho *= values_[j];
    return rho;
  }

  std::string to_string() const { return format_shape(values_, ','); }

  friend bool operator==(const RankVector&, const RankVector&) = default;
  friend auto operator<=>(const RankVector& a, const RankVector& b) { return a.values_ <=> b.values_; }

 private:
  std::vector<Index> values_;
};

/// Dimensional rank caps min(|d^(k)|, |d^(k+1)| ... |d^(S)|) for every level.
inline std::vector<Index> full_ranks(const FactorShapeMatrix& shapes) {
  const std::size_t s = shapes.num_factors();
  std::vector<Index> caps;
  for (std::size_t k = 0; k + 1 < s; ++k) {
    const Shape block = shapes.product_shape(k + 1, s);
    caps.push_back(std::min(shapes.factor_size(k), product(block)));
  }
  return caps;
}

inline void check_ranks(const FactorShapeMatrix& shapes, const RankVector& ranks) {
  const std::size_t s = shapes.num_factors();
  detail::require(ranks.size() + 1 == s, ErrorCode::kInvalidArgument,
                  std::to_string(s) + " factors need " + std::to_string(s - 1) + " ranks, got " +
                      std::to_string(ranks.size()));
  const auto caps = full_ranks(shapes);
  for (std::size_t k = 0; k < caps.size(); ++k)
    detail::require(ranks[k] <= caps[k], ErrorCode::kRankExceeded,
                    "rank " + std::to_string(ranks[k]) + " at level " + std::to_string(k + 1) +
                        " exceeds full rank " + std::to_string(caps[k]));
}

/// Factor k has shape (branches(k), d^(k)...). The branch index of factor k is
/// the row-major flattening of (r_1, ..., r_k); the final factor shares the
/// branch axis of factor S-1.
struct KroneckerSequence {
  FactorShapeMatrix shapes;
  RankVector ranks;
  std::vector<DenseTensor> factors;

  std::size_t num_factors() const noexcept { return shapes.num_factors(); }
  std::size_t num_axes() const noexcept { return shapes.num_axes(); }
  Index branches(std::size_t k) const { return ranks.branches(k); }
  Shape target_shape() const { return shapes.product_shape(); }

  Shape factor_shape(std::size_t k) const {
    Shape shape{branches(k)};
    shape.insert(shape.end(), shapes.row(k).begin(), shapes.row(k).end());
    return shape;
  }

  /// Total number of stored factor entries.
  Index param_count() const {
    Index total = 0;
    for (const auto& f : factors) total += f.size();
    return total;
  }

  void validate() const {
    const std::size_t s = num_factors();
    detail::require(s >= 1, ErrorCode::kInvalidArgument, "empty sequence");
    detail::require(ranks.size() + 1 == s, ErrorCode::kInvalidArgument, "rank count must be S - 1");
    detail::require(factors.size() == s, ErrorCode::kInvalidArgument, "factor count must be S");
    for (std::size_t k = 0; k < s; ++k)
      detail::require(factors[k].shape() == factor_shape(k), ErrorCode::kShapeMismatch,
                      "factor " + std::to_string(k + 1) + " has shape " +
                          format_shape(factors[k].shape()) + ", expected " +
                          format_shape(factor_shape(k)));
  }

  /// Zero-filled sequence with the layout implied by shapes and ranks.
  static KroneckerSequence zeros(FactorShapeMatrix shapes, RankVector ranks) {
    detail::require(ranks.size() + 1 == shapes.num_factors(), ErrorCode::kInvalidArgument,
                    "rank count must be S - 1");
    KroneckerSequence seq{std::move(shapes), std::move(ranks), {}};
    for (std::size_t k = 0; k < seq.num_factors(); ++k) seq.factors.emplace_back(seq.factor_shape(k));
    return seq;
  }
};

struct DecomposeOptions {
  /// Worker threads for the per-branch SVDs; results do not depend on it.
  unsigned threads = 1;
};

/// Singular spectra seen during decomposition: spectra[level][branch].
using LevelSpectra = std::vector<std::vector<Vector>>;

struct Decomposition {
  KroneckerSequence sequence;
  LevelSpectra spectra;
};

namespace detail {

template <class Fn>
void parallel_for(Index count, unsigned threads, Fn&& fn) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (workers <= 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t)
    pool.emplace_back([&, t] {
      for (Index i = t; i < count; i += workers) fn(i);
    });
}

}  // namespace detail

inline Decomposition sekron_decompose_traced(const DenseTensor& w, const FactorShapeMatrix& shapes,
                                             const RankVector& ranks, DecomposeOptions opts = {}) {
  detail::require(shapes.num_axes() == w.ndim(), ErrorCode::kShapeMismatch,
                  "factor shapes have " + std::to_string(shapes.num_axes()) + " axes, tensor has " +
                      std::to_string(w.ndim()));
  shapes.check_compatible(w.shape());
  check_ranks(shapes, ranks);

  const std::size_t s = shapes.num_factors();
  Decomposition out{KroneckerSequence{shapes, ranks, {}}, LevelSpectra(s - 1)};
  auto& seq = out.sequence;
  seq.factors.reserve(s);

  std::vector<double> work = w.values();
  Index n_branches = 1;
  for (std::size_t k = 0; k + 1 < s; ++k) {
    const Shape& grid = shapes.row(k);
    const Shape block = shapes.product_shape(k + 1, s);
    const Index rows = product(grid);
    const Index cols = product(block);
    const Index keep = ranks[k];

    DenseTensor factor(seq.factor_shape(k));
    std::vector<double> next(n_branches * keep * cols);
    out.spectra[k].resize(n_branches);

    detail::parallel_for(n_branches, opts.threads, [&](Index b) {
      const double* src = work.data() + b * rows * cols;
      Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      detail::for_each_block_entry(grid, block, [&](Index blk, Index e, Index off) {
        m(static_cast<Eigen::Index>(blk), static_cast<Eigen::Index>(e)) = src[off];
      });
      const SvdResult res = svd(m);
      const TruncatedSvd t = truncate(res, static_cast<Eigen::Index>(keep));
      double* a = factor.data().data();
      for (Index r = 0; r < keep; ++r) {
        const Index slot = b * keep + r;
        for (Index i = 0; i < rows; ++i)
          a[slot * rows + i] = t.left(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r));
        for (Index e = 0; e < cols; ++e)
          next[slot * cols + e] = t.right(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(r));
      }
      out.spectra[k][b] = res.s;
    });

    seq.factors.push_back(std::move(factor));
    work = std::move(next);
    n_branches *= keep;
  }
  seq.factors.emplace_back(seq.factor_shape(s - 1), std::move(work));
  return out;
}

inline KroneckerSequence sekron_decompose(const DenseTensor& w, const FactorShapeMatrix& shapes,
                                          const RankVector& ranks, DecomposeOptions opts = {}) {
  return sekron_decompose_traced(w, shapes, ranks, opts).sequence;
}

/// Sum over all rank indices of the Kronecker products of branch-selected
/// factors, accumulated from the last factor inwards.
inline DenseTensor reconstruct(const KroneckerSequence& seq) {
  seq.validate();
  const std::size_t s = seq.num_factors();
  std::vector<DenseTensor> partial;
  const DenseTensor& last = seq.factors.back();
  for (Index b = 0; b < last.dim(0); ++b) partial.push_back(last.leading_slice(b));

  for (std::size_t k = s - 1; k-- > 0;) {
    const Index keep = seq.ranks[k];
    const Index outer = partial.size() / keep;
    std::vector<DenseTensor> merged;
    merged.reserve(outer);
    for (Index b = 0; b < outer; ++b) {
      DenseTensor acc;
      for (Index r = 0; r < keep; ++r) {
        const Index slot = b * keep + r;
        DenseTensor term = kron_pair(seq.factors[k].leading_slice(slot), partial[slot]);
        if (r == 0) {
          acc = std::move(term);
        } else {
          for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += term[i];
        }
      }
      merged.push_back(std::move(acc));
    }
    partial = std::move(merged);
  }
  return std::move(partial.front());
}

/// Squared Frobenius norm of w - reconstruct(seq).
inline double reconstruction_error(const DenseTensor& w, const KroneckerSequence& seq) {
  return squared_distance(w, reconstruct(seq));
}

/// Discarded singular energy per level, with the multiplicative weights of the
/// unrolled error bound. Level k's weight is |d^(1)| * ... * |d^(k-1)|, where
/// |d^(l)| is the element count of factor l.
struct TruncationEnergy {
  std::vector<double> level_tails;
  std::vector<double> level_weights;

  /// Weighted sum; an upper bound on the reconstruction error.
  double bound() const {
    double acc = 0.0;
    for (std::size_t k = 0; k < level_tails.size(); ++k) acc += level_weights[k] * level_tails[k];
    return acc;
  }

  /// Unweighted sum. The left factors of every branch are orthonormal, so the
  /// discarded energies add up to the reconstruction error exactly.
  double total() const {
    double acc = 0.0;
    for (double t : level_tails) acc += t;
    return acc;
  }
};

inline TruncationEnergy truncation_energy(const LevelSpectra& spectra, const FactorShapeMatrix& shapes,
                                          const RankVector& ranks) {
  TruncationEnergy out;
  double weight = 1.0;
  for (std::size_t k = 0; k < spectra.size(); ++k) {
    double tail = 0.0;
    for (const Vector& s : spectra[k]) {
      const auto keep = static_cast<Eigen::Index>(ranks[k]);
      tail += s.tail(s.size() - keep).squaredNorm();
    }
    out.level_tails.push_back(tail);
    out.level_weights.push_back(weight);
    weight *= static_cast<double>(shapes.factor_size(k));
  }
  return out;
}

inline double error_bound(const DenseTensor& w, const FactorShapeMatrix& shapes, const RankVector& ranks,
                          DecomposeOptions opts = {}) {
  const auto dec = sekron_decompose_traced(w, shapes, ranks, opts);
  return truncation_energy(dec.spectra, shapes, ranks).bound();
}

}  // namespace sekron
