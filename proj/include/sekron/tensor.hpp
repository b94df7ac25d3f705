#pragma once

// Dense N-way tensors, Kronecker products over sequences of factors, mixed-radix
// index maps and block unfolding.
//
// Conventions: row-major storage (last axis fastest); wherever a tensor carries
// a branch axis it is the leading one.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sekron/error.hpp"

namespace sekron {

using Index = std::size_t;
using Shape = std::vector<Index>;
using MultiIndex = std::vector<Index>;

inline Index product(std::span<const Index> dims) {
  return std::accumulate(dims.begin(), dims.end(), Index{1}, std::multiplies<>{});
}

inline std::string format_shape(std::span<const Index> dims, char sep = 'x') {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << sep;
    os << dims[i];
  }
  return os.str();
}

/// Row-major strides for `shape`.
inline std::vector<Index> strides_of(std::span<const Index> shape) {
  std::vector<Index> strides(shape.size(), 1);
  for (std::size_t n = shape.size(); n-- > 1;) strides[n - 1] = strides[n] * shape[n];
  return strides;
}

class DenseTensor {
 public:
  DenseTensor() = default;

  explicit DenseTensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(product(shape_), 0.0);
  }

  DenseTensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    detail::require(data_.size() == product(shape_), ErrorCode::kShapeMismatch,
                    "data length " + std::to_string(data_.size()) + " does not match shape " +
                        format_shape(shape_));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t ndim() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  Index dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t flat) const { return data_[flat]; }
  double& operator[](std::size_t flat) { return data_[flat]; }

  std::size_t offset(std::span<const Index> idx) const {
    detail::require(idx.size() == shape_.size(), ErrorCode::kShapeMismatch,
                    "index has wrong number of axes");
    std::size_t off = 0;
    for (std::size_t n = 0; n < idx.size(); ++n) {
      detail::require(idx[n] < shape_[n], ErrorCode::kOutOfRange,
                      "index " + std::to_string(idx[n]) + " on axis " + std::to_string(n));
      off = off * shape_[n] + idx[n];
    }
    return off;
  }

  double at(std::span<const Index> idx) const { return data_[offset(idx)]; }
  double& at(std::span<const Index> idx) { return data_[offset(idx)]; }

  double squared_norm() const {
    double acc = 0.0;
    for (double v : data_) acc += v * v;
    return acc;
  }

  /// Slice along the leading axis; the result drops that axis.
  DenseTensor leading_slice(Index i) const {
    detail::require(ndim() >= 2, ErrorCode::kInvalidArgument, "leading_slice needs ndim >= 2");
    detail::require(i < shape_[0], ErrorCode::kOutOfRange, "leading slice index");
    Shape inner(shape_.begin() + 1, shape_.end());
    const std::size_t len = product(inner);
    return DenseTensor(std::move(inner),
                       std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(i * len),
                                           data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * len)));
  }

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  void validate_shape() const {
    detail::require(!shape_.empty(), ErrorCode::kInvalidArgument, "tensor needs at least one axis");
    for (Index d : shape_)
      detail::require(d >= 1, ErrorCode::kInvalidArgument, "every dimension must be >= 1");
  }

  Shape shape_;
  std::vector<double> data_;
};

/// Squared Frobenius norm of a - b.
inline double squared_distance(const DenseTensor& a, const DenseTensor& b) {
  detail::require(a.shape() == b.shape(), ErrorCode::kShapeMismatch,
                  format_shape(a.shape()) + " vs " + format_shape(b.shape()));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

/// S x N matrix of per-factor dimensions; row k is the shape of factor k.
class FactorShapeMatrix {
 public:
  FactorShapeMatrix() = default;

  explicit FactorShapeMatrix(std::vector<Shape> rows) : rows_(std::move(rows)) {
    detail::require(!rows_.empty(), ErrorCode::kInvalidArgument, "need at least one factor");
    const std::size_t n = rows_.front().size();
    detail::require(n >= 1, ErrorCode::kInvalidArgument, "factor shapes need at least one axis");
    for (const auto& row : rows_) {
      detail::require(row.size() == n, ErrorCode::kShapeMismatch,
                      "all factor shapes must have the same number of axes");
      for (Index d : row)
        detail::require(d >= 1, ErrorCode::kInvalidArgument, "factor dimensions must be >= 1");
    }
  }

  std::size_t num_factors() const noexcept { return rows_.size(); }
  std::size_t num_axes() const noexcept { return rows_.empty() ? 0 : rows_.front().size(); }
  const Shape& row(std::size_t k) const { return rows_.at(k); }
  const std::vector<Shape>& rows() const noexcept { return rows_; }
  Index operator()(std::size_t k, std::size_t n) const { return rows_.at(k).at(n); }

  /// Number of elements of factor k (length of its vectorization).
  Index factor_size(std::size_t k) const { return product(rows_.at(k)); }

  /// Elementwise product of rows [first, last).
  Shape product_shape(std::size_t first, std::size_t last) const {
    Shape out(num_axes(), 1);
    for (std::size_t k = first; k < last; ++k)
      for (std::size_t n = 0; n < out.size(); ++n) out[n] *= rows_[k][n];
    return out;
  }

  Shape product_shape() const { return product_shape(0, num_factors()); }

  /// Factor dims of a single axis, (a_n^(1), ..., a_n^(S)).
  std::vector<Index> axis_dims(std::size_t n) const {
    std::vector<Index> out;
    out.reserve(rows_.size());
    for (const auto& row : rows_) out.push_back(row.at(n));
    return out;
  }

  void check_compatible(std::span<const Index> target) const {
    const Shape prod = product_shape();
    detail::require(prod.size() == target.size() && std::equal(prod.begin(), prod.end(), target.begin()),
                    ErrorCode::kShapeMismatch,
                    "factor shapes multiply to " + format_shape(prod) + ", target is " +
                        format_shape(target));
  }

  std::string to_string() const {
    std::string out;
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      if (k) out += ',';
      out += format_shape(rows_[k]);
    }
    return out;
  }

  friend bool operator==(const FactorShapeMatrix&, const FactorShapeMatrix&) = default;
  friend auto operator<=>(const FactorShapeMatrix& a, const FactorShapeMatrix& b) {
    return a.rows_ <=> b.rows_;
  }

 private:
  std::vector<Shape> rows_;
};

inline DenseTensor kron_pair(const DenseTensor& a, const DenseTensor& b) {
  detail::require(a.ndim() == b.ndim(), ErrorCode::kShapeMismatch,
                  "kron_pair axis counts differ (" + std::to_string(a.ndim()) + " vs " +
                      std::to_string(b.ndim()) + ")");
  const std::size_t n_axes = a.ndim();
  Shape out_shape(n_axes);
  for (std::size_t n = 0; n < n_axes; ++n) out_shape[n] = a.dim(n) * b.dim(n);
  DenseTensor out(out_shape);

  // Walk a and b jointly; out index per axis is j*b_n + k.
  const auto o_strides = strides_of(out_shape);
  std::vector<Index> a_idx(n_axes, 0);
  for (std::size_t ia = 0; ia < a.size(); ++ia) {
    std::size_t base = 0;
    for (std::size_t n = 0; n < n_axes; ++n) base += a_idx[n] * b.dim(n) * o_strides[n];
    const double av = a[ia];
    std::vector<Index> b_idx(n_axes, 0);
    for (std::size_t ib = 0; ib < b.size(); ++ib) {
      std::size_t off = base;
      for (std::size_t n = 0; n < n_axes; ++n) off += b_idx[n] * o_strides[n];
      out[off] = av * b[ib];
      for (std::size_t n = n_axes; n-- > 0;) {
        if (++b_idx[n] < b.dim(n)) break;
        b_idx[n] = 0;
      }
    }
    for (std::size_t n = n_axes; n-- > 0;) {
      if (++a_idx[n] < a.dim(n)) break;
      a_idx[n] = 0;
    }
  }
  return out;
}

/// Pads `t` with leading unit axes up to `ndim` axes.
inline DenseTensor pad_axes(const DenseTensor& t, std::size_t ndim) {
  detail::require(ndim >= t.ndim(), ErrorCode::kInvalidArgument, "cannot pad to fewer axes");
  Shape shape(ndim - t.ndim(), 1);
  shape.insert(shape.end(), t.shape().begin(), t.shape().end());
  return DenseTensor(std::move(shape), t.values());
}

/// Left fold of kron_pair: ((f0 (x) f1) (x) f2) ...
inline DenseTensor kron_sequence(std::span<const DenseTensor> factors) {
  detail::require(!factors.empty(), ErrorCode::kInvalidArgument, "kron_sequence of empty list");
  DenseTensor acc = factors.front();
  for (std::size_t k = 1; k < factors.size(); ++k) acc = kron_pair(acc, factors[k]);
  return acc;
}

/// Splits a multi-index of the product shape into one index per factor
/// (mixed-radix digits, factor 1 most significant).
inline std::vector<MultiIndex> seq_index_decompose(std::span<const Index> i,
                                                   const FactorShapeMatrix& shapes) {
  const std::size_t s = shapes.num_factors();
  const std::size_t n_axes = shapes.num_axes();
  detail::require(i.size() == n_axes, ErrorCode::kShapeMismatch, "index axis count");
  const Shape total = shapes.product_shape();
  std::vector<MultiIndex> js(s, MultiIndex(n_axes, 0));
  for (std::size_t n = 0; n < n_axes; ++n) {
    detail::require(i[n] < total[n], ErrorCode::kOutOfRange,
                    "index " + std::to_string(i[n]) + " >= " + std::to_string(total[n]));
    Index rem = i[n];
    for (std::size_t k = s; k-- > 0;) {
      js[k][n] = rem % shapes(k, n);
      rem /= shapes(k, n);
    }
  }
  return js;
}

/// Inverse of seq_index_decompose: i_n = sum_k j_n^(k) prod_{l>k} a_n^(l).
inline MultiIndex seq_index_compose(std::span<const MultiIndex> js, const FactorShapeMatrix& shapes) {
  const std::size_t s = shapes.num_factors();
  const std::size_t n_axes = shapes.num_axes();
  detail::require(js.size() == s, ErrorCode::kShapeMismatch, "need one index per factor");
  MultiIndex out(n_axes, 0);
  for (std::size_t k = 0; k < s; ++k) {
    detail::require(js[k].size() == n_axes, ErrorCode::kShapeMismatch, "index axis count");
    for (std::size_t n = 0; n < n_axes; ++n) {
      detail::require(js[k][n] < shapes(k, n), ErrorCode::kOutOfRange,
                      "factor " + std::to_string(k) + " axis " + std::to_string(n));
      out[n] = out[n] * shapes(k, n) + js[k][n];
    }
  }
  return out;
}

/// (branch, block, element) view produced by unfold_blocks.
struct BlockArray {
  Index branches = 0;
  Index blocks = 0;
  Index elements = 0;
  std::vector<double> data;

  double at(Index b, Index blk, Index e) const { return data[(b * blocks + blk) * elements + e]; }
  double& at(Index b, Index blk, Index e) { return data[(b * blocks + blk) * elements + e]; }
};

namespace detail {

// Calls fn(block, element, source_offset) for every entry of one branch; source
// offsets are relative to the start of that branch.
template <class Fn>
void for_each_block_entry(std::span<const Index> grid, std::span<const Index> block, Fn&& fn) {
  const std::size_t n_axes = grid.size();
  Shape full(n_axes);
  for (std::size_t n = 0; n < n_axes; ++n) full[n] = grid[n] * block[n];
  const auto strides = strides_of(full);
  const Index n_blocks = product(grid);
  const Index n_elems = product(block);

  std::vector<Index> elem_offsets(n_elems);
  {
    std::vector<Index> k(n_axes, 0);
    for (Index e = 0; e < n_elems; ++e) {
      Index off = 0;
      for (std::size_t n = 0; n < n_axes; ++n) off += k[n] * strides[n];
      elem_offsets[e] = off;
      for (std::size_t n = n_axes; n-- > 0;) {
        if (++k[n] < block[n]) break;
        k[n] = 0;
      }
    }
  }
  std::vector<Index> j(n_axes, 0);
  for (Index blk = 0; blk < n_blocks; ++blk) {
    Index base = 0;
    for (std::size_t n = 0; n < n_axes; ++n) base += j[n] * block[n] * strides[n];
    for (Index e = 0; e < n_elems; ++e) fn(blk, e, base + elem_offsets[e]);
    for (std::size_t n = n_axes; n-- > 0;) {
      if (++j[n] < grid[n]) break;
      j[n] = 0;
    }
  }
}

}  // namespace detail

/// Rearranges `w` (leading branch axis of size n_branches, then N axes) into
/// (branch, block, element). Blocks of shape `block_shape` are enumerated
/// row-major over the block grid, elements row-major within a block; source
/// index per axis is j*b + k.
inline BlockArray unfold_blocks(const DenseTensor& w, std::span<const Index> block_shape,
                                Index n_branches) {
  const std::size_t n_axes = block_shape.size();
  detail::require(w.ndim() == n_axes + 1, ErrorCode::kShapeMismatch,
                  "unfold_blocks expects a leading branch axis plus " + std::to_string(n_axes) +
                      " axes");
  detail::require(w.dim(0) == n_branches, ErrorCode::kShapeMismatch, "branch axis size");
  Shape grid(n_axes);
  for (std::size_t n = 0; n < n_axes; ++n) {
    const Index full = w.dim(n + 1);
    detail::require(block_shape[n] >= 1 && full % block_shape[n] == 0, ErrorCode::kShapeMismatch,
                    "axis " + std::to_string(n) + " of size " + std::to_string(full) +
                        " is not divisible by block size " + std::to_string(block_shape[n]));
    grid[n] = full / block_shape[n];
  }
  BlockArray out{n_branches, product(grid), product(block_shape), {}};
  out.data.resize(w.size());
  const Index per_branch = out.blocks * out.elements;
  for (Index b = 0; b < n_branches; ++b) {
    const double* src = w.data().data() + b * per_branch;
    detail::for_each_block_entry(grid, block_shape, [&](Index blk, Index e, Index off) {
      out.at(b, blk, e) = src[off];
    });
  }
  return out;
}

/// Inverse of unfold_blocks; the result carries the leading branch axis.
inline DenseTensor fold_blocks(const BlockArray& m, std::span<const Index> grid_shape,
                               std::span<const Index> block_shape) {
  detail::require(grid_shape.size() == block_shape.size(), ErrorCode::kShapeMismatch,
                  "grid and block shapes differ in axis count");
  detail::require(product(grid_shape) == m.blocks && product(block_shape) == m.elements &&
                      m.data.size() == m.branches * m.blocks * m.elements,
                  ErrorCode::kShapeMismatch, "block array sizes do not match grid/block shapes");
  Shape shape{m.branches};
  for (std::size_t n = 0; n < grid_shape.size(); ++n) shape.push_back(grid_shape[n] * block_shape[n]);
  DenseTensor out(shape);
  const Index per_branch = m.blocks * m.elements;
  for (Index b = 0; b < m.branches; ++b) {
    double* dst = out.data().data() + b * per_branch;
    detail::for_each_block_entry(grid_shape, block_shape, [&](Index blk, Index e, Index off) {
      dst[off] = m.at(b, blk, e);
    });
  }
  return out;
}

inline DenseTensor reinterpret_shape(const DenseTensor& w, Shape new_shape) {
  detail::require(product(new_shape) == w.size(), ErrorCode::kShapeMismatch,
                  "cannot reshape " + format_shape(w.shape()) + " to " + format_shape(new_shape));
  return DenseTensor(std::move(new_shape), w.values());
}

}  // namespace sekron
