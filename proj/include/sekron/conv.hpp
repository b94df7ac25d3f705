#pragma once

// Dense 2D cross-correlation and its evaluation directly from Kronecker
// factors.
//
// With W = sum_r A1 (x) ... (x) AS over (F, C, Kh, Kw), every weight index
// splits into per-factor digits, so the convolution becomes S nested sums.
// They are evaluated innermost first (factor S, then S-1, ...). Stage k reads
// a working activation laid out as
//
//   (batch, branch, f_{k+1..S}, c_{1..k}, He, We)
//
// and contracts (c_k, i_k, j_k) plus, for k < S, the rank index r_k. The
// spatial tap of factor k is dilated by the product of the kernel sizes of
// the factors after it, and each stage shrinks the spatial extent by exactly
// the reach of its taps, so the last stage lands on the output grid.

#include <cstddef>
#include <string>
#include <vector>

#include "sekron/decompose.hpp"
#include "sekron/error.hpp"
#include "sekron/tensor.hpp"

namespace sekron {

struct ConvOptions {
  Index padding = 0;  // symmetric zero padding, stride 1
};

struct ConvGeometry {
  Index batch, channels, height, width;
  Index filters, kernel_h, kernel_w;
  Index padded_h, padded_w, out_h, out_w;
};

inline ConvGeometry conv_geometry(std::span<const Index> input, std::span<const Index> weight,
                                  const ConvOptions& opts) {
  detail::require(input.size() == 4, ErrorCode::kShapeMismatch, "input must be (batch, C, H, W)");
  detail::require(weight.size() == 4, ErrorCode::kShapeMismatch, "weight must be (F, C, Kh, Kw)");
  ConvGeometry g{};
  g.batch = input[0];
  g.channels = input[1];
  g.height = input[2];
  g.width = input[3];
  g.filters = weight[0];
  g.kernel_h = weight[2];
  g.kernel_w = weight[3];
  detail::require(weight[1] == g.channels, ErrorCode::kShapeMismatch,
                  "weight has " + std::to_string(weight[1]) + " input channels, input has " +
                      std::to_string(g.channels));
  g.padded_h = g.height + 2 * opts.padding;
  g.padded_w = g.width + 2 * opts.padding;
  detail::require(g.kernel_h <= g.padded_h && g.kernel_w <= g.padded_w, ErrorCode::kShapeMismatch,
                  "kernel larger than padded input");
  g.out_h = g.padded_h - g.kernel_h + 1;
  g.out_w = g.padded_w - g.kernel_w + 1;
  return g;
}

namespace detail {

inline std::vector<double> pad_input(const DenseTensor& x, const ConvGeometry& g, Index pad) {
  std::vector<double> out(g.batch * g.channels * g.padded_h * g.padded_w, 0.0);
  for (Index nc = 0; nc < g.batch * g.channels; ++nc)
    for (Index h = 0; h < g.height; ++h)
      for (Index w = 0; w < g.width; ++w)
        out[(nc * g.padded_h + h + pad) * g.padded_w + w + pad] = x[(nc * g.height + h) * g.width + w];
  return out;
}

}  // namespace detail

/// y[n, f, p, q] = sum_{c, i, j} w[f, c, i, j] * x_padded[n, c, p + i, q + j]
inline DenseTensor conv2d_reference(const DenseTensor& x, const DenseTensor& w, const ConvOptions& opts = {}) {
  const ConvGeometry g = conv_geometry(x.shape(), w.shape(), opts);
  const std::vector<double> xp = detail::pad_input(x, g, opts.padding);
  DenseTensor y({g.batch, g.filters, g.out_h, g.out_w});
  for (Index n = 0; n < g.batch; ++n)
    for (Index f = 0; f < g.filters; ++f)
      for (Index p = 0; p < g.out_h; ++p)
        for (Index q = 0; q < g.out_w; ++q) {
          double acc = 0.0;
          for (Index c = 0; c < g.channels; ++c)
            for (Index i = 0; i < g.kernel_h; ++i)
              for (Index j = 0; j < g.kernel_w; ++j)
                acc += w[((f * g.channels + c) * g.kernel_h + i) * g.kernel_w + j] *
                       xp[((n * g.channels + c) * g.padded_h + p + i) * g.padded_w + q + j];
          y[((n * g.filters + f) * g.out_h + p) * g.out_w + q] = acc;
        }
  return y;
}

/// Per-stage sizes of the factorized convolution. Stage k (0-based) contracts
/// factor k; stages run from k = S-1 down to 0.
struct ConvStage {
  Index f, c, h, w;       // factor dims
  Index branches_in;      // branch axis of the activation read by this stage
  Index branches_out;     // branch axis of the activation it writes
  Index rank;             // rank index summed here (1 for the last factor)
  Index f_suffix_in;      // prod f_{k+1..S}
  Index c_prefix_out;     // prod c_{1..k-1}
  Index dil_h, dil_w;     // tap dilation
};

inline std::vector<ConvStage> conv_stages(const KroneckerSequence& seq) {
  detail::require(seq.num_axes() == 4, ErrorCode::kShapeMismatch,
                  "convolution factors must have axes (f, c, kh, kw)");
  const std::size_t s = seq.num_factors();
  std::vector<ConvStage> stages(s);
  Index f_suffix = 1, dil_h = 1, dil_w = 1;
  for (std::size_t k = s; k-- > 0;) {
    const Shape& d = seq.shapes.row(k);
    ConvStage& st = stages[k];
    st.f = d[0];
    st.c = d[1];
    st.h = d[2];
    st.w = d[3];
    st.rank = (k + 1 < s) ? seq.ranks[k] : 1;
    st.branches_out = (k == 0) ? 1 : seq.branches(k - 1);
    st.branches_in = (k + 1 < s) ? seq.branches(k) : 1;
    st.f_suffix_in = f_suffix;
    st.c_prefix_out = seq.shapes.product_shape(0, k)[1];
    st.dil_h = dil_h;
    st.dil_w = dil_w;
    f_suffix *= st.f;
    dil_h *= st.h;
    dil_w *= st.w;
  }
  return stages;
}

/// Convolution with the weight given as a Kronecker sequence over
/// (F, C, Kh, Kw), without forming the dense weight.
inline DenseTensor sekron_conv2d(const DenseTensor& x, const KroneckerSequence& seq, const ConvOptions& opts = {}) {
  seq.validate();
  const std::vector<ConvStage> stages = conv_stages(seq);
  const ConvGeometry g = conv_geometry(x.shape(), seq.target_shape(), opts);
  const std::size_t s = seq.num_factors();

  // Activation read by the current stage; starts as the padded input, viewed
  // as (batch, branch 1, f-suffix 1, C, Hp, Wp).
  std::vector<double> act = detail::pad_input(x, g, opts.padding);
  Index ext_h = g.padded_h, ext_w = g.padded_w;

  for (std::size_t k = s; k-- > 0;) {
    const ConvStage& st = stages[k];
    const double* a = seq.factors[k].data().data();
    const Index c_in = st.c_prefix_out * st.c;
    const Index out_h = ext_h - (st.h - 1) * st.dil_h;
    const Index out_w = ext_w - (st.w - 1) * st.dil_w;
    const Index f_out = st.f * st.f_suffix_in;
    const bool reads_input = (k + 1 == s);
    const Index plane_in = ext_h * ext_w;
    const Index plane_out = out_h * out_w;
    const Index a_branch_stride = st.f * st.c * st.h * st.w;

    std::vector<double> next(g.batch * st.branches_out * f_out * st.c_prefix_out * plane_out, 0.0);
    for (Index n = 0; n < g.batch; ++n)
      for (Index bo = 0; bo < st.branches_out; ++bo)
        for (Index fk = 0; fk < st.f; ++fk)
          for (Index fs = 0; fs < st.f_suffix_in; ++fs)
            for (Index cp = 0; cp < st.c_prefix_out; ++cp) {
              double* dst = next.data() +
                            (((n * st.branches_out + bo) * f_out + fk * st.f_suffix_in + fs) * st.c_prefix_out + cp) *
                                plane_out;
              for (Index r = 0; r < st.rank; ++r) {
                const Index ba = reads_input ? bo : bo * st.rank + r;  // factor branch
                const Index bi = reads_input ? 0 : ba;                 // activation branch
                const double* a_b = a + ba * a_branch_stride;
                for (Index ck = 0; ck < st.c; ++ck) {
                  const double* src =
                      act.data() + (((n * st.branches_in + bi) * st.f_suffix_in + fs) * c_in + cp * st.c + ck) * plane_in;
                  for (Index i = 0; i < st.h; ++i)
                    for (Index j = 0; j < st.w; ++j) {
                      const double coef = a_b[((fk * st.c + ck) * st.h + i) * st.w + j];
                      const double* tap = src + i * st.dil_h * ext_w + j * st.dil_w;
                      for (Index p = 0; p < out_h; ++p) {
                        const double* row = tap + p * ext_w;
                        double* out_row = dst + p * out_w;
                        for (Index q = 0; q < out_w; ++q) out_row[q] += coef * row[q];
                      }
                    }
                }
              }
            }
    act = std::move(next);
    ext_h = out_h;
    ext_w = out_w;
  }
  return DenseTensor({g.batch, g.filters, g.out_h, g.out_w}, std::move(act));
}

/// Multiply-accumulates per output position of the staged evaluation: stage k
/// produces branches_out * f_out * c_prefix_out values per position, each a sum
/// of rank * c * h * w products.
inline Index conv_macs_per_position(const KroneckerSequence& seq) {
  Index total = 0;
  for (const ConvStage& st : conv_stages(seq))
    total += st.branches_out * st.f * st.f_suffix_in * st.c_prefix_out * st.rank * st.c * st.h * st.w;
  return total;
}

/// Staged MAC count for an input of spatial size (H, W).
inline Index conv_macs(const KroneckerSequence& seq, Index height, Index width, const ConvOptions& opts = {}) {
  const Shape target = seq.target_shape();
  const ConvGeometry g = conv_geometry(Shape{1, target.at(1), height, width}, target, opts);
  return conv_macs_per_position(seq) * g.out_h * g.out_w;
}

}  // namespace sekron
