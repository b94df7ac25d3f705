#pragma once

// Compression / FLOP accounting, candidate enumeration, latency measurement
// and configuration selection for a single convolution layer.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "sekron/conv.hpp"
#include "sekron/decompose.hpp"
#include "sekron/error.hpp"
#include "sekron/tensor.hpp"

namespace sekron {

struct CandidateConfig {
  FactorShapeMatrix shapes;
  RankVector ranks;
  double cr = 0.0;
  double fr = 0.0;
  std::optional<double> latency_ms;
};

struct PlanRequest {
  Shape target_shape;  // (F, C, Kh, Kw)
  std::size_t sequence_length = 1;
  double target_cr = 1.0;
  std::optional<double> latency_budget_ms;
  Index max_rank = 1;
  std::uint64_t max_candidates = 1'000'000;
};

/// Elements of the dense tensor the shapes describe.
inline Index dense_elements(const FactorShapeMatrix& shapes) { return product(shapes.product_shape()); }

/// sum_i (R_1 ... R_i) |d^(i)|, with the last factor sharing the previous branch count.
inline Index stored_elements(const FactorShapeMatrix& shapes, const RankVector& ranks) {
  Index total = 0;
  Index rho = 1;
  for (std::size_t i = 0; i < shapes.num_factors(); ++i) {
    if (i < ranks.size()) rho *= ranks[i];
    total += rho * shapes.factor_size(i);
  }
  return total;
}

/// sum_i (F_i ... F_S)(R_1 ... R_i)(c_1 ... c_i) h_i w_i over (F, C, Kh, Kw) factors.
inline Index flops_denominator(const FactorShapeMatrix& shapes, const RankVector& ranks) {
  detail::require(shapes.num_axes() == 4, ErrorCode::kShapeMismatch, "FR needs (f, c, h, w) factors");
  const std::size_t s = shapes.num_factors();
  Index total = 0;
  Index rho = 1;
  Index c_prefix = 1;
  for (std::size_t i = 0; i < s; ++i) {
    if (i < ranks.size()) rho *= ranks[i];
    c_prefix *= shapes(i, 1);
    Index f_suffix = 1;
    for (std::size_t k = i; k < s; ++k) f_suffix *= shapes(k, 0);
    total += f_suffix * rho * c_prefix * shapes(i, 2) * shapes(i, 3);
  }
  return total;
}

inline double compression_ratio(const FactorShapeMatrix& shapes, const RankVector& ranks) {
  return static_cast<double>(dense_elements(shapes)) / static_cast<double>(stored_elements(shapes, ranks));
}

inline double flops_ratio(const FactorShapeMatrix& shapes, const RankVector& ranks) {
  return static_cast<double>(dense_elements(shapes)) / static_cast<double>(flops_denominator(shapes, ranks));
}

/// All ordered s-tuples of positive integers with product n, lexicographic.
inline std::vector<std::vector<Index>> enumerate_factorizations(Index n, std::size_t s) {
  detail::require(n >= 1 && s >= 1, ErrorCode::kInvalidArgument, "need n >= 1 and s >= 1");
  std::vector<std::vector<Index>> out;
  std::vector<Index> prefix;
  auto recurse = [&](auto&& self, Index rest, std::size_t slots) -> void {
    if (slots == 1) {
      prefix.push_back(rest);
      out.push_back(prefix);
      prefix.pop_back();
      return;
    }
    for (Index d = 1; d <= rest; ++d) {
      if (rest % d) continue;
      prefix.push_back(d);
      self(self, rest / d, slots - 1);
      prefix.pop_back();
    }
  };
  recurse(recurse, n, s);
  return out;
}

/// Cartesian product of per-axis factorizations and rank tuples in
/// [1, max_rank]^(S-1), keeping configurations whose ranks respect the full-rank
/// caps. Throws kCapExceeded before enumerating if the raw product is too big.
inline std::vector<CandidateConfig> enumerate_configs(const PlanRequest& req) {
  detail::require(req.sequence_length >= 1, ErrorCode::kInvalidArgument, "sequence length must be >= 1");
  detail::require(req.max_rank >= 1, ErrorCode::kInvalidArgument, "max rank must be >= 1");
  detail::require(!req.target_shape.empty(), ErrorCode::kInvalidArgument, "empty target shape");
  const std::size_t s = req.sequence_length;
  const std::size_t n_axes = req.target_shape.size();

  std::vector<std::vector<std::vector<Index>>> per_axis;
  long double raw = 1.0L;
  for (Index dim : req.target_shape) {
    per_axis.push_back(enumerate_factorizations(dim, s));
    raw *= static_cast<long double>(per_axis.back().size());
  }
  raw *= std::pow(static_cast<long double>(req.max_rank), static_cast<long double>(s - 1));
  detail::require(raw <= static_cast<long double>(req.max_candidates), ErrorCode::kCapExceeded,
                  "enumeration would visit " + std::to_string(static_cast<double>(raw)) +
                      " combinations, cap is " + std::to_string(req.max_candidates));

  std::set<std::pair<FactorShapeMatrix, RankVector>> seen;
  std::vector<CandidateConfig> out;
  std::vector<std::size_t> choice(n_axes, 0);
  for (;;) {
    std::vector<Shape> rows(s, Shape(n_axes));
    for (std::size_t n = 0; n < n_axes; ++n)
      for (std::size_t k = 0; k < s; ++k) rows[k][n] = per_axis[n][choice[n]][k];
    FactorShapeMatrix shapes(rows);
    const auto caps = full_ranks(shapes);

    std::vector<Index> ranks(s - 1, 1);
    for (;;) {
      bool ok = true;
      for (std::size_t k = 0; k < ranks.size(); ++k) ok = ok && ranks[k] <= caps[k];
      if (ok) {
        RankVector rv(ranks);
        if (seen.emplace(shapes, rv).second)
          out.push_back({shapes, rv, compression_ratio(shapes, rv),
                         n_axes == 4 ? flops_ratio(shapes, rv) : 0.0, std::nullopt});
      }
      std::size_t k = ranks.size();
      while (k-- > 0) {
        if (++ranks[k] <= req.max_rank) break;
        ranks[k] = 1;
      }
      if (k == static_cast<std::size_t>(-1)) break;
    }

    std::size_t n = n_axes;
    while (n-- > 0) {
      if (++choice[n] < per_axis[n].size()) break;
      choice[n] = 0;
    }
    if (n == static_cast<std::size_t>(-1)) break;
  }
  return out;
}

/// Random factors with the layout of `config`; latency does not depend on values.
inline KroneckerSequence random_sequence(const FactorShapeMatrix& shapes, const RankVector& ranks,
                                         std::uint64_t seed = 7) {
  auto seq = KroneckerSequence::zeros(shapes, ranks);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  for (auto& f : seq.factors)
    for (double& v : f.data()) v = dist(rng);
  return seq;
}

namespace detail {

template <class Fn>
double median_ms(int trials, Fn&& fn) {
  detail::require(trials >= 3, ErrorCode::kInvalidArgument, "need at least 3 trials");
  fn();  // warm-up
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const auto stop = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t mid = times.size() / 2;
  const double med = times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
  return std::max(med, std::numeric_limits<double>::min());
}

inline DenseTensor random_tensor(Shape shape, std::uint64_t seed) {
  DenseTensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace detail

/// Median single-threaded wall clock of the factorized convolution on a
/// (batch, C, H, W) workload, in milliseconds.
inline double measure_latency(const KroneckerSequence& seq, std::span<const Index> workload, int trials,
                              const ConvOptions& opts = {}) {
  conv_geometry(workload, seq.target_shape(), opts);
  const DenseTensor x = detail::random_tensor(Shape(workload.begin(), workload.end()), 11);
  volatile double sink = 0.0;
  const double ms = detail::median_ms(trials, [&] { sink = sink + sekron_conv2d(x, seq, opts)[0]; });
  return ms;
}

inline double measure_latency(const CandidateConfig& config, std::span<const Index> workload, int trials,
                              const ConvOptions& opts = {}) {
  return measure_latency(random_sequence(config.shapes, config.ranks), workload, trials, opts);
}

/// Dense baseline: direct convolution with an uncompressed weight.
inline double measure_dense_latency(std::span<const Index> weight_shape, std::span<const Index> workload,
                                    int trials, const ConvOptions& opts = {}) {
  conv_geometry(workload, weight_shape, opts);
  const DenseTensor x = detail::random_tensor(Shape(workload.begin(), workload.end()), 11);
  const DenseTensor w = detail::random_tensor(Shape(weight_shape.begin(), weight_shape.end()), 13);
  volatile double sink = 0.0;
  return detail::median_ms(trials, [&] { sink = sink + conv2d_reference(x, w, opts)[0]; });
}

/// Compression ratios closer than this count as tied.
inline constexpr double kCrTieTolerance = 1e-9;

/// Among candidates within the latency budget (all of them when there is no
/// budget), picks the one whose CR is closest to target_cr. Ties go to lower
/// latency, then lexicographically smaller shapes, then smaller ranks, so the
/// result does not depend on the order of `candidates`.
inline CandidateConfig select_config(std::span<const CandidateConfig> candidates, double target_cr,
                                     std::optional<double> latency_budget_ms) {
  detail::require(!candidates.empty(), ErrorCode::kNoFeasibleConfig, "candidate list is empty");
  std::vector<const CandidateConfig*> feasible;
  for (const auto& c : candidates) {
    if (latency_budget_ms) {
      detail::require(c.latency_ms.has_value(), ErrorCode::kInvalidArgument,
                      "latency budget given but candidate " + c.shapes.to_string() + " has no latency");
      if (*c.latency_ms > *latency_budget_ms) continue;
    }
    feasible.push_back(&c);
  }
  detail::require(!feasible.empty(), ErrorCode::kNoFeasibleConfig,
                  "no candidate meets the latency budget of " +
                      std::to_string(latency_budget_ms.value_or(0.0)) + " ms");

  double best_gap = std::numeric_limits<double>::infinity();
  for (const auto* c : feasible) best_gap = std::min(best_gap, std::abs(c->cr - target_cr));

  const CandidateConfig* best = nullptr;
  auto key = [](const CandidateConfig* c) {
    return std::make_tuple(c->latency_ms.value_or(std::numeric_limits<double>::infinity()), c->shapes, c->ranks);
  };
  for (const auto* c : feasible) {
    if (std::abs(c->cr - target_cr) > best_gap + kCrTieTolerance) continue;
    if (!best || key(c) < key(best)) best = c;
  }
  return *best;
}

/// Candidate sweep as CSV with columns shapes, ranks, cr, fr, latency_ms.
inline void write_candidates_csv(std::ostream& os, std::span<const CandidateConfig> candidates) {
  os << "shapes,ranks,cr,fr,latency_ms\n";
  const auto old_precision = os.precision(17);
  for (const auto& c : candidates) {
    os << '"' << c.shapes.to_string() << "\",\"" << c.ranks.to_string() << "\"," << c.cr << ',' << c.fr << ',';
    if (c.latency_ms) os << *c.latency_ms;
    os << '\n';
  }
  os.precision(old_precision);
}

}  // namespace sekron
