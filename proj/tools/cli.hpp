#pragma once

// `sekron` command-line front end. All diagnostics go to `err`; results are
// written to `out` as one JSON object per line.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sekron/sekron.hpp"

namespace sekron::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kInvalidArgument = 3,
  kShapeMismatch = 4,
  kRankExceeded = 5,
  kOutOfRange = 6,
  kNonConvergence = 7,
  kCapExceeded = 8,
  kNoFeasibleConfig = 9,
  kIo = 10,
  kBadMagic = 11,
  kVersionMismatch = 12,
  kTruncatedPayload = 13,
  kTrailingBytes = 14,
  kMalformedHeader = 15,
};

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return kInvalidArgument;
    case ErrorCode::kShapeMismatch: return kShapeMismatch;
    case ErrorCode::kRankExceeded: return kRankExceeded;
    case ErrorCode::kOutOfRange: return kOutOfRange;
    case ErrorCode::kNonConvergence: return kNonConvergence;
    case ErrorCode::kCapExceeded: return kCapExceeded;
    case ErrorCode::kNoFeasibleConfig: return kNoFeasibleConfig;
    case ErrorCode::kIo: return kIo;
    case ErrorCode::kBadMagic: return kBadMagic;
    case ErrorCode::kVersionMismatch: return kVersionMismatch;
    case ErrorCode::kTruncatedPayload: return kTruncatedPayload;
    case ErrorCode::kTrailingBytes: return kTrailingBytes;
    case ErrorCode::kMalformedHeader: return kMalformedHeader;
  }
  return kInternal;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, sep)) parts.push_back(item);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

inline Index parse_positive(const std::string& token) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(token, &used);
  } catch (const std::exception&) {
    throw UsageError("expected a positive integer, got '" + token + "'");
  }
  if (used != token.size() || v == 0 || token.front() == '-')
    throw UsageError("expected a positive integer, got '" + token + "'");
  return static_cast<Index>(v);
}

inline std::vector<Index> parse_list(const std::string& text, char sep) {
  std::vector<Index> out;
  for (const auto& tok : split(text, sep)) out.push_back(parse_positive(tok));
  if (out.empty()) throw UsageError("empty list");
  return out;
}

/// "2x2x1x1,2x2x3x3" -> rows (2,2,1,1), (2,2,3,3)
inline FactorShapeMatrix parse_shapes(const std::string& text) {
  std::vector<Shape> rows;
  for (const auto& factor : split(text, ',')) rows.push_back(parse_list(factor, 'x'));
  if (rows.empty()) throw UsageError("no factor shapes given");
  return FactorShapeMatrix(std::move(rows));
}

/// Comma-separated ranks, or "full" for every level's full rank.
inline RankVector parse_ranks(const std::string& text, const FactorShapeMatrix& shapes) {
  if (text == "full") return RankVector(full_ranks(shapes));
  if (text.empty()) return RankVector{};
  return RankVector(parse_list(text, ','));
}

inline nlohmann::json config_json(const CandidateConfig& c) {
  nlohmann::json j{{"shapes", c.shapes.to_string()}, {"ranks", c.ranks.values()}, {"cr", c.cr}, {"fr", c.fr}};
  j["latency_ms"] = c.latency_ms ? nlohmann::json(*c.latency_ms) : nlohmann::json(nullptr);
  return j;
}

inline double max_relative_diff(const DenseTensor& a, const DenseTensor& ref) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - ref[i]));
    scale = std::max(scale, std::abs(ref[i]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kronecker-sequence tensor decomposition and factorized convolution", "sekron"};
  app.require_subcommand(1);

  // decompose
  auto* decompose = app.add_subcommand("decompose", "Decompose a tensor into a Kronecker sequence");
  std::string dec_input, dec_output, dec_shapes, dec_ranks;
  bool dec_report = false;
  unsigned dec_threads = 1;
  decompose->add_option("--input", dec_input, "input tensor (.skt)")->required();
  decompose->add_option("--shapes", dec_shapes, "factor shapes, e.g. 2x2x1x1,2x2x3x3")->required();
  decompose->add_option("--ranks", dec_ranks, "ranks per level, comma separated, or 'full'");
  decompose->add_option("--output", dec_output, "output sequence (.sks)")->required();
  decompose->add_flag("--report", dec_report, "print error, bound, CR, FR and parameter count");
  decompose->add_option("--threads", dec_threads, "threads for per-branch SVDs");

  auto* recon = app.add_subcommand("reconstruct", "Rebuild the dense tensor from a sequence");
  std::string rec_input, rec_output;
  recon->add_option("--input", rec_input, "input sequence (.sks)")->required();
  recon->add_option("--output", rec_output, "output tensor (.skt)")->required();

  auto* conv = app.add_subcommand("conv", "2D convolution with factorized weights");
  std::string conv_weights, conv_input, conv_output;
  Index conv_padding = 0;
  bool conv_reference = false, conv_check = false;
  conv->add_option("--weights", conv_weights, "weight sequence over (F, C, Kh, Kw)")->required();
  conv->add_option("--input", conv_input, "input tensor (N, C, H, W)")->required();
  conv->add_option("--output", conv_output, "output tensor")->required();
  conv->add_option("--padding", conv_padding, "symmetric zero padding");
  conv->add_flag("--reference", conv_reference, "reconstruct the weight and convolve densely");
  conv->add_flag("--check", conv_check, "also run the other path and print the max relative difference");

  auto* convert = app.add_subcommand("convert", "Embed CP/Tucker/TT/TR factors as a Kronecker sequence");
  std::string conv_from, convert_output;
  std::vector<std::string> convert_inputs;
  convert->add_option("--from", conv_from, "source format")->required()->check(CLI::IsMember({"cp", "tucker", "tt", "tr"}));
  convert->add_option("--input", convert_inputs, "factor tensors (.skt), in format order")->required();
  convert->add_option("--output", convert_output, "output sequence (.sks)")->required();

  auto* plan = app.add_subcommand("plan", "Enumerate, benchmark and select factorization configs");
  std::string plan_shape, plan_bench, plan_out;
  std::size_t plan_seq = 2;
  double plan_cr = 1.0;
  std::optional<double> plan_budget;
  Index plan_max_rank = 2, plan_padding = 1;
  int plan_trials = 5;
  std::uint64_t plan_cap = 1'000'000;
  bool plan_speedup = false;
  plan->add_option("--shape", plan_shape, "layer shape F,C,KH,KW")->required();
  plan->add_option("--seq-len", plan_seq, "sequence length S")->required();
  plan->add_option("--target-cr", plan_cr, "desired compression ratio")->required();
  plan->add_option("--latency-budget-ms", plan_budget, "maximum median latency");
  plan->add_option("--bench-input", plan_bench, "benchmark workload N,C,H,W");
  plan->add_option("--out", plan_out, "candidate sweep CSV")->required();
  plan->add_option("--max-rank", plan_max_rank, "largest rank per level");
  plan->add_option("--trials", plan_trials, "timed runs per candidate");
  plan->add_option("--padding", plan_padding, "padding used for benchmarking");
  plan->add_option("--max-candidates", plan_cap, "enumeration cap");
  plan->add_flag("--require-speedup", plan_speedup, "also require latency below the dense layer");

  auto* bench = app.add_subcommand("bench", "Median latency of the factorized convolution");
  std::string bench_weights, bench_shape;
  int bench_trials = 11;
  Index bench_padding = 0;
  bench->add_option("--weights", bench_weights, "weight sequence (.sks)")->required();
  bench->add_option("--input-shape", bench_shape, "workload N,C,H,W")->required();
  bench->add_option("--trials", bench_trials, "timed runs");
  bench->add_option("--padding", bench_padding, "symmetric zero padding");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*decompose) {
      const DenseTensor w = read_tensor(dec_input);
      const FactorShapeMatrix shapes = parse_shapes(dec_shapes);
      const RankVector ranks = parse_ranks(dec_ranks, shapes);
      const auto dec = sekron_decompose_traced(w, shapes, ranks, {dec_threads});
      write_sequence(dec_output, dec.sequence);
      if (dec_report) {
        const double error = reconstruction_error(w, dec.sequence);
        const double norm = w.squared_norm();
        nlohmann::json report{
            {"frobenius_error", error},
            {"relative_error", norm > 0.0 ? std::sqrt(error / norm) : std::sqrt(error)},
            {"error_bound", truncation_energy(dec.spectra, shapes, ranks).bound()},
            {"cr", compression_ratio(shapes, ranks)},
            {"param_count", dec.sequence.param_count()},
        };
        report["fr"] = shapes.num_axes() == 4 ? nlohmann::json(flops_ratio(shapes, ranks)) : nlohmann::json(nullptr);
        out << report.dump() << "\n";
      }
    } else if (*recon) {
      const DenseTensor w = reconstruct(read_sequence(rec_input));
      write_tensor(rec_output, w);
      out << nlohmann::json{{"output", rec_output}, {"shape", w.shape()}}.dump() << "\n";
    } else if (*conv) {
      const KroneckerSequence seq = read_sequence(conv_weights);
      const DenseTensor x = read_tensor(conv_input);
      const ConvOptions opts{conv_padding};
      auto dense_path = [&] { return conv2d_reference(x, reconstruct(seq), opts); };
      const DenseTensor y = conv_reference ? dense_path() : sekron_conv2d(x, seq, opts);
      write_tensor(conv_output, y);
      nlohmann::json j{{"output", conv_output}, {"shape", y.shape()}, {"mode", conv_reference ? "reference" : "sekron"}};
      if (conv_check) {
        const DenseTensor other = conv_reference ? sekron_conv2d(x, seq, opts) : dense_path();
        j["max_rel_diff"] = conv_reference ? max_relative_diff(other, y) : max_relative_diff(y, other);
      }
      out << j.dump() << "\n";
    } else if (*convert) {
      std::vector<DenseTensor> parts;
      for (const auto& path : convert_inputs) parts.push_back(read_tensor(path));
      KroneckerSequence seq;
      if (conv_from == "cp") {
        seq = from_cp(CpFactors{parts});
      } else if (conv_from == "tucker") {
        if (parts.size() < 2) throw UsageError("tucker needs the core followed by one matrix per axis");
        seq = from_tucker(TuckerFactors{parts.front(), {parts.begin() + 1, parts.end()}});
      } else if (conv_from == "tt") {
        seq = from_tt(TrCores{parts});
      } else {
        seq = from_tr(TrCores{parts});
      }
      write_sequence(convert_output, seq);
      out << nlohmann::json{{"output", convert_output},
                            {"factor_shapes", seq.shapes.to_string()},
                            {"ranks", seq.ranks.values()},
                            {"param_count", seq.param_count()}}
                 .dump()
          << "\n";
    } else if (*plan) {
      PlanRequest req;
      req.target_shape = parse_list(plan_shape, ',');
      if (req.target_shape.size() != 4) throw UsageError("--shape needs F,C,KH,KW");
      req.sequence_length = plan_seq;
      req.target_cr = plan_cr;
      req.latency_budget_ms = plan_budget;
      req.max_rank = plan_max_rank;
      req.max_candidates = plan_cap;
      if ((plan_budget || plan_speedup) && plan_bench.empty())
        throw UsageError("--latency-budget-ms and --require-speedup need --bench-input");

      std::vector<CandidateConfig> candidates = enumerate_configs(req);
      nlohmann::json result;
      std::optional<double> budget = plan_budget;
      if (!plan_bench.empty()) {
        const Shape workload = parse_list(plan_bench, ',');
        if (workload.size() != 4) throw UsageError("--bench-input needs N,C,H,W");
        const ConvOptions opts{plan_padding};
        const double baseline = measure_dense_latency(req.target_shape, workload, plan_trials, opts);
        for (auto& c : candidates) c.latency_ms = measure_latency(c, workload, plan_trials, opts);
        result["baseline_latency_ms"] = baseline;
        if (plan_speedup) budget = budget ? std::min(*budget, baseline) : baseline;
      }
      {
        std::ofstream csv(plan_out);
        if (!csv) throw Error(ErrorCode::kIo, "cannot open " + plan_out + " for writing");
        write_candidates_csv(csv, candidates);
      }
      result["candidates"] = candidates.size();
      result["selected"] = config_json(select_config(candidates, req.target_cr, budget));
      out << result.dump() << "\n";
    } else if (*bench) {
      const KroneckerSequence seq = read_sequence(bench_weights);
      const Shape workload = parse_list(bench_shape, ',');
      if (workload.size() != 4) throw UsageError("--input-shape needs N,C,H,W");
      const double ms = measure_latency(seq, workload, bench_trials, ConvOptions{bench_padding});
      out << nlohmann::json{{"median_ms", ms}, {"trials", bench_trials}}.dump() << "\n";
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}

}  // namespace sekron::cli
