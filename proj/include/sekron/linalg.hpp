#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>

#include <cmath>
#include <string>

#include "sekron/error.hpp"

namespace sekron {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thin SVD m = u * diag(s) * v^T with R = min(rows, cols).
struct SvdResult {
  Matrix u;  // rows x R, orthonormal columns
  Vector s;  // non-increasing, >= 0
  Matrix v;  // cols x R, orthonormal columns

  Eigen::Index rank_capacity() const noexcept { return s.size(); }
};

/// Left vectors and sigma-scaled right vectors of a truncated SVD.
struct TruncatedSvd {
  Matrix left;   // rows x r_hat
  Matrix right;  // cols x r_hat, column r scaled by s_r
};

/// Each (u_r, v_r) pair is flipped so the largest-magnitude entry of u_r is
/// positive; the first such entry wins ties.
inline SvdResult svd(const Matrix& m) {
  detail::require(m.rows() > 0 && m.cols() > 0, ErrorCode::kInvalidArgument, "svd of empty matrix");
  detail::require(m.allFinite(), ErrorCode::kInvalidArgument, "svd input has non-finite entries");

  Eigen::JacobiSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  detail::require(solver.info() == Eigen::Success, ErrorCode::kNonConvergence,
                  std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + " matrix");

  SvdResult out{solver.matrixU(), solver.singularValues(), solver.matrixV()};
  for (Eigen::Index r = 0; r < out.s.size(); ++r) {
    Eigen::Index arg = 0;
    out.u.col(r).cwiseAbs().maxCoeff(&arg);
    if (out.u(arg, r) < 0.0) {
      out.u.col(r) *= -1.0;
      out.v.col(r) *= -1.0;
    }
  }
  return out;
}

inline TruncatedSvd truncate(const SvdResult& res, Eigen::Index r_hat) {
  detail::require(r_hat >= 1 && r_hat <= res.s.size(), ErrorCode::kRankExceeded,
                  "truncation rank " + std::to_string(r_hat) + " outside [1, " +
                      std::to_string(res.s.size()) + "]");
  TruncatedSvd out{res.u.leftCols(r_hat), res.v.leftCols(r_hat)};
  for (Eigen::Index r = 0; r < r_hat; ++r) out.right.col(r) *= res.s(r);
  return out;
}

/// Sum of squared singular values beyond the first r_hat.
inline double tail_energy(const SvdResult& res, Eigen::Index r_hat) {
  detail::require(r_hat >= 0 && r_hat <= res.s.size(), ErrorCode::kRankExceeded,
                  "tail rank " + std::to_string(r_hat) + " outside [0, " +
                      std::to_string(res.s.size()) + "]");
  return res.s.tail(res.s.size() - r_hat).squaredNorm();
}

}  // namespace sekron
