#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "iodcbf/numkit/types.hpp"

namespace iodcbf::numkit {

/// Default rank threshold: max(rows, cols) * eps * sigma_max.
inline double default_rank_tol(const Eigen::JacobiSVD<Mat>& svd, Index rows, Index cols) {
  const auto& s = svd.singularValues();
  const double smax = s.size() > 0 ? s[0] : 0.0;
  return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() * smax;
}

/// Number of singular values strictly above `tol` (default threshold when
/// `tol` is empty).
inline Index numeric_rank(const Mat& m, std::optional<double> tol = std::nullopt) {
  if (m.size() == 0) return 0;
  require(m.allFinite(), ErrorCode::InvalidArgument, "numeric_rank: matrix must be finite");
  require(!tol || *tol > 0.0, ErrorCode::InvalidArgument, "numeric_rank: tol must be positive");
  const Eigen::JacobiSVD<Mat> svd(m);
  const double thr = tol ? *tol : default_rank_tol(svd, m.rows(), m.cols());
  Index r = 0;
  for (Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > thr) ++r;
  return r;
}

/// Pseudoinverse solution X = target * pinv(w), without any residual check.
inline Mat pinv_right_solve(const Mat& w, const Mat& target,
                            std::optional<double> tol = std::nullopt) {
  require(w.cols() == target.cols(), ErrorCode::ShapeMismatch,
          "min_norm_solve: w and target must have the same column count");
  if (w.size() == 0) return Mat::Zero(target.rows(), w.rows());
  const Eigen::JacobiSVD<Mat> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double thr = tol ? *tol : default_rank_tol(svd, w.rows(), w.cols());
  const auto& s = svd.singularValues();
  Vec inv_s = Vec::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i)
    if (s[i] > thr) inv_s[i] = 1.0 / s[i];
  // pinv(w) = V diag(1/s) U'
  return (target * svd.matrixV()) * inv_s.asDiagonal() * svd.matrixU().transpose();
}

/// Minimum-Frobenius-norm R with R w = target. Throws ResidualTooLarge when
/// the best R misses the target by more than 1e-9 relative.
inline Mat min_norm_solve(const Mat& w, const Mat& target, double rel_tol = 1e-9) {
  require(w.allFinite() && target.allFinite(), ErrorCode::InvalidArgument,
          "min_norm_solve: inputs must be finite");
  Mat r = pinv_right_solve(w, target);
  const double residual = (r * w - target).norm();
  if (residual > rel_tol * target.norm()) {
    throw Error(ErrorCode::ResidualTooLarge,
                "min_norm_solve: residual " + std::to_string(residual) +
                    " exceeds tolerance; data are inconsistent");
  }
  return r;
}

}  // namespace iodcbf::numkit
