#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "iodcbf/errors.hpp"

namespace iodcbf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace numkit {

/// Per-variable box; use -inf / +inf for a missing side.
struct VariableBounds {
  Vec lower;
  Vec upper;

  static VariableBounds free(Index n) {
    return {Vec::Constant(n, -kInf), Vec::Constant(n, kInf)};
  }
};

/// minimize objective' z  s.t.  ineq_lhs z <= ineq_rhs, bounds.
struct LpProblem {
  Vec objective;
  Mat ineq_lhs;
  Vec ineq_rhs;
  std::optional<VariableBounds> bounds;

  Index num_vars() const { return objective.size(); }
  void validate() const;
};

/// minimize 0.5 z' quad z + lin' z  s.t.  ineq_lhs z <= ineq_rhs, bounds.
struct QpProblem {
  Mat quad;
  Vec lin;
  Mat ineq_lhs;
  Vec ineq_rhs;
  std::optional<VariableBounds> bounds;

  Index num_vars() const { return lin.size(); }
  void validate() const;
};

enum class SolveKind { Optimal, Infeasible, Unbounded, NumericalFailure };

constexpr std::string_view to_string(SolveKind kind) {
  switch (kind) {
    case SolveKind::Optimal: return "Optimal";
    case SolveKind::Infeasible: return "Infeasible";
    case SolveKind::Unbounded: return "Unbounded";
    case SolveKind::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

struct SolveStatus {
  SolveKind kind = SolveKind::NumericalFailure;
  std::optional<Vec> solution;
  std::optional<double> objective_value;
  // Multipliers (>= 0) for the rows of ineq_lhs; present on Optimal.
  std::optional<Vec> dual;
  // Recession direction along which the objective decreases; on Unbounded.
  std::optional<Vec> ray;
  // Rows of ineq_lhs in the final working set (QP only).
  std::vector<Index> active_set;
  int iterations = 0;

  bool optimal() const { return kind == SolveKind::Optimal; }
};

namespace detail {

inline bool all_finite(const Mat& m) { return m.allFinite(); }

inline void validate_bounds(const std::optional<VariableBounds>& bounds, Index n) {
  if (!bounds) return;
  require(bounds->lower.size() == n && bounds->upper.size() == n, ErrorCode::ShapeMismatch,
          "bounds length must equal the number of variables");
  for (Index i = 0; i < n; ++i) {
    require(!std::isnan(bounds->lower[i]) && !std::isnan(bounds->upper[i]),
            ErrorCode::InvalidArgument, "bounds must not be NaN");
    require(bounds->lower[i] != kInf && bounds->upper[i] != -kInf, ErrorCode::InvalidArgument,
            "bound sides point the wrong way");
  }
}

}  // namespace detail

inline void LpProblem::validate() const {
  const Index n = objective.size();
  require(ineq_lhs.rows() == ineq_rhs.size(), ErrorCode::ShapeMismatch,
          "ineq_lhs row count must equal ineq_rhs length");
  require(ineq_lhs.rows() == 0 || ineq_lhs.cols() == n, ErrorCode::ShapeMismatch,
          "ineq_lhs column count must equal objective length");
  require(objective.allFinite() && detail::all_finite(ineq_lhs) && ineq_rhs.allFinite(),
          ErrorCode::InvalidArgument, "LP data must be finite");
  detail::validate_bounds(bounds, n);
}

inline void QpProblem::validate() const {
  const Index n = lin.size();
  require(quad.rows() == n && quad.cols() == n, ErrorCode::ShapeMismatch,
          "quad must be square with the size of lin");
  require(ineq_lhs.rows() == ineq_rhs.size(), ErrorCode::ShapeMismatch,
          "ineq_lhs row count must equal ineq_rhs length");
  require(ineq_lhs.rows() == 0 || ineq_lhs.cols() == n, ErrorCode::ShapeMismatch,
          "ineq_lhs column count must equal lin length");
  require(quad.allFinite() && lin.allFinite() && detail::all_finite(ineq_lhs) &&
              ineq_rhs.allFinite(),
          ErrorCode::InvalidArgument, "QP data must be finite");
  if (n > 0) {
    const double scale = std::max(1.0, quad.cwiseAbs().maxCoeff());
    require((quad - quad.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
            ErrorCode::InvalidArgument, "quad must be symmetric");
    const Eigen::SelfAdjointEigenSolver<Mat> eig(quad, Eigen::EigenvaluesOnly);
    require(eig.eigenvalues().minCoeff() >= -1e-10 * scale, ErrorCode::InvalidArgument,
            "quad must be positive semidefinite");
  }
  detail::validate_bounds(bounds, n);
}

}  // namespace numkit
}  // namespace iodcbf
