#pragma once

// Primal active-set method for strictly convex QPs.
//
// A feasible start comes from the caller (warm start) or from a phase-1 LP.
// Each iteration solves the equality-constrained subproblem on the working set
// through its KKT system, then either steps to the nearest blocking
// constraint or drops the working constraint with the most negative
// multiplier.

#include <algorithm>
#include <cmath>
#include <vector>

#include "iodcbf/numkit/lp.hpp"
#include "iodcbf/numkit/types.hpp"

namespace iodcbf::numkit {

struct QpOptions {
  double feas_tol = 1e-9;
  double step_tol = 1e-12;
  double mult_tol = 1e-12;
  int max_iterations = 5000;
};

/// Optional warm start: a candidate point and working set (row indices into the
/// stacked constraint list, bounds appended after ineq rows).
struct QpWarmStart {
  Vec point;
  std::vector<Index> working_set;
};

namespace detail {

struct StackedConstraints {
  Mat lhs;
  Vec rhs;
};

inline StackedConstraints stack_bounds(const QpProblem& p) {
  const Index n = p.num_vars();
  std::vector<std::pair<Index, double>> extra;  // (signed var index + 1, value)
  if (p.bounds) {
    for (Index j = 0; j < n; ++j) {
      if (std::isfinite(p.bounds->upper[j])) extra.emplace_back(j + 1, p.bounds->upper[j]);
      if (std::isfinite(p.bounds->lower[j])) extra.emplace_back(-(j + 1), -p.bounds->lower[j]);
    }
  }
  const Index m = p.ineq_lhs.rows();
  StackedConstraints s{Mat::Zero(m + static_cast<Index>(extra.size()), n),
                       Vec(m + static_cast<Index>(extra.size()))};
  if (m > 0) {
    s.lhs.topRows(m) = p.ineq_lhs;
    s.rhs.head(m) = p.ineq_rhs;
  }
  for (std::size_t k = 0; k < extra.size(); ++k) {
    const auto [sj, v] = extra[k];
    const Index row = m + static_cast<Index>(k);
    s.lhs(row, std::abs(sj) - 1) = sj > 0 ? 1.0 : -1.0;
    s.rhs[row] = v;
  }
  return s;
}

/// |a_i z - b_i| / |a_i| over the given rows: distance to each hyperplane.
inline double row_distance(const StackedConstraints& s, Index i, const Vec& z) {
  const double nrm = s.lhs.row(i).norm();
  const double r = s.lhs.row(i).dot(z) - s.rhs[i];
  return nrm > 0.0 ? r / nrm : r;
}

}  // namespace detail

inline SolveStatus solve_qp(const QpProblem& problem, const QpOptions& opt = {},
                            const QpWarmStart* warm = nullptr) {
  problem.validate();
  const Index n = problem.num_vars();
  const auto cons = detail::stack_bounds(problem);
  const Index mc = cons.lhs.rows();
  const Mat& a = cons.lhs;
  const Vec& b = cons.rhs;
  const double scale = std::max(1.0, mc > 0 ? b.cwiseAbs().maxCoeff() : 0.0);
  const double feas = opt.feas_tol * scale;

  SolveStatus status;
  Vec z;
  std::vector<Index> work;

  // A warm point is taken only if it is feasible to rounding: the null-space
  // steps never repair a violated row, so a violation admitted here would
  // survive into the solution. Slack on a warm working row would likewise pin
  // the solution to a shifted plane.
  bool use_warm = warm != nullptr && warm->point.size() == n && warm->point.allFinite();
  const double warm_tol = use_warm ? 1e-13 * (1.0 + warm->point.lpNorm<Eigen::Infinity>()) : 0.0;
  for (Index i = 0; use_warm && i < mc; ++i)
    use_warm = detail::row_distance(cons, i, warm->point) <= warm_tol;
  if (use_warm) {
    z = warm->point;
    for (Index i : warm->working_set) {
      if (i >= 0 && i < mc && std::abs(detail::row_distance(cons, i, z)) <= warm_tol)
        work.push_back(i);
    }
  } else {
    LpProblem phase1{Vec::Zero(n), a, b, std::nullopt};
    const SolveStatus lp = solve_lp(phase1);
    if (lp.kind == SolveKind::Infeasible) {
      status.kind = SolveKind::Infeasible;
      return status;
    }
    if (!lp.optimal()) {
      status.kind = SolveKind::NumericalFailure;
      return status;
    }
    z = *lp.solution;
    for (Index i = 0; i < mc; ++i)
      if (std::abs(a.row(i).dot(z) - b[i]) <= feas) work.push_back(i);
  }

  // Keep a linearly independent subset of the initial working set.
  {
    std::vector<Index> independent;
    Mat rows(0, n);
    for (Index i : work) {
      if (static_cast<Index>(independent.size()) >= n) break;
      Mat trial(rows.rows() + 1, n);
      trial << rows, a.row(i);
      Eigen::ColPivHouseholderQR<Mat> qr(trial.transpose());
      qr.setThreshold(1e-10);
      if (qr.rank() == trial.rows()) {
        rows = std::move(trial);
        independent.push_back(i);
      }
    }
    work = std::move(independent);
  }

  Vec mult_full = Vec::Zero(mc);
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    const Index k = static_cast<Index>(work.size());
    const Vec g = problem.quad * z + problem.lin;
    // Null-space step: p = -Z (Z'QZ)^{-1} Z'g with Z an orthonormal basis of
    // null(A_w), so A_w p = 0 to rounding even when working rows are nearly
    // parallel. Multipliers then solve A_w' mu = -(g + Q p) by QR.
    Mat aw(k, n);
    for (Index r = 0; r < k; ++r) aw.row(r) = a.row(work[static_cast<std::size_t>(r)]);
    Mat z_basis = Mat::Identity(n, n);
    Eigen::HouseholderQR<Mat> qr_w;
    if (k > 0) {
      qr_w.compute(aw.transpose());
      const Mat q_full = qr_w.householderQ() * Mat::Identity(n, n);
      z_basis = q_full.rightCols(n - k);
    }
    Vec step = Vec::Zero(n);
    if (n - k > 0) {
      const Mat reduced = z_basis.transpose() * problem.quad * z_basis;
      const Eigen::LDLT<Mat> ldlt(reduced);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
          ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, reduced.diagonal().cwiseAbs().maxCoeff())) {
        status.kind = SolveKind::NumericalFailure;
        status.iterations = it;
        return status;
      }
      step = -z_basis * ldlt.solve(z_basis.transpose() * g);
    }
    Vec mu(k);
    if (k > 0) mu = qr_w.solve(Vec(-(g + problem.quad * step)));

    if (step.lpNorm<Eigen::Infinity>() <= opt.step_tol * (1.0 + z.lpNorm<Eigen::Infinity>())) {
      Index drop = -1;
      double most_negative = -opt.mult_tol * (1.0 + g.lpNorm<Eigen::Infinity>());
      for (Index r = 0; r < k; ++r) {
        if (mu[r] < most_negative) {
          most_negative = mu[r];
          drop = r;
        }
      }
      if (drop < 0) {
        mult_full.setZero();
        for (Index r = 0; r < k; ++r)
          mult_full[work[static_cast<std::size_t>(r)]] = std::max(mu[r], 0.0);
        break;
      }
      work.erase(work.begin() + drop);
      continue;
    }

    double alpha = 1.0;
    Index block = -1;
    for (Index i = 0; i < mc; ++i) {
      if (std::find(work.begin(), work.end(), i) != work.end()) continue;
      const double ap = a.row(i).dot(step);
      if (ap <= 1e-14 * (1.0 + step.lpNorm<Eigen::Infinity>())) continue;
      const double room = std::max(b[i] - a.row(i).dot(z), 0.0);
      const double ratio = room / ap;
      if (ratio < alpha) {
        alpha = ratio;
        block = i;
      }
    }
    z += alpha * step;
    if (block >= 0) work.push_back(block);
  }
  status.iterations = it;
  if (it >= opt.max_iterations || !z.allFinite()) {
    status.kind = SolveKind::NumericalFailure;
    return status;
  }

  status.kind = SolveKind::Optimal;
  status.objective_value = 0.5 * z.dot(problem.quad * z) + problem.lin.dot(z);
  const Index m = problem.ineq_lhs.rows();
  status.dual = mult_full.head(m);
  status.active_set = work;
  std::sort(status.active_set.begin(), status.active_set.end());
  status.solution = std::move(z);
  return status;
}

}  // namespace iodcbf::numkit
