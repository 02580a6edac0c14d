#pragma once

// Dense two-phase simplex on a full tableau.
//
// General variables are mapped to nonnegative ones (shift by a finite lower
// bound, flip about a finite upper bound, or split when free). Every row gets a
// slack; rows with a negative right-hand side are negated and receive an
// artificial, so phase 1 only runs when the origin is infeasible. Pricing is
// Dantzig's rule until a run of degenerate pivots is seen, after which the
// solver stays on Bland's rule for the remainder of the solve. Ties are broken
// by lowest index so the whole procedure is deterministic.

#include <algorithm>
#include <cmath>
#include <vector>

#include "iodcbf/numkit/types.hpp"

namespace iodcbf::numkit {

struct LpOptions {
  double feas_tol = 1e-9;
  double pivot_tol = 1e-11;
  double opt_tol = 1e-11;
  int max_iterations = 100000;
  int degenerate_run_before_bland = 25;
};

namespace detail {

enum class ColKind { Shift, Flip, Split };

struct ColMap {
  ColKind kind;
  Index col;       // first tableau column
  double offset;   // lower (Shift) or upper (Flip) bound
};

class Tableau {
 public:
  Tableau(Index rows, Index cols) : t_(Mat::Zero(rows + 1, cols + 1)), basis_(rows, -1) {}

  Mat& data() { return t_; }
  const Mat& data() const { return t_; }
  Index rows() const { return t_.rows() - 1; }
  Index cols() const { return t_.cols() - 1; }
  double& rhs(Index i) { return t_(i, cols()); }
  double rhs(Index i) const { return t_(i, cols()); }
  double& cost(Index j) { return t_(rows(), j); }
  double cost(Index j) const { return t_(rows(), j); }
  std::vector<Index>& basis() { return basis_; }
  const std::vector<Index>& basis() const { return basis_; }

  void pivot(Index p, Index q) {
    const double piv = t_(p, q);
    t_.row(p) /= piv;
    Vec colq = t_.col(q);
    colq(p) = 0.0;
    const Eigen::RowVectorXd rowp = t_.row(p);
    t_.noalias() -= colq * rowp;
    t_.col(q).setZero();
    t_(p, q) = 1.0;
    basis_[static_cast<std::size_t>(p)] = q;
  }

 private:
  Mat t_;
  std::vector<Index> basis_;
};

enum class PhaseOutcome { Optimal, Unbounded, IterationLimit };

struct PhaseResult {
  PhaseOutcome outcome;
  Index entering = -1;
};

// Runs simplex iterations on `tab` using the reduced costs stored in its last
// row. Columns with allowed[j] == false never enter.
inline PhaseResult run_phase(Tableau& tab, const std::vector<bool>& allowed,
                             const LpOptions& opt, int& iterations) {
  bool bland = false;
  int degenerate_run = 0;
  const Index ncols = tab.cols();
  const Index nrows = tab.rows();
  while (true) {
    if (iterations >= opt.max_iterations) return {PhaseOutcome::IterationLimit};
    Index q = -1;
    double best = -opt.opt_tol;
    for (Index j = 0; j < ncols; ++j) {
      if (!allowed[static_cast<std::size_t>(j)]) continue;
      const double d = tab.cost(j);
      if (bland) {
        if (d < -opt.opt_tol) {
          q = j;
          break;
        }
      } else if (d < best) {
        best = d;
        q = j;
      }
    }
    if (q < 0) return {PhaseOutcome::Optimal};

    Index p = -1;
    double best_ratio = kInf;
    for (Index i = 0; i < nrows; ++i) {
      const double a = tab.data()(i, q);
      if (a <= opt.pivot_tol) continue;
      const double ratio = std::max(tab.rhs(i), 0.0) / a;
      if (p < 0) {
        best_ratio = ratio;
        p = i;
        continue;
      }
      const double slack = 1e-12 * (1.0 + best_ratio);
      if (ratio < best_ratio - slack) {
        best_ratio = ratio;
        p = i;
      } else if (ratio <= best_ratio + slack &&
                 tab.basis()[static_cast<std::size_t>(i)] <
                     tab.basis()[static_cast<std::size_t>(p)]) {
        p = i;
      }
    }
    if (p < 0) return {PhaseOutcome::Unbounded, q};

    if (best_ratio <= 1e-12) {
      if (++degenerate_run >= opt.degenerate_run_before_bland) bland = true;
    } else {
      degenerate_run = 0;
    }
    tab.pivot(p, q);
    ++iterations;
  }
}

}  // namespace detail

/// Solves the LP; see LpProblem for the convention. Deterministic for a fixed
/// input. On Optimal, `dual` holds the row multipliers mu >= 0 such that
/// objective + ineq_lhs' mu is balanced by the bound multipliers.
inline SolveStatus solve_lp(const LpProblem& problem, const LpOptions& opt = {}) {
  problem.validate();
  using detail::ColKind;
  const Index n = problem.num_vars();
  const Index m = problem.ineq_lhs.rows();
  const VariableBounds bounds =
      problem.bounds ? *problem.bounds : VariableBounds::free(n);

  SolveStatus status;
  for (Index j = 0; j < n; ++j) {
    if (bounds.lower[j] > bounds.upper[j]) {
      status.kind = SolveKind::Infeasible;
      return status;
    }
  }

  // Variable transformation.
  std::vector<detail::ColMap> maps;
  maps.reserve(static_cast<std::size_t>(n));
  Index ns = 0;
  std::vector<Index> ub_rows_for;  // structural columns needing an upper-bound row
  std::vector<double> ub_values;
  for (Index j = 0; j < n; ++j) {
    const double lo = bounds.lower[j];
    const double hi = bounds.upper[j];
    if (std::isfinite(lo)) {
      maps.push_back({ColKind::Shift, ns, lo});
      if (std::isfinite(hi)) {
        ub_rows_for.push_back(ns);
        ub_values.push_back(hi - lo);
      }
      ns += 1;
    } else if (std::isfinite(hi)) {
      maps.push_back({ColKind::Flip, ns, hi});
      ns += 1;
    } else {
      maps.push_back({ColKind::Split, ns, 0.0});
      ns += 2;
    }
  }
  const Index nb = static_cast<Index>(ub_rows_for.size());
  const Index rows = m + nb;

  Mat a = Mat::Zero(rows, ns);
  Vec b(rows);
  Vec c = Vec::Zero(ns);
  for (Index i = 0; i < m; ++i) b[i] = problem.ineq_rhs[i];
  for (Index j = 0; j < n; ++j) {
    const auto& map = maps[static_cast<std::size_t>(j)];
    const double cj = problem.objective[j];
    switch (map.kind) {
      case ColKind::Shift:
        a.col(map.col).head(m) = problem.ineq_lhs.col(j);
        if (m > 0) b.head(m) -= problem.ineq_lhs.col(j) * map.offset;
        c[map.col] = cj;
        break;
      case ColKind::Flip:
        a.col(map.col).head(m) = -problem.ineq_lhs.col(j);
        if (m > 0) b.head(m) -= problem.ineq_lhs.col(j) * map.offset;
        c[map.col] = -cj;
        break;
      case ColKind::Split:
        a.col(map.col).head(m) = problem.ineq_lhs.col(j);
        a.col(map.col + 1).head(m) = -problem.ineq_lhs.col(j);
        c[map.col] = cj;
        c[map.col + 1] = -cj;
        break;
    }
  }
  for (Index k = 0; k < nb; ++k) {
    a(m + k, ub_rows_for[static_cast<std::size_t>(k)]) = 1.0;
    b[m + k] = ub_values[static_cast<std::size_t>(k)];
  }

  // Tableau layout: [structural | slack | artificial | rhs].
  std::vector<Index> art_rows;
  for (Index i = 0; i < rows; ++i)
    if (b[i] < 0.0) art_rows.push_back(i);
  const Index na = static_cast<Index>(art_rows.size());
  const Index slack0 = ns;
  const Index art0 = ns + rows;
  const Index ncols = ns + rows + na;

  detail::Tableau tab(rows, ncols);
  Mat& t = tab.data();
  for (Index i = 0; i < rows; ++i) {
    const double sign = b[i] < 0.0 ? -1.0 : 1.0;
    t.row(i).head(ns) = sign * a.row(i);
    t(i, slack0 + i) = sign;
    tab.rhs(i) = sign * b[i];
    tab.basis()[static_cast<std::size_t>(i)] = slack0 + i;
  }
  for (Index k = 0; k < na; ++k) {
    const Index i = art_rows[static_cast<std::size_t>(k)];
    t(i, art0 + k) = 1.0;
    tab.basis()[static_cast<std::size_t>(i)] = art0 + k;
  }

  int iterations = 0;
  std::vector<bool> allowed(static_cast<std::size_t>(ncols), true);
  const double scale = std::max(1.0, b.size() > 0 ? b.cwiseAbs().maxCoeff() : 0.0);

  if (na > 0) {
    // Phase 1: minimise the sum of artificials.
    t.row(rows).setZero();
    for (Index k = 0; k < na; ++k) {
      const Index i = art_rows[static_cast<std::size_t>(k)];
      t.row(rows).head(ncols) -= t.row(i).head(ncols);
      t(rows, ncols) -= tab.rhs(i);
    }
    for (Index k = 0; k < na; ++k) t(rows, art0 + k) = 0.0;
    const auto phase1 = detail::run_phase(tab, allowed, opt, iterations);
    if (phase1.outcome == detail::PhaseOutcome::IterationLimit) {
      status.kind = SolveKind::NumericalFailure;
      status.iterations = iterations;
      return status;
    }
    const double infeasibility = -t(rows, ncols);
    if (infeasibility > opt.feas_tol * scale) {
      status.kind = SolveKind::Infeasible;
      status.iterations = iterations;
      return status;
    }
    // Drive zero-valued artificials out of the basis where possible.
    for (Index i = 0; i < rows; ++i) {
      if (tab.basis()[static_cast<std::size_t>(i)] < art0) continue;
      Index q = -1;
      double best = opt.pivot_tol * 100;
      for (Index j = 0; j < art0; ++j) {
        if (std::abs(t(i, j)) > best) {
          best = std::abs(t(i, j));
          q = j;
        }
      }
      if (q >= 0) tab.pivot(i, q);
    }
    for (Index k = 0; k < na; ++k) allowed[static_cast<std::size_t>(art0 + k)] = false;
  }

  // Phase 2 reduced costs.
  Vec full_cost = Vec::Zero(ncols);
  full_cost.head(ns) = c;
  t.row(rows).head(ncols) = full_cost.transpose();
  t(rows, ncols) = 0.0;
  for (Index i = 0; i < rows; ++i) {
    const double cb = full_cost[tab.basis()[static_cast<std::size_t>(i)]];
    if (cb != 0.0) t.row(rows) -= cb * t.row(i);
  }
  const auto phase2 = detail::run_phase(tab, allowed, opt, iterations);
  status.iterations = iterations;
  if (phase2.outcome == detail::PhaseOutcome::IterationLimit) {
    status.kind = SolveKind::NumericalFailure;
    return status;
  }

  auto to_original = [&](const Vec& xs) {
    Vec z(n);
    for (Index j = 0; j < n; ++j) {
      const auto& map = maps[static_cast<std::size_t>(j)];
      switch (map.kind) {
        case ColKind::Shift: z[j] = map.offset + xs[map.col]; break;
        case ColKind::Flip: z[j] = map.offset - xs[map.col]; break;
        case ColKind::Split: z[j] = xs[map.col] - xs[map.col + 1]; break;
      }
    }
    return z;
  };

  if (phase2.outcome == detail::PhaseOutcome::Unbounded) {
    Vec dir = Vec::Zero(ncols);
    dir[phase2.entering] = 1.0;
    for (Index i = 0; i < rows; ++i)
      dir[tab.basis()[static_cast<std::size_t>(i)]] = -t(i, phase2.entering);
    Vec ray(n);
    for (Index j = 0; j < n; ++j) {
      const auto& map = maps[static_cast<std::size_t>(j)];
      switch (map.kind) {
        case ColKind::Shift: ray[j] = dir[map.col]; break;
        case ColKind::Flip: ray[j] = -dir[map.col]; break;
        case ColKind::Split: ray[j] = dir[map.col] - dir[map.col + 1]; break;
      }
    }
    status.kind = SolveKind::Unbounded;
    status.ray = ray;
    return status;
  }

  Vec xs = Vec::Zero(ncols);
  for (Index i = 0; i < rows; ++i) {
    const Index bj = tab.basis()[static_cast<std::size_t>(i)];
    xs[bj] = std::max(tab.rhs(i), 0.0);
  }
  Vec z = to_original(xs.head(ns));
  if (!z.allFinite()) {
    status.kind = SolveKind::NumericalFailure;
    return status;
  }
  Vec dual = Vec::Zero(m);
  for (Index i = 0; i < m; ++i) dual[i] = std::max(tab.cost(slack0 + i), 0.0);

  status.kind = SolveKind::Optimal;
  status.objective_value = problem.objective.dot(z);
  status.solution = std::move(z);
  status.dual = std::move(dual);
  return status;
}

}  // namespace iodcbf::numkit
