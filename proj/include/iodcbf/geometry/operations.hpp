#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "iodcbf/geometry/polytope.hpp"
#include "iodcbf/model/model.hpp"

namespace iodcbf::geometry {

namespace detail {

/// max h_i'z subject to the accepted rows, in coordinates centred at an
/// interior point (so every rhs is positive and phase 1 is skipped). The cap
/// row keeps the LP bounded.
inline double shifted_row_max(const Mat& h, const Vec& slack, const std::vector<Index>& rows,
                              Index i, Vec* argmax) {
  const Index n = h.cols();
  numkit::LpProblem lp;
  lp.objective = -h.row(i).transpose();
  lp.ineq_lhs = Mat(static_cast<Index>(rows.size()) + 1, n);
  lp.ineq_rhs = Vec(static_cast<Index>(rows.size()) + 1);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    lp.ineq_lhs.row(static_cast<Index>(k)) = h.row(rows[k]);
    lp.ineq_rhs[static_cast<Index>(k)] = slack[rows[k]];
  }
  lp.ineq_lhs.row(static_cast<Index>(rows.size())) = h.row(i);
  lp.ineq_rhs[static_cast<Index>(rows.size())] = slack[i] + 1.0;
  const auto s = numkit::solve_lp(lp);
  if (!s.optimal()) throw Error(ErrorCode::SolverFailure, "remove_redundancy: row LP failed");
  if (argmax) *argmax = *s.solution;
  return -*s.objective_value;
}

/// Row-by-row LP redundancy test against all other surviving rows. Used when
/// no interior point exists (flat sets), where ray shooting is unavailable.
inline std::vector<Index> sequential_irredundant(const Polytope& p, double tol) {
  std::vector<char> alive(static_cast<std::size_t>(p.num_rows()), 1);
  for (Index i = 0; i < p.num_rows(); ++i) {
    std::vector<Index> others;
    for (Index j = 0; j < p.num_rows(); ++j)
      if (j != i && alive[static_cast<std::size_t>(j)]) others.push_back(j);
    Polytope rest = p.select_rows(others);
    rest = stack(rest, Polytope(p.lhs().row(i), Vec::Constant(1, p.rhs()[i] + 1.0)));
    const auto s = support(rest, p.lhs().row(i).transpose());
    if (s.kind != numkit::SolveKind::Optimal)
      throw Error(ErrorCode::SolverFailure, "remove_redundancy: row LP failed");
    if (s.value <= p.rhs()[i] + tol) alive[static_cast<std::size_t>(i)] = 0;
  }
  std::vector<Index> keep;
  for (Index i = 0; i < p.num_rows(); ++i)
    if (alive[static_cast<std::size_t>(i)]) keep.push_back(i);
  return keep;
}

}  // namespace detail

/// Drops every row whose removal leaves the point set unchanged. Rows are
/// normalised on the way. Clarkson's scheme: candidates are tested against the
/// growing set of confirmed facets only, and a violating LP solution is turned
/// into a new confirmed facet by shooting a ray from an interior point.
inline Polytope remove_redundancy(const Polytope& input, double tol = kSetTol) {
  if (input.empty_flag()) return Polytope::make_empty(input.dim());
  const Polytope p = normalize_rows(input.without_zero_rows());
  if (p.num_rows() <= 1) return p;
  const auto ball = chebyshev_center(p);
  if (ball.kind != numkit::SolveKind::Optimal)
    throw Error(ErrorCode::SolverFailure, "remove_redundancy: Chebyshev LP failed");
  if (ball.radius < -tol) return Polytope::make_empty(p.dim());
  if (ball.radius <= 1e-8) return p.select_rows(detail::sequential_irredundant(p, tol)).mark_normalized();

  const Mat& h = p.lhs();
  const Index rows = p.num_rows();
  const Vec slack = p.rhs() - h * ball.center;

  std::vector<Index> order(static_cast<std::size_t>(rows));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return slack[a] < slack[b]; });

  std::vector<char> accepted(static_cast<std::size_t>(rows), 0);
  std::vector<Index> facets;
  Vec z;
  for (Index i : order) {
    while (!accepted[static_cast<std::size_t>(i)]) {
      const double best = detail::shifted_row_max(h, slack, facets, i, &z);
      if (best <= slack[i] + tol) break;
      // First row crossed along the segment from the centre to z.
      Index hit = -1;
      double t_hit = kInf;
      const Vec hz = h * z;
      for (Index j = 0; j < rows; ++j) {
        if (accepted[static_cast<std::size_t>(j)] || hz[j] <= 1e-14) continue;
        const double t = slack[j] / hz[j];
        if (t < t_hit) {
          t_hit = t;
          hit = j;
        }
      }
      if (hit < 0) throw Error(ErrorCode::SolverFailure, "remove_redundancy: ray shooting failed");
      accepted[static_cast<std::size_t>(hit)] = 1;
      facets.push_back(hit);
    }
  }

  // Certify each confirmed facet against the others; drops near-duplicates
  // that ray shooting could not tell apart.
  std::sort(facets.begin(), facets.end());
  std::vector<Index> keep;
  for (std::size_t k = 0; k < facets.size(); ++k) {
    std::vector<Index> others(keep);
    others.insert(others.end(), facets.begin() + static_cast<std::ptrdiff_t>(k) + 1, facets.end());
    if (detail::shifted_row_max(h, slack, others, facets[k], nullptr) > slack[facets[k]] + tol)
      keep.push_back(facets[k]);
  }
  return p.select_rows(keep).mark_normalized();
}

/// Stacks constraints and simplifies; an infeasible result is Empty-flagged.
inline Polytope intersect(const Polytope& p, const Polytope& q) {
  require_same_dim(p, q, "intersect");
  return remove_redundancy(stack(p, q));
}

namespace detail {

/// One Fourier-Motzkin step without simplification.
inline Polytope fourier_motzkin(const Polytope& p, Index index) {
  const Index n = p.dim();
  require(index >= 0 && index < n, ErrorCode::InvalidArgument,
          "eliminate_variable: index out of range");
  if (p.empty_flag()) return Polytope::make_empty(n - 1);
  const Polytope q = normalize_rows(p.without_zero_rows());
  std::vector<Index> pos, neg, zero;
  for (Index i = 0; i < q.num_rows(); ++i) {
    const double a = q.lhs()(i, index);
    if (a > 1e-12)
      pos.push_back(i);
    else if (a < -1e-12)
      neg.push_back(i);
    else
      zero.push_back(i);
  }
  const Index out_rows = static_cast<Index>(zero.size() + pos.size() * neg.size());
  Mat h(out_rows, n - 1);
  Vec c(out_rows);
  auto drop = [&](const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    Eigen::RowVectorXd r(n - 1);
    r << row.head(index), row.tail(n - 1 - index);
    return r;
  };
  Index k = 0;
  for (Index i : zero) {
    h.row(k) = drop(q.lhs().row(i));
    c[k++] = q.rhs()[i];
  }
  for (Index i : pos) {
    for (Index j : neg) {
      const double ai = q.lhs()(i, index);
      const double aj = -q.lhs()(j, index);
      h.row(k) = drop(aj * q.lhs().row(i) + ai * q.lhs().row(j));
      c[k++] = aj * q.rhs()[i] + ai * q.rhs()[j];
    }
  }
  return Polytope(std::move(h), std::move(c));
}

}  // namespace detail

/// Orthogonal projection that removes coordinate `index`.
inline Polytope eliminate_variable(const Polytope& p, Index index) {
  return remove_redundancy(detail::fourier_motzkin(p, index));
}

/// Projection onto the listed coordinates, in the listed order.
inline Polytope project(const Polytope& p, const std::vector<Index>& dims) {
  require(!dims.empty() && static_cast<Index>(dims.size()) <= p.dim(), ErrorCode::InvalidArgument,
          "project: need between 1 and dim coordinates");
  std::vector<char> seen(static_cast<std::size_t>(p.dim()), 0);
  for (Index d : dims) {
    require(d >= 0 && d < p.dim(), ErrorCode::InvalidArgument, "project: index out of range");
    require(!seen[static_cast<std::size_t>(d)], ErrorCode::InvalidArgument,
            "project: repeated index");
    seen[static_cast<std::size_t>(d)] = 1;
  }
  // Permute the kept coordinates to the front, then eliminate from the back.
  const Index n = p.dim();
  std::vector<Index> perm(dims);
  for (Index i = 0; i < n; ++i)
    if (!seen[static_cast<std::size_t>(i)]) perm.push_back(i);
  Mat h(p.num_rows(), n);
  for (Index j = 0; j < n; ++j) h.col(j) = p.lhs().col(perm[static_cast<std::size_t>(j)]);
  Polytope cur = p.empty_flag() ? Polytope::make_empty(n) : remove_redundancy(Polytope(h, p.rhs()));
  for (Index j = n - 1; j >= static_cast<Index>(dims.size()); --j) cur = eliminate_variable(cur, j);
  return cur;
}

/// {xi in ambient : exists u in u_set with a_e xi + b_e u in target}.
template <model::LinearStepModel M>
Polytope pre_set(const Polytope& target, const M& model, const Polytope& u_set,
                 const Polytope& ambient) {
  const Mat& a = model.a_e();
  const Mat& b = model.b_e();
  const Index n = a.rows();
  const Index m = b.cols();
  require(target.dim() == n && ambient.dim() == n, ErrorCode::ShapeMismatch,
          "pre_set: target/ambient dimension must match the model state");
  require(u_set.dim() == m, ErrorCode::ShapeMismatch, "pre_set: u_set dimension mismatch");
  if (target.empty_flag() || ambient.empty_flag() || is_empty(u_set)) return Polytope::make_empty(n);

  // Lifted set in (xi, u).
  const Index rt = target.num_rows();
  const Index ru = u_set.num_rows();
  Mat h = Mat::Zero(rt + ru, n + m);
  Vec c(rt + ru);
  h.topLeftCorner(rt, n) = target.lhs() * a;
  h.topRightCorner(rt, m) = target.lhs() * b;
  c.head(rt) = target.rhs();
  h.bottomRightCorner(ru, m) = u_set.lhs();
  c.tail(ru) = u_set.rhs();
  Polytope cur(std::move(h), std::move(c));
  for (Index k = n + m - 1; k > n; --k) cur = eliminate_variable(cur, k);
  // The last elimination is simplified together with the ambient rows.
  return remove_redundancy(stack(detail::fourier_motzkin(cur, n), ambient));
}

struct InvariantSetReport {
  Polytope set;
  int iterations = 0;
  bool converged = false;
  std::vector<Index> per_iteration_constraint_counts;
};

/// Fixed point of Omega_{k+1} = Pre(Omega_k) ∩ Omega_k from Omega_0 = ambient.
/// A non-converged run returns the last iterate with converged = false.
/// `on_iteration` (optional) is called with (k, rows) after each step.
template <model::LinearStepModel M, class Callback = void (*)(int, Index)>
InvariantSetReport invariant_set(const Polytope& ambient, const M& model, const Polytope& u_set,
                                 int max_iter, double tol = 1e-7,
                                 Callback on_iteration = [](int, Index) {}) {
  require(max_iter > 0, ErrorCode::InvalidArgument, "invariant_set: max_iter must be positive");
  require(!is_empty(ambient), ErrorCode::EmptyResult, "invariant_set: ambient set is empty");
  require(is_bounded(ambient), ErrorCode::InvalidArgument, "invariant_set: ambient set is unbounded");
  InvariantSetReport rep;
  Polytope omega = remove_redundancy(ambient);
  rep.per_iteration_constraint_counts.push_back(omega.num_rows());
  for (int k = 1; k <= max_iter; ++k) {
    Polytope next = pre_set(omega, model, u_set, omega);
    if (next.empty_flag() || is_empty(next))
      throw Error(ErrorCode::EmptyResult, "invariant_set: iterate " + std::to_string(k) + " is empty");
    rep.per_iteration_constraint_counts.push_back(next.num_rows());
    rep.iterations = k;
    on_iteration(k, next.num_rows());
    // next ⊆ omega holds by construction since omega's rows are stacked in;
    // checked anyway so a solver slip cannot go unnoticed.
    if (!is_subset(next, omega, tol))
      throw Error(ErrorCode::SolverFailure, "invariant_set: iterate " + std::to_string(k) + " grew");
    const bool same = is_subset(omega, next, tol);
    omega = std::move(next);
    if (same) {
      rep.converged = true;
      break;
    }
  }
  rep.set = normalize_rows(omega);
  return rep;
}

}  // namespace iodcbf::geometry
