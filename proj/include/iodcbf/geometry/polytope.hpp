#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "iodcbf/numkit/lp.hpp"
#include "iodcbf/numkit/types.hpp"

namespace iodcbf::geometry {

/// Distance-unit tolerance used by the set operations on row-normalised data.
inline constexpr double kSetTol = 1e-9;

/// H-representation {x : lhs x <= rhs}. A zero row with a negative right-hand
/// side encodes falsity; it is not stored, the polytope is flagged empty
/// instead. Trivially true zero rows are kept until an operation simplifies.
class Polytope {
 public:
  Polytope() = default;

  Polytope(Mat lhs, Vec rhs) : dim_(lhs.cols()) {
    require(lhs.rows() == rhs.size(), ErrorCode::ShapeMismatch,
            "Polytope: lhs row count must equal rhs length");
    require(lhs.allFinite() && rhs.allFinite(), ErrorCode::InvalidArgument,
            "Polytope: entries must be finite");
    for (Index i = 0; i < lhs.rows(); ++i)
      if (is_zero_row(lhs.row(i)) && rhs[i] < -kZeroRow) empty_ = true;
    if (empty_) {
      lhs_ = Mat(0, dim_);
      rhs_ = Vec(0);
      return;
    }
    lhs_ = std::move(lhs);
    rhs_ = std::move(rhs);
  }

  static Polytope make_empty(Index dim) {
    Polytope p(Mat(0, dim), Vec(0));
    p.empty_ = true;
    return p;
  }

  static Polytope universe(Index dim) { return Polytope(Mat(0, dim), Vec(0)); }

  Index dim() const { return dim_; }
  Index num_rows() const { return lhs_.rows(); }
  const Mat& lhs() const { return lhs_; }
  const Vec& rhs() const { return rhs_; }
  /// True only when emptiness is explicit; use is_empty() for an LP check.
  bool empty_flag() const { return empty_; }
  bool normalized() const { return normalized_; }

  Polytope& mark_normalized(bool v = true) {
    normalized_ = v;
    return *this;
  }

  /// Same set without the trivially true zero rows.
  Polytope without_zero_rows() const {
    std::vector<Index> keep;
    for (Index i = 0; i < num_rows(); ++i)
      if (!is_zero_row(lhs_.row(i))) keep.push_back(i);
    if (static_cast<Index>(keep.size()) == num_rows()) return *this;
    return select_rows(keep);
  }

  Polytope select_rows(const std::vector<Index>& rows) const {
    Mat l(static_cast<Index>(rows.size()), dim_);
    Vec r(static_cast<Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      l.row(static_cast<Index>(k)) = lhs_.row(rows[k]);
      r[static_cast<Index>(k)] = rhs_[rows[k]];
    }
    Polytope out(std::move(l), std::move(r));
    out.normalized_ = normalized_ && !empty_;
    out.empty_ = empty_;
    return out;
  }

 private:
  static constexpr double kZeroRow = 1e-13;

  template <class Row>
  static bool is_zero_row(const Row& r) {
    return r.template lpNorm<Eigen::Infinity>() <= kZeroRow;
  }

  Mat lhs_ = Mat(0, 0);
  Vec rhs_ = Vec(0);
  Index dim_ = 0;
  bool empty_ = false;
  bool normalized_ = false;
};

inline Polytope box_polytope(const Vec& lower, const Vec& upper) {
  require(lower.size() == upper.size() && lower.size() > 0, ErrorCode::ShapeMismatch,
          "box_polytope: bound vectors must have equal positive length");
  const Index n = lower.size();
  for (Index i = 0; i < n; ++i) {
    if (!(lower[i] <= upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i])) {
      throw Error(ErrorCode::BadBounds, "box_polytope: need finite lower <= upper at index " +
                                            std::to_string(i));
    }
  }
  Mat h = Mat::Zero(2 * n, n);
  Vec c(2 * n);
  for (Index i = 0; i < n; ++i) {
    h(2 * i, i) = 1.0;
    c[2 * i] = upper[i];
    h(2 * i + 1, i) = -1.0;
    c[2 * i + 1] = -lower[i];
  }
  return Polytope(h, c).mark_normalized();
}

inline void require_same_dim(const Polytope& p, const Polytope& q, const char* what) {
  require(p.dim() == q.dim(), ErrorCode::ShapeMismatch, std::string(what) + ": dimension mismatch");
}

/// x satisfies lhs x <= rhs + tol. An explicitly empty polytope contains nothing.
inline bool contains(const Polytope& p, const Vec& x, double tol = kSetTol) {
  require(x.size() == p.dim(), ErrorCode::ShapeMismatch, "contains: point dimension mismatch");
  if (p.empty_flag()) return false;
  if (p.num_rows() == 0) return true;
  return ((p.lhs() * x - p.rhs()).array() <= tol).all();
}

/// Scales each row to unit Euclidean norm; the point set is unchanged.
inline Polytope normalize_rows(const Polytope& p) {
  if (p.empty_flag()) return Polytope::make_empty(p.dim());
  Mat h = p.lhs();
  Vec c = p.rhs();
  for (Index i = 0; i < h.rows(); ++i) {
    const double nrm = h.row(i).norm();
    if (nrm <= 1e-13) throw Error(ErrorCode::ZeroRow, "normalize_rows: zero row " + std::to_string(i));
    h.row(i) /= nrm;
    c[i] /= nrm;
  }
  return Polytope(std::move(h), std::move(c)).mark_normalized();
}

/// Block-diagonal replication of the input and output constraint sets over
/// the t_ini slots of the extended state.
inline Polytope extended_constraints(const Polytope& u_set, const Polytope& y_set, Index t_ini) {
  require(t_ini > 0, ErrorCode::InvalidArgument, "extended_constraints: t_ini must be positive");
  const Index m = u_set.dim();
  const Index p = y_set.dim();
  const Index n = (m + p) * t_ini;
  if (u_set.empty_flag() || y_set.empty_flag()) return Polytope::make_empty(n);
  const Index ru = u_set.num_rows();
  const Index ry = y_set.num_rows();
  Mat h = Mat::Zero((ru + ry) * t_ini, n);
  Vec c((ru + ry) * t_ini);
  for (Index k = 0; k < t_ini; ++k) {
    h.block(k * ru, k * m, ru, m) = u_set.lhs();
    c.segment(k * ru, ru) = u_set.rhs();
    h.block(ru * t_ini + k * ry, m * t_ini + k * p, ry, p) = y_set.lhs();
    c.segment(ru * t_ini + k * ry, ry) = y_set.rhs();
  }
  return Polytope(std::move(h), std::move(c)).mark_normalized(u_set.normalized() && y_set.normalized());
}

/// Row stacking without any simplification.
inline Polytope stack(const Polytope& p, const Polytope& q) {
  require_same_dim(p, q, "stack");
  if (p.empty_flag() || q.empty_flag()) return Polytope::make_empty(p.dim());
  Mat h(p.num_rows() + q.num_rows(), p.dim());
  Vec c(p.num_rows() + q.num_rows());
  h << p.lhs(), q.lhs();
  c << p.rhs(), q.rhs();
  return Polytope(std::move(h), std::move(c)).mark_normalized(p.normalized() && q.normalized());
}

/// Moves every facet inward by `margin` (Euclidean distance), i.e. the
/// erosion of p by a ball of that radius.
inline Polytope tighten(const Polytope& p, double margin) {
  require(margin >= 0.0 && std::isfinite(margin), ErrorCode::InvalidArgument,
          "tighten: margin must be finite and nonnegative");
  if (p.empty_flag()) return p;
  Vec c = p.rhs();
  for (Index i = 0; i < p.num_rows(); ++i) c[i] -= margin * p.lhs().row(i).norm();
  return Polytope(p.lhs(), std::move(c)).mark_normalized(p.normalized());
}

// ---------------------------------------------------------------------------
// LP helpers. Polytopes here can have thousands of rows while only a handful
// matter at the optimum, so the LPs are solved by constraint generation: the
// simplex sees a small working set, and the most violated rows are added until
// the working-set optimum is feasible for the whole system.

struct SupportResult {
  numkit::SolveKind kind = numkit::SolveKind::NumericalFailure;
  double value = 0.0;
  Vec point;
};

namespace detail {

inline Vec row_norms(const Mat& h) {
  Vec n(h.rows());
  for (Index i = 0; i < h.rows(); ++i) n[i] = std::max(h.row(i).norm(), 1e-300);
  return n;
}

}  // namespace detail

/// max d'x over {x : lhs x <= rhs}.
inline SupportResult maximize(const Mat& lhs, const Vec& rhs, const Vec& d,
                              double feas_tol = 1e-10) {
  using numkit::SolveKind;
  const Index n = d.size();
  const Index rows = lhs.rows();
  SupportResult out;
  const Vec norms = detail::row_norms(lhs);
  std::vector<char> in_work(static_cast<std::size_t>(rows), 0);
  std::vector<Index> work;

  // Seed with the rows best aligned with the objective.
  if (rows > 0) {
    const Vec align = (lhs * d).cwiseQuotient(norms);
    Index best = 0;
    for (Index i = 1; i < rows; ++i)
      if (align[i] > align[best]) best = i;
    work.push_back(best);
    in_work[static_cast<std::size_t>(best)] = 1;
  }
  const Index batch = std::max<Index>(1, n / 2);

  for (int round = 0; round <= rows + 1; ++round) {
    numkit::LpProblem lp;
    lp.objective = -d;
    lp.ineq_lhs = Mat(static_cast<Index>(work.size()), n);
    lp.ineq_rhs = Vec(static_cast<Index>(work.size()));
    for (std::size_t k = 0; k < work.size(); ++k) {
      lp.ineq_lhs.row(static_cast<Index>(k)) = lhs.row(work[k]);
      lp.ineq_rhs[static_cast<Index>(k)] = rhs[work[k]];
    }
    const auto s = numkit::solve_lp(lp);
    if (s.kind == SolveKind::Infeasible || s.kind == SolveKind::NumericalFailure) {
      out.kind = s.kind;
      return out;
    }
    if (s.kind == SolveKind::Unbounded) {
      const Vec& ray = *s.ray;
      Index pick = -1;
      double best = 1e-12 * std::max(1.0, ray.norm());
      for (Index i = 0; i < rows; ++i) {
        if (in_work[static_cast<std::size_t>(i)]) continue;
        const double v = lhs.row(i).dot(ray) / norms[i];
        if (v > best) {
          best = v;
          pick = i;
        }
      }
      if (pick < 0) {
        out.kind = SolveKind::Unbounded;
        out.value = kInf;
        return out;
      }
      work.push_back(pick);
      in_work[static_cast<std::size_t>(pick)] = 1;
      continue;
    }
    const Vec& x = *s.solution;
    std::vector<std::pair<double, Index>> violated;
    if (rows > 0) {
      const Vec viol = (lhs * x - rhs).cwiseQuotient(norms);
      for (Index i = 0; i < rows; ++i)
        if (!in_work[static_cast<std::size_t>(i)] && viol[i] > feas_tol) violated.emplace_back(-viol[i], i);
    }
    if (violated.empty()) {
      out.kind = SolveKind::Optimal;
      out.point = x;
      out.value = d.dot(x);
      return out;
    }
    const auto take = std::min<std::size_t>(violated.size(), static_cast<std::size_t>(batch));
    std::partial_sort(violated.begin(), violated.begin() + static_cast<std::ptrdiff_t>(take),
                      violated.end());
    for (std::size_t k = 0; k < take; ++k) {
      work.push_back(violated[k].second);
      in_work[static_cast<std::size_t>(violated[k].second)] = 1;
    }
  }
  out.kind = SolveKind::NumericalFailure;
  return out;
}

inline SupportResult support(const Polytope& p, const Vec& d) {
  require(d.size() == p.dim(), ErrorCode::ShapeMismatch, "support: direction dimension mismatch");
  if (p.empty_flag()) return {numkit::SolveKind::Infeasible, -kInf, {}};
  return maximize(p.lhs(), p.rhs(), d);
}

struct ChebyshevBall {
  numkit::SolveKind kind = numkit::SolveKind::NumericalFailure;
  Vec center;
  double radius = 0.0;  // negative when the polytope is empty
};

/// Largest inscribed ball (radius capped at `radius_cap` for unbounded sets).
inline ChebyshevBall chebyshev_center(const Polytope& p, double radius_cap = 1e3) {
  const Index n = p.dim();
  if (p.empty_flag()) return {numkit::SolveKind::Infeasible, Vec::Zero(n), -kInf};
  if (p.num_rows() > 0 && p.lhs().rowwise().norm().minCoeff() <= 1e-13)
    return chebyshev_center(p.without_zero_rows(), radius_cap);
  const Index rows = p.num_rows();
  Mat h(rows + 1, n + 1);
  Vec c(rows + 1);
  for (Index i = 0; i < rows; ++i) {
    const double nrm = p.lhs().row(i).norm();
    h.row(i).head(n) = p.lhs().row(i) / nrm;
    h(i, n) = 1.0;
    c[i] = p.rhs()[i] / nrm;
  }
  h.row(rows).setZero();
  h(rows, n) = 1.0;
  c[rows] = radius_cap;
  Vec d = Vec::Zero(n + 1);
  d[n] = 1.0;
  const auto s = maximize(h, c, d);
  ChebyshevBall ball;
  ball.kind = s.kind;
  if (s.kind == numkit::SolveKind::Optimal) {
    ball.center = s.point.head(n);
    ball.radius = s.point[n];
  }
  return ball;
}

/// LP emptiness test (no interior needed: a set with zero radius is nonempty).
inline bool is_empty(const Polytope& p, double tol = kSetTol) {
  if (p.empty_flag()) return true;
  if (p.num_rows() == 0) return false;
  const auto ball = chebyshev_center(p);
  if (ball.kind != numkit::SolveKind::Optimal)
    throw Error(ErrorCode::SolverFailure, "is_empty: Chebyshev LP failed");
  return ball.radius < -tol;
}

/// Every row of q holds on all of p (up to tol, in row-normalised units).
inline bool is_subset(const Polytope& p, const Polytope& q, double tol = kSetTol) {
  require_same_dim(p, q, "is_subset");
  if (p.empty_flag()) return true;
  if (q.empty_flag()) return is_empty(p);
  for (Index i = 0; i < q.num_rows(); ++i) {
    const double nrm = q.lhs().row(i).norm();
    if (nrm <= 1e-13) continue;  // trivially true row
    const auto s = support(p, q.lhs().row(i).transpose() / nrm);
    if (s.kind == numkit::SolveKind::Infeasible) return true;
    if (s.kind == numkit::SolveKind::Unbounded) return false;
    if (s.kind != numkit::SolveKind::Optimal)
      throw Error(ErrorCode::SolverFailure, "is_subset: support LP failed");
    if (s.value > q.rhs()[i] / nrm + tol) return false;
  }
  return true;
}

/// True when every coordinate has a finite support in both directions.
inline bool is_bounded(const Polytope& p) {
  if (p.empty_flag()) return true;
  for (Index i = 0; i < p.dim(); ++i) {
    for (double sign : {1.0, -1.0}) {
      Vec d = Vec::Zero(p.dim());
      d[i] = sign;
      const auto s = support(p, d);
      if (s.kind == numkit::SolveKind::Unbounded) return false;
    }
  }
  return true;
}

}  // namespace iodcbf::geometry
