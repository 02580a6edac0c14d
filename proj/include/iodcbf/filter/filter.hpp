#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "iodcbf/geometry/polytope.hpp"
#include "iodcbf/model/model.hpp"
#include "iodcbf/numkit/qp.hpp"

namespace iodcbf::filter {

using geometry::Polytope;

inline constexpr double kDefaultBeta = 1e6;
inline constexpr double kMpsfRegularization = 1e-9;

struct FilterConfig {
  double lambda_min = 1.0;
  double beta = kDefaultBeta;
  Polytope u_set;
  double qp_tol = 1e-9;
  /// Keep u in u_set as explicit QP rows. The safe set already implies it for
  /// lambda = 1; turning this off is how that claim is tested.
  bool explicit_input_constraints = true;

  void validate(Index m) const {
    require(lambda_min > 0.0 && lambda_min <= 1.0, ErrorCode::InvalidArgument,
            "FilterConfig: lambda_min must lie in (0, 1]");
    require(beta > 0.0 && std::isfinite(beta), ErrorCode::InvalidArgument,
            "FilterConfig: beta must be positive and finite");
    require(qp_tol > 0.0, ErrorCode::InvalidArgument, "FilterConfig: qp_tol must be positive");
    require(u_set.dim() == m, ErrorCode::ShapeMismatch, "FilterConfig: u_set dimension mismatch");
  }
};

struct FilterResult {
  Vec u_safe;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double h_before = std::numeric_limits<double>::quiet_NaN();
  double h_after_predicted = std::numeric_limits<double>::quiet_NaN();
  numkit::SolveKind status = numkit::SolveKind::NumericalFailure;
  double objective = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;

  bool optimal() const { return status == numkit::SolveKind::Optimal; }
};

/// h(xi) = min(c - H xi). A margin in distance units when the rows are
/// normalised; any positive row scaling gives the same sign pattern.
inline double h_value(const Polytope& safe_set, const Vec& xi) {
  require(xi.size() == safe_set.dim(), ErrorCode::ShapeMismatch, "h_value: dimension mismatch");
  require(!safe_set.empty_flag() && safe_set.num_rows() > 0, ErrorCode::InvalidArgument,
          "h_value: safe set must have at least one row");
  return (safe_set.rhs() - safe_set.lhs() * xi).minCoeff();
}

inline double h_value(const Polytope& safe_set, const model::ExtendedState& xi) {
  return h_value(safe_set, xi.value());
}

/// Inputs u with a_e xi + b_e u in the safe set: H b_e u <= c - H a_e xi.
template <model::LinearStepModel M>
std::pair<Mat, Vec> safe_input_hyperplane(const M& model, const Polytope& safe_set, const Vec& xi) {
  require(xi.size() == model.a_e().cols() && safe_set.dim() == model.a_e().rows(),
          ErrorCode::ShapeMismatch, "safe_input_hyperplane: dimension mismatch");
  return {safe_set.lhs() * model.b_e(), safe_set.rhs() - safe_set.lhs() * (model.a_e() * xi)};
}

namespace detail {

/// The filter QP over z = (u, lambda), or nullopt when the rows that do not
/// involve u already rule out every lambda in [lambda_min, 1].
template <model::LinearStepModel M>
std::optional<numkit::QpProblem> cbf_qp(const M& model, const Polytope& safe_set,
                                        const FilterConfig& cfg, const Vec& xi,
                                        const Vec& u_nominal, double h0) {
  const Index m = model.b_e().cols();
  auto [hb, room] = safe_input_hyperplane(model, safe_set, xi);
  const Index rs = hb.rows();
  // Rows that do not involve the newest input still carry rounding residue
  // in H b_e (~1e-16). Near the boundary h0 is of the same order as that
  // residue times the input range, and the spurious coupling would bind u.
  const double b_scale = std::max(1.0, model.b_e().norm());
  for (Index i = 0; i < rs; ++i) {
    const double cut = 1e-12 * std::max(1.0, safe_set.lhs().row(i).norm()) * b_scale;
    for (Index j = 0; j < m; ++j)
      if (std::abs(hb(i, j)) <= cut) hb(i, j) = 0.0;
  }
  const Index ru = cfg.explicit_input_constraints ? cfg.u_set.num_rows() : 0;
  numkit::QpProblem qp;
  qp.quad = Mat::Zero(m + 1, m + 1);
  qp.quad.topLeftCorner(m, m).diagonal().setConstant(2.0);
  qp.quad(m, m) = 2.0 * cfg.beta;
  qp.lin = Vec::Zero(m + 1);
  qp.lin.head(m) = -2.0 * u_nominal;
  qp.ineq_lhs = Mat::Zero(rs + ru, m + 1);
  qp.ineq_rhs = Vec(rs + ru);
  // H b_e u - h0 lambda <= c - H a_e xi - h0.
  qp.ineq_lhs.topLeftCorner(rs, m) = hb;
  qp.ineq_lhs.col(m).head(rs).setConstant(-h0);
  qp.ineq_rhs.head(rs) = room.array() - h0;
  if (ru > 0) {
    qp.ineq_lhs.bottomLeftCorner(ru, m) = cfg.u_set.lhs();
    qp.ineq_rhs.tail(ru) = cfg.u_set.rhs();
  }
  // A row without u reads h0 (1 - lambda) <= room, a bound on lambda alone.
  // As a QP row its coefficient -h0 vanishes near the boundary and the row
  // becomes hopelessly ill-scaled, so it is folded into the lambda bounds and
  // left in place as an inert zero row (keeps warm-start indices stable).
  double lam_lo = cfg.lambda_min;
  double lam_hi = 1.0;
  for (Index i = 0; i < rs; ++i) {
    if (hb.row(i).cwiseAbs().maxCoeff() > 0.0) continue;
    const double slack = room[i] + cfg.qp_tol;
    if (h0 > 0.0) {
      lam_lo = std::max(lam_lo, 1.0 - slack / h0);
    } else if (h0 < 0.0) {
      lam_hi = std::min(lam_hi, 1.0 - slack / h0);
    } else if (slack < 0.0) {
      return std::nullopt;
    }
    qp.ineq_lhs.row(i).setZero();
    qp.ineq_rhs[i] = 1.0;
  }
  // Unit rows, so the solver tolerances are distances in (u, lambda). The
  // coupling rows are short (|H b_e| ~ 1e-3 here) and the feasible u-interval
  // near the boundary can be thinner than an absolute 1e-10.
  for (Index i = 0; i < rs; ++i) {
    const double nrm = qp.ineq_lhs.row(i).norm();
    if (nrm > 0.0) {
      qp.ineq_lhs.row(i) /= nrm;
      qp.ineq_rhs[i] /= nrm;
    }
  }
  if (lam_lo > lam_hi) return std::nullopt;
  numkit::VariableBounds b = numkit::VariableBounds::free(m + 1);
  b.lower[m] = lam_lo;
  b.upper[m] = lam_hi;
  qp.bounds = b;
  return qp;
}

template <model::LinearStepModel M>
FilterResult finish(const M& model, const Polytope& safe_set, const Vec& xi, const Vec& u_nominal,
                    const numkit::SolveStatus& s, double h0) {
  FilterResult r;
  r.status = s.kind;
  r.h_before = h0;
  r.iterations = s.iterations;
  if (!s.optimal()) return r;
  const Index m = model.b_e().cols();
  r.u_safe = s.solution->head(m);
  r.lambda = (*s.solution)[m];
  r.objective = *s.objective_value + u_nominal.squaredNorm();
  r.h_after_predicted = h_value(safe_set, Vec(model.a_e() * xi + model.b_e() * r.u_safe));
  return r;
}

}  // namespace detail

/// Adaptive-decay CBF safety filter:
///   min |u - u_l|^2 + beta lambda^2
///   s.t. H (a_e xi + b_e u) <= c - (1 - lambda) h(xi) 1,  u in U,  lambda in [lambda_min, 1].
/// An infeasible QP is reported through `status`, never patched up.
template <model::LinearStepModel M>
FilterResult cbf_filter(const M& model, const Polytope& safe_set, const FilterConfig& cfg,
                        const Vec& xi, const Vec& u_nominal,
                        const numkit::QpWarmStart* warm = nullptr,
                        numkit::SolveStatus* raw = nullptr) {
  const Index m = model.b_e().cols();
  cfg.validate(m);
  require(u_nominal.size() == m, ErrorCode::ShapeMismatch, "cbf_filter: nominal input dimension");
  require(xi.allFinite() && u_nominal.allFinite(), ErrorCode::InvalidArgument,
          "cbf_filter: non-finite state or nominal input");
  const double h0 = h_value(safe_set, xi);
  const auto qp = detail::cbf_qp(model, safe_set, cfg, xi, u_nominal, h0);
  numkit::SolveStatus s;
  if (qp) {
    numkit::QpOptions opt;
    opt.feas_tol = cfg.qp_tol;
    s = numkit::solve_qp(*qp, opt, warm);
  } else {
    s.kind = numkit::SolveKind::Infeasible;
  }
  auto r = detail::finish(model, safe_set, xi, u_nominal, s, h0);
  if (raw) *raw = std::move(s);
  return r;
}

template <model::LinearStepModel M>
FilterResult cbf_filter(const M& model, const Polytope& safe_set, const FilterConfig& cfg,
                        const model::ExtendedState& xi, const Vec& u_nominal) {
  return cbf_filter(model, safe_set, cfg, xi.value(), u_nominal);
}

/// Filter bound to one (model, set, config) that reuses the previous working
/// set as a warm start. Single-threaded by design.
template <model::LinearStepModel M>
class CbfFilterSession {
 public:
  CbfFilterSession(const M& model, Polytope safe_set, FilterConfig cfg)
      : model_(model), set_(std::move(safe_set)), cfg_(std::move(cfg)) {
    cfg_.validate(model_.b_e().cols());
  }

  FilterResult operator()(const Vec& xi, const Vec& u_nominal) {
    numkit::SolveStatus raw;
    auto r = cbf_filter(model_, set_, cfg_, xi, u_nominal, warm_ ? &*warm_ : nullptr, &raw);
    if (r.optimal()) {
      warm_ = numkit::QpWarmStart{*raw.solution, raw.active_set};
    } else {
      warm_.reset();
    }
    return r;
  }

  const Polytope& safe_set() const { return set_; }
  const FilterConfig& config() const { return cfg_; }

 private:
  const M& model_;
  Polytope set_;
  FilterConfig cfg_;
  std::optional<numkit::QpWarmStart> warm_;
};

/// N-step predictive safety filter: min |u_0 - u_l|^2 over a backup input
/// sequence keeping xi_0..xi_{N-1} in `ambient` and xi_N in `terminal`.
/// The reported lambda is 1 and the h fields are measured on `terminal`.
template <model::LinearStepModel M>
FilterResult mpsf(const M& model, const Polytope& ambient, const Polytope& u_set,
                  const Polytope& terminal, Index horizon, const Vec& xi, const Vec& u_nominal,
                  double qp_tol = 1e-9) {
  const Mat& a = model.a_e();
  const Mat& b = model.b_e();
  const Index n = a.rows();
  const Index m = b.cols();
  require(horizon >= 1, ErrorCode::InvalidArgument, "mpsf: horizon must be at least 1");
  require(ambient.dim() == n && terminal.dim() == n && xi.size() == n, ErrorCode::ShapeMismatch,
          "mpsf: state dimension mismatch");
  require(u_set.dim() == m && u_nominal.size() == m, ErrorCode::ShapeMismatch,
          "mpsf: input dimension mismatch");
  FilterResult r;
  if (ambient.empty_flag() || terminal.empty_flag() || u_set.empty_flag() ||
      !geometry::contains(ambient, xi, qp_tol)) {
    r.status = numkit::SolveKind::Infeasible;
    return r;
  }
  const Index nu = horizon * m;
  const Index ra = ambient.num_rows();
  const Index rt = terminal.num_rows();
  const Index ru = u_set.num_rows();
  const Index rows = (horizon - 1) * ra + rt + horizon * ru;
  numkit::QpProblem qp;
  qp.quad = Mat::Zero(nu, nu);
  qp.quad.diagonal().setConstant(2.0 * kMpsfRegularization);
  qp.quad.topLeftCorner(m, m).diagonal().setConstant(2.0);
  qp.lin = Vec::Zero(nu);
  qp.lin.head(m) = -2.0 * u_nominal;
  qp.ineq_lhs = Mat::Zero(rows, nu);
  qp.ineq_rhs = Vec(rows);

  // xi_k = free_k + gamma_k u, starting from xi_0 = xi.
  Vec free = xi;
  Mat gamma = Mat::Zero(n, nu);
  Index row = 0;
  for (Index k = 1; k <= horizon; ++k) {
    free = (a * free).eval();
    gamma = (a * gamma).eval();
    gamma.middleCols((k - 1) * m, m) += b;
    const Polytope& set = k == horizon ? terminal : ambient;
    qp.ineq_lhs.middleRows(row, set.num_rows()) = set.lhs() * gamma;
    qp.ineq_rhs.segment(row, set.num_rows()) = set.rhs() - set.lhs() * free;
    row += set.num_rows();
  }
  for (Index k = 0; k < horizon; ++k) {
    qp.ineq_lhs.block(row, k * m, ru, m) = u_set.lhs();
    qp.ineq_rhs.segment(row, ru) = u_set.rhs();
    row += ru;
  }

  numkit::QpOptions opt;
  opt.feas_tol = qp_tol;
  const auto s = numkit::solve_qp(qp, opt);
  r.status = s.kind;
  r.iterations = s.iterations;
  if (terminal.num_rows() > 0) r.h_before = h_value(terminal, xi);
  if (!s.optimal()) return r;
  r.u_safe = s.solution->head(m);
  r.lambda = 1.0;
  r.objective = (r.u_safe - u_nominal).squaredNorm();
  if (terminal.num_rows() > 0) r.h_after_predicted = h_value(terminal, Vec(a * xi + b * r.u_safe));
  return r;
}

}  // namespace iodcbf::filter
