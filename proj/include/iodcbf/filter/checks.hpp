#pragma once

// Sampled property checks on a computed safe set: invariance, the sign
// pattern of h, and agreement of the one-step predictive filter with the
// unit-lambda barrier filter.

#include <random>

#include "iodcbf/filter/filter.hpp"
#include "iodcbf/geometry/sampling.hpp"
#include "iodcbf/numkit/lp.hpp"

namespace iodcbf::filter {

/// True when some u in u_set puts a_e xi + b_e u in the set (LP feasibility).
template <model::LinearStepModel M>
bool has_admissible_input(const M& model, const Polytope& set, const Polytope& u_set, const Vec& xi) {
  auto [hb, room] = safe_input_hyperplane(model, set, xi);
  numkit::LpProblem lp;
  lp.objective = Vec::Zero(hb.cols());
  lp.ineq_lhs = Mat(hb.rows() + u_set.num_rows(), hb.cols());
  lp.ineq_lhs << hb, u_set.lhs();
  lp.ineq_rhs = Vec(room.size() + u_set.num_rows());
  lp.ineq_rhs << room, u_set.rhs();
  return numkit::solve_lp(lp).optimal();
}

struct InvarianceCheck {
  Index samples = 0;
  Index failures = 0;
  bool passed() const { return samples > 0 && failures == 0; }
};

template <model::LinearStepModel M>
InvarianceCheck sampled_invariance(const M& model, const Polytope& set, const Polytope& u_set,
                                   Index count, std::uint64_t seed) {
  InvarianceCheck out;
  for (const auto& x : geometry::sample_interior(set, count, seed)) {
    ++out.samples;
    if (!has_admissible_input(model, set, u_set, x)) ++out.failures;
  }
  return out;
}

struct SignCheck {
  Index interior = 0;
  Index interior_failures = 0;
  Index boundary = 0;
  Index boundary_failures = 0;
  double boundary_max_abs_h = 0.0;
  Index exterior = 0;
  Index exterior_failures = 0;
  bool passed() const {
    return interior_failures == 0 && boundary_failures == 0 && exterior_failures == 0;
  }
};

/// h > 0 on hit-and-run interior samples, |h| <= boundary_tol on points pushed
/// from the Chebyshev centre along random rays to the first facet, and h < 0
/// on the same rays continued 1% to 100% beyond it.
inline SignCheck sign_conditions(const Polytope& set, Index interior, Index boundary,
                                 Index exterior, std::uint64_t seed, double boundary_tol = 1e-9) {
  SignCheck out;
  for (const auto& x : geometry::sample_interior(set, interior, seed)) {
    ++out.interior;
    if (!(h_value(set, x) > 0.0)) ++out.interior_failures;
  }
  const auto ball = geometry::chebyshev_center(set);
  require(ball.kind == numkit::SolveKind::Optimal && ball.radius > 0.0, ErrorCode::EmptyResult,
          "sign_conditions: set has no interior");
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> beyond(1.01, 2.0);
  const Index rays = std::max(boundary, exterior);
  for (Index k = 0; k < rays; ++k) {
    const Vec d = geometry::random_direction(rng, set.dim());
    const double t_hit = geometry::chord(set, ball.center, d).second;
    const double s = beyond(rng);
    if (k < boundary) {
      const double h = h_value(set, Vec(ball.center + t_hit * d));
      ++out.boundary;
      out.boundary_max_abs_h = std::max(out.boundary_max_abs_h, std::abs(h));
      if (std::abs(h) > boundary_tol) ++out.boundary_failures;
    }
    if (k < exterior) {
      ++out.exterior;
      if (!(h_value(set, Vec(ball.center + s * t_hit * d)) < 0.0)) ++out.exterior_failures;
    }
  }
  return out;
}

struct EquivalenceCheck {
  Index samples = 0;
  Index solver_failures = 0;
  double max_deviation = 0.0;
  bool passed(double tol) const { return samples > 0 && solver_failures == 0 && max_deviation <= tol; }
};

/// |u from cbf_filter(lambda_min = 1) - u from mpsf(N = 1, terminal = set)|
/// over interior samples with nominal inputs uniform on [-amp, amp].
template <model::LinearStepModel M>
EquivalenceCheck mpsf_equivalence(const M& model, const Polytope& ambient, const Polytope& u_set,
                                  const Polytope& set, Index count, std::uint64_t seed,
                                  double amplitude = 3.0) {
  EquivalenceCheck out;
  FilterConfig cfg;
  cfg.lambda_min = 1.0;
  cfg.u_set = u_set;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> nominal(-amplitude, amplitude);
  const Index m = model.b_e().cols();
  for (const auto& x : geometry::sample_interior(set, count, seed + 1)) {
    Vec ul(m);
    for (Index i = 0; i < m; ++i) ul[i] = nominal(rng);
    const auto a = cbf_filter(model, set, cfg, x, ul);
    const auto b = mpsf(model, ambient, u_set, set, 1, x, ul);
    ++out.samples;
    if (!a.optimal() || !b.optimal()) {
      ++out.solver_failures;
      continue;
    }
    out.max_deviation = std::max(out.max_deviation, (a.u_safe - b.u_safe).cwiseAbs().maxCoeff());
  }
  return out;
}

}  // namespace iodcbf::filter
