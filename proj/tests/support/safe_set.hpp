#pragma once

// The invariant set of the delayed double integrator, computed once per test
// process, plus an exact feasibility oracle for scalar inputs.

#include "iodcbf/geometry/operations.hpp"
#include "support/time_delay.hpp"

namespace fixture {

inline iodcbf::geometry::Polytope unit_interval() {
  return iodcbf::geometry::box_polytope(Vec::Constant(1, -1.0), Vec::Constant(1, 1.0));
}

inline iodcbf::geometry::Polytope xi_box() {
  return iodcbf::geometry::extended_constraints(unit_interval(), unit_interval(), kTIni);
}

inline const iodcbf::geometry::InvariantSetReport& safe_set_report() {
  static const auto rep = iodcbf::geometry::invariant_set(xi_box(), model(), unit_interval(), 200, 1e-7);
  return rep;
}

inline const iodcbf::geometry::Polytope& safe_set() { return safe_set_report().set; }

inline constexpr double kInputMargin = 1e-6;

/// Invariant set computed with U shrunk by kInputMargin, what the filter runs
/// on in long loops. The exact maximal set has boundary points where only an
/// input on the edge of U keeps the state inside, so rounding there cannot be
/// corrected and slowly accumulates; the margin leaves authority to absorb it.
inline const iodcbf::geometry::Polytope& filter_set() {
  static const auto set =
      iodcbf::geometry::invariant_set(xi_box(), model(),
                                      iodcbf::geometry::tighten(unit_interval(), kInputMargin), 200,
                                      1e-7)
          .set;
  return set;
}

/// Interval of scalar inputs u in [u_lo, u_hi] with h (a xi + b u) <= c + tol,
/// by intersecting one half-line per row. Returns (lo, hi); empty when lo > hi.
inline std::pair<double, double> admissible_inputs(const Mat& h, const Vec& c, const Mat& a,
                                                   const Mat& b, const Vec& xi, double u_lo,
                                                   double u_hi, double tol) {
  double lo = u_lo;
  double hi = u_hi;
  const Vec base = h * (a * xi);
  const Vec gain = h * b.col(0);
  for (Index i = 0; i < h.rows(); ++i) {
    const double room = c[i] + tol - base[i];
    if (gain[i] > 1e-14) {
      hi = std::min(hi, room / gain[i]);
    } else if (gain[i] < -1e-14) {
      lo = std::max(lo, room / gain[i]);
    } else if (room < 0.0) {
      return {1.0, -1.0};
    }
  }
  return {lo, hi};
}

}  // namespace fixture
