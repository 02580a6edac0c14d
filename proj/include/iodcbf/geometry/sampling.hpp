#pragma once

#include <random>
#include <vector>

#include "iodcbf/geometry/polytope.hpp"

namespace iodcbf::geometry {

/// Feasible step interval [lo, hi] along x + t d inside p.
inline std::pair<double, double> chord(const Polytope& p, const Vec& x, const Vec& d) {
  double lo = -kInf;
  double hi = kInf;
  const Vec hd = p.lhs() * d;
  const Vec slack = p.rhs() - p.lhs() * x;
  for (Index i = 0; i < p.num_rows(); ++i) {
    if (hd[i] > 1e-15)
      hi = std::min(hi, slack[i] / hd[i]);
    else if (hd[i] < -1e-15)
      lo = std::max(lo, slack[i] / hd[i]);
  }
  return {lo, hi};
}

inline Vec random_direction(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec d(n);
  do {
    for (Index i = 0; i < n; ++i) d[i] = nd(rng);
  } while (d.norm() < 1e-12);
  return d / d.norm();
}

/// Hit-and-run walk started at the Chebyshev centre. Deterministic in `seed`.
/// Points are interior with probability one.
inline std::vector<Vec> sample_interior(const Polytope& p, Index count, std::uint64_t seed,
                                        Index thinning = 0) {
  require(count >= 0, ErrorCode::InvalidArgument, "sample_interior: negative count");
  const auto ball = chebyshev_center(p);
  require(ball.kind == numkit::SolveKind::Optimal && ball.radius > 0.0, ErrorCode::EmptyResult,
          "sample_interior: polytope has no interior");
  if (thinning <= 0) thinning = p.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec x = ball.center;
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index s = 0; s < count; ++s) {
    for (Index k = 0; k < thinning; ++k) {
      const Vec d = random_direction(rng, p.dim());
      const auto [lo, hi] = chord(p, x, d);
      require(std::isfinite(lo) && std::isfinite(hi), ErrorCode::InvalidArgument,
              "sample_interior: polytope is unbounded");
      x += (lo + (hi - lo) * unit(rng)) * d;
    }
    out.push_back(x);
  }
  return out;
}

}  // namespace iodcbf::geometry
