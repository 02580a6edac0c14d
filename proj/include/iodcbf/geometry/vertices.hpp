#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "iodcbf/geometry/polytope.hpp"

namespace iodcbf::geometry {

namespace detail {

inline void push_unique(std::vector<Vec>& pts, const Vec& x, double tol) {
  for (const auto& q : pts)
    if ((q - x).lpNorm<Eigen::Infinity>() <= tol) return;
  pts.push_back(x);
}

}  // namespace detail

/// Vertices of a bounded 2-D polytope in counter-clockwise order.
inline std::vector<Vec> vertices_2d(const Polytope& p, double tol = 1e-9) {
  require(p.dim() == 2, ErrorCode::ShapeMismatch, "vertices_2d: polytope must be 2-D");
  std::vector<Vec> pts;
  if (p.empty_flag()) return pts;
  const Polytope q = normalize_rows(p.without_zero_rows());
  for (Index i = 0; i < q.num_rows(); ++i) {
    for (Index j = i + 1; j < q.num_rows(); ++j) {
      Eigen::Matrix2d a;
      a << q.lhs().row(i), q.lhs().row(j);
      if (std::abs(a.determinant()) < 1e-12) continue;
      const Vec x = a.partialPivLu().solve(Eigen::Vector2d(q.rhs()[i], q.rhs()[j]));
      if (contains(q, x, tol)) detail::push_unique(pts, x, 1e-8);
    }
  }
  if (pts.empty()) return pts;
  Vec centre = Vec::Zero(2);
  for (const auto& x : pts) centre += x;
  centre /= static_cast<double>(pts.size());
  std::stable_sort(pts.begin(), pts.end(), [&](const Vec& a, const Vec& b) {
    return std::atan2(a[1] - centre[1], a[0] - centre[0]) <
           std::atan2(b[1] - centre[1], b[0] - centre[0]);
  });
  return pts;
}

/// Vertices of a bounded 3-D polytope (unordered point cloud).
inline std::vector<Vec> vertices_3d(const Polytope& p, double tol = 1e-9) {
  require(p.dim() == 3, ErrorCode::ShapeMismatch, "vertices_3d: polytope must be 3-D");
  std::vector<Vec> pts;
  if (p.empty_flag()) return pts;
  const Polytope q = normalize_rows(p.without_zero_rows());
  const Index r = q.num_rows();
  for (Index i = 0; i < r; ++i)
    for (Index j = i + 1; j < r; ++j)
      for (Index k = j + 1; k < r; ++k) {
        Eigen::Matrix3d a;
        a << q.lhs().row(i), q.lhs().row(j), q.lhs().row(k);
        if (std::abs(a.determinant()) < 1e-12) continue;
        const Vec x = a.partialPivLu().solve(Eigen::Vector3d(q.rhs()[i], q.rhs()[j], q.rhs()[k]));
        if (contains(q, x, tol)) detail::push_unique(pts, x, 1e-8);
      }
  return pts;
}

}  // namespace iodcbf::geometry
