#pragma once

// Brute-force reference computations used only by the tests. None of these
// share code paths with the library solvers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Calls fn for every k-subset of {0..n-1} (lexicographic).
inline void for_each_subset(int n, int k, const std::function<void(const std::vector<int>&)>& fn) {
  if (k > n || k < 0) return;
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    fn(idx);
    int i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j)
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

/// All vertices of {x : a x <= b} by intersecting every n-subset of rows.
inline std::vector<Vec> enumerate_vertices(const Mat& a, const Vec& b, double tol = 1e-9) {
  const int n = static_cast<int>(a.cols());
  std::vector<Vec> out;
  for_each_subset(static_cast<int>(a.rows()), n, [&](const std::vector<int>& rows) {
    Mat sub(n, n);
    Vec rhs(n);
    for (int i = 0; i < n; ++i) {
      sub.row(i) = a.row(rows[static_cast<std::size_t>(i)]);
      rhs[i] = b[rows[static_cast<std::size_t>(i)]];
    }
    const Eigen::FullPivLU<Mat> lu(sub);
    if (!lu.isInvertible()) return;
    const Vec x = lu.solve(rhs);
    if (((a * x - b).array() <= tol).all()) out.push_back(x);
  });
  return out;
}

/// min c'x over a bounded polytope by vertex enumeration.
inline std::optional<double> lp_min_by_vertices(const Vec& c, const Mat& a, const Vec& b) {
  const auto verts = enumerate_vertices(a, b);
  if (verts.empty()) return std::nullopt;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& v : verts) best = std::min(best, c.dot(v));
  return best;
}

/// Strictly convex QP min 0.5 x'Qx + q'x s.t. a x <= b by trying every
/// active subset, solving its equality-constrained KKT system and keeping the
/// best primal-feasible candidate.
inline std::optional<Vec> qp_by_active_sets(const Mat& q_mat, const Vec& q, const Mat& a,
                                            const Vec& b, double tol = 1e-9) {
  const int n = static_cast<int>(q.size());
  const int m = static_cast<int>(a.rows());
  std::optional<Vec> best;
  double best_val = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= std::min(n, m); ++k) {
    for_each_subset(m, k, [&](const std::vector<int>& rows) {
      Mat kkt = Mat::Zero(n + k, n + k);
      Vec rhs = Vec::Zero(n + k);
      kkt.topLeftCorner(n, n) = q_mat;
      rhs.head(n) = -q;
      for (int i = 0; i < k; ++i) {
        kkt.block(n + i, 0, 1, n) = a.row(rows[static_cast<std::size_t>(i)]);
        kkt.block(0, n + i, n, 1) = a.row(rows[static_cast<std::size_t>(i)]).transpose();
        rhs[n + i] = b[rows[static_cast<std::size_t>(i)]];
      }
      const Eigen::FullPivLU<Mat> lu(kkt);
      if (!lu.isInvertible()) return;
      const Vec x = lu.solve(rhs).head(n);
      if (m > 0 && ((a * x - b).array() > tol).any()) return;
      const double val = 0.5 * x.dot(q_mat * x) + q.dot(x);
      if (val < best_val) {
        best_val = val;
        best = x;
      }
    });
  }
  return best;
}

inline Vec random_unit(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec d(n);
  for (Index i = 0; i < n; ++i) d[i] = nd(rng);
  return d / d.norm();
}

}  // namespace oracle
