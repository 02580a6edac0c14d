#pragma once

#include <vector>

#include "iodcbf/numkit/linalg.hpp"
#include "iodcbf/numkit/types.hpp"

namespace iodcbf::data {

/// A single recorded input-output trajectory of length N0.
class TrajectoryDataset {
 public:
  TrajectoryDataset(std::vector<Vec> inputs, std::vector<Vec> outputs)
      : inputs_(std::move(inputs)), outputs_(std::move(outputs)) {
    require(inputs_.size() == outputs_.size(), ErrorCode::ShapeMismatch,
            "dataset: inputs and outputs must have equal length");
    require(!inputs_.empty(), ErrorCode::InsufficientData, "dataset: empty trajectory");
    m_ = inputs_.front().size();
    p_ = outputs_.front().size();
    require(m_ > 0 && p_ > 0, ErrorCode::ShapeMismatch, "dataset: zero-dimensional signal");
    for (std::size_t t = 0; t < inputs_.size(); ++t) {
      require(inputs_[t].size() == m_ && outputs_[t].size() == p_, ErrorCode::ShapeMismatch,
              "dataset: inconsistent sample dimension at t=" + std::to_string(t));
      require(inputs_[t].allFinite() && outputs_[t].allFinite(), ErrorCode::InvalidArgument,
              "dataset: non-finite sample at t=" + std::to_string(t));
    }
  }

  const std::vector<Vec>& inputs() const { return inputs_; }
  const std::vector<Vec>& outputs() const { return outputs_; }
  Index m() const { return m_; }
  Index p() const { return p_; }
  Index length() const { return static_cast<Index>(inputs_.size()); }

  /// First `n` samples.
  TrajectoryDataset prefix(Index n) const {
    require(n > 0 && n <= length(), ErrorCode::InvalidArgument, "dataset: bad prefix length");
    return TrajectoryDataset({inputs_.begin(), inputs_.begin() + n},
                             {outputs_.begin(), outputs_.begin() + n});
  }

 private:
  std::vector<Vec> inputs_;
  std::vector<Vec> outputs_;
  Index m_ = 0;
  Index p_ = 0;
};

/// Past/future split of the depth-(t_ini + 1) Hankel matrices.
struct HankelPartition {
  Mat u_past;    // m * t_ini x n_cols
  Mat y_past;    // p * t_ini x n_cols
  Mat u_future;  // m x n_cols
  Mat y_future;  // p x n_cols
  Index t_ini = 0;

  Index num_cols() const { return u_past.cols(); }

  /// W = [U_p; Y_p], the regressor of the one-step predictor.
  Mat stacked_past() const {
    Mat w(u_past.rows() + y_past.rows(), u_past.cols());
    w << u_past, y_past;
    return w;
  }
};

struct PeReport {
  Index stacked_rank = 0;
  Index required_order = 0;
  Index input_hankel_rank = 0;
  bool satisfied = false;
};

/// Block Hankel matrix of `depth` stacked windows; column j is
/// [series[j]; ...; series[j + depth - 1]].
inline Mat build_hankel(const std::vector<Vec>& series, Index depth) {
  require(depth > 0, ErrorCode::InvalidArgument, "build_hankel: depth must be positive");
  const Index len = static_cast<Index>(series.size());
  if (depth > len) {
    throw Error(ErrorCode::DepthTooLarge, "build_hankel: depth " + std::to_string(depth) +
                                              " exceeds series length " + std::to_string(len));
  }
  const Index dim = series.front().size();
  const Index cols = len - depth + 1;
  Mat h(dim * depth, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < depth; ++i) h.block(i * dim, j, dim, 1) = series[static_cast<std::size_t>(i + j)];
  return h;
}

inline void require_enough_data(const TrajectoryDataset& ds, Index t_ini) {
  require(t_ini > 0, ErrorCode::InvalidArgument, "t_ini must be positive");
  if (ds.length() < t_ini + 1) {
    throw Error(ErrorCode::InsufficientData, "need at least t_ini + 1 = " +
                                                 std::to_string(t_ini + 1) + " samples, got " +
                                                 std::to_string(ds.length()));
  }
}

inline HankelPartition partition(const TrajectoryDataset& ds, Index t_ini) {
  require_enough_data(ds, t_ini);
  const Mat hu = build_hankel(ds.inputs(), t_ini + 1);
  const Mat hy = build_hankel(ds.outputs(), t_ini + 1);
  const Index m = ds.m();
  const Index p = ds.p();
  return HankelPartition{hu.topRows(m * t_ini), hy.topRows(p * t_ini), hu.bottomRows(m),
                         hy.bottomRows(p), t_ini};
}

/// Persistent-excitation report at depth L = t_ini + 1. `satisfied` uses the
/// input Hankel rank criterion rank(H_L(u)) = m L.
inline PeReport check_pe(const TrajectoryDataset& ds, Index t_ini,
                         std::optional<double> rank_tol = std::nullopt) {
  require_enough_data(ds, t_ini);
  const Index depth = t_ini + 1;
  const Mat hu = build_hankel(ds.inputs(), depth);
  const Mat hy = build_hankel(ds.outputs(), depth);
  Mat stacked(hu.rows() + hy.rows(), hu.cols());
  stacked << hu, hy;
  PeReport rep;
  rep.required_order = depth;
  rep.stacked_rank = numkit::numeric_rank(stacked, rank_tol);
  rep.input_hankel_rank = numkit::numeric_rank(hu, rank_tol);
  rep.satisfied = rep.input_hankel_rank == ds.m() * depth;
  return rep;
}

}  // namespace iodcbf::data
