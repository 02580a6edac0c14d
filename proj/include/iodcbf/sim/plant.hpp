#pragma once

#include <deque>
#include <random>
#include <vector>

#include "iodcbf/data/dataset.hpp"
#include "iodcbf/model/model.hpp"

namespace iodcbf::sim {

/// Ground-truth LTI plant x+ = a x + b u_{t-d}, y = c x, with the delay d held
/// in an input queue.
class StateSpacePlant {
 public:
  StateSpacePlant(Mat a, Mat b, Mat c_out, Index input_delay)
      : a_(std::move(a)), b_(std::move(b)), c_(std::move(c_out)), delay_(input_delay) {
    require(a_.rows() == a_.cols() && b_.rows() == a_.rows() && c_.cols() == a_.rows(),
            ErrorCode::ShapeMismatch, "StateSpacePlant: inconsistent (a, b, c) shapes");
    require(b_.cols() > 0 && c_.rows() > 0, ErrorCode::ShapeMismatch,
            "StateSpacePlant: need at least one input and one output");
    require(delay_ >= 0, ErrorCode::InvalidArgument, "StateSpacePlant: negative delay");
    reset();
  }

  void reset() {
    state_ = Vec::Zero(a_.rows());
    pending_.assign(static_cast<std::size_t>(delay_), Vec::Zero(b_.cols()));
  }

  void set_state(const Vec& x) {
    require(x.size() == state_.size(), ErrorCode::ShapeMismatch, "set_state: dimension");
    state_ = x;
  }

  /// Applies u_t and returns y_t = c x_t, measured before the update.
  Vec step(const Vec& u) {
    require(u.size() == b_.cols(), ErrorCode::ShapeMismatch, "plant_step: input dimension");
    require(u.allFinite(), ErrorCode::InvalidArgument, "plant_step: non-finite input");
    Vec applied = u;
    if (delay_ > 0) {
      pending_.push_back(u);
      applied = pending_.front();
      pending_.pop_front();
    }
    Vec y = c_ * state_;
    state_ = a_ * state_ + b_ * applied;
    return y;
  }

  Index m() const { return b_.cols(); }
  Index p() const { return c_.rows(); }
  Index n() const { return a_.rows(); }
  Index input_delay() const { return delay_; }
  const Vec& state() const { return state_; }
  const std::deque<Vec>& pending_inputs() const { return pending_; }
  const Mat& a() const { return a_; }
  const Mat& b() const { return b_; }
  const Mat& c_out() const { return c_; }

 private:
  Mat a_;
  Mat b_;
  Mat c_;
  Index delay_;
  Vec state_;
  std::deque<Vec> pending_;
};

inline Vec plant_step(StateSpacePlant& plant, const Vec& u) { return plant.step(u); }

/// Discrete double integrator (step 0.1) with a two-sample input delay.
inline StateSpacePlant time_delay_double_integrator() {
  Mat a(2, 2);
  a << 1.0, 0.1, 0.0, 1.0;
  Mat b(2, 1);
  b << 0.0, 0.1;
  Mat c(1, 2);
  c << 1.0, 0.0;
  return StateSpacePlant(a, b, c, 2);
}

/// Drives the plant with `u_sequence` and packs the last t_ini samples.
inline model::ExtendedState warmup_history(StateSpacePlant& plant,
                                           const std::vector<Vec>& u_sequence, Index t_ini) {
  require(static_cast<Index>(u_sequence.size()) >= t_ini, ErrorCode::InsufficientData,
          "warmup_history: sequence shorter than t_ini");
  std::vector<Vec> ys;
  ys.reserve(u_sequence.size());
  for (const auto& u : u_sequence) ys.push_back(plant.step(u));
  return model::ExtendedState::from_history(u_sequence, ys, t_ini);
}

/// Records `length` samples of the plant under i.i.d. N(0, sigma^2) inputs.
inline data::TrajectoryDataset generate_dataset(StateSpacePlant plant, Index length,
                                                std::uint64_t seed, double sigma = 1.0) {
  require(length > 0, ErrorCode::InvalidArgument, "generate_dataset: length must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<Vec> us;
  std::vector<Vec> ys;
  for (Index t = 0; t < length; ++t) {
    Vec u(plant.m());
    for (Index i = 0; i < u.size(); ++i) u[i] = normal(rng);
    ys.push_back(plant.step(u));
    us.push_back(std::move(u));
  }
  return data::TrajectoryDataset(std::move(us), std::move(ys));
}

}  // namespace iodcbf::sim
