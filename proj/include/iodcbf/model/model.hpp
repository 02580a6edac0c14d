#pragma once

#include <concepts>
#include <utility>

#include "iodcbf/data/dataset.hpp"
#include "iodcbf/numkit/linalg.hpp"

namespace iodcbf::model {

/// Anything exposing a one-step linear map x+ = a_e x + b_e u.
template <class M>
concept LinearStepModel = requires(const M& model) {
  { model.a_e() } -> std::convertible_to<const Mat&>;
  { model.b_e() } -> std::convertible_to<const Mat&>;
};

/// Plain (a, b) pair. Used for hand-built systems that are not shift
/// realisations, e.g. a scalar integrator x+ = x + u.
class LinearModel {
 public:
  LinearModel(Mat a, Mat b) : a_(std::move(a)), b_(std::move(b)) {
    require(a_.rows() == a_.cols() && b_.rows() == a_.rows(), ErrorCode::ShapeMismatch,
            "LinearModel: a must be square and b must have matching rows");
  }
  const Mat& a_e() const { return a_; }
  const Mat& b_e() const { return b_; }

 private:
  Mat a_;
  Mat b_;
};

/// Extended state [u_{t-T}, ..., u_{t-1}, y_{t-T}, ..., y_{t-1}]: inputs block
/// first, oldest sample first within each block.
class ExtendedState {
 public:
  ExtendedState(Index m, Index p, Index t_ini)
      : value_(Vec::Zero((m + p) * t_ini)), m_(m), p_(p), t_ini_(t_ini) {
    require(m > 0 && p > 0 && t_ini > 0, ErrorCode::InvalidArgument,
            "ExtendedState: dimensions must be positive");
  }
  ExtendedState(Vec value, Index m, Index p, Index t_ini) : ExtendedState(m, p, t_ini) {
    require(value.size() == value_.size(), ErrorCode::ShapeMismatch,
            "ExtendedState: length must be (m + p) * t_ini");
    value_ = std::move(value);
  }

  const Vec& value() const { return value_; }
  Index m() const { return m_; }
  Index p() const { return p_; }
  Index t_ini() const { return t_ini_; }
  Index size() const { return value_.size(); }

  /// Input k samples back (k = 1 is the newest).
  Vec input_lag(Index k) const { return value_.segment(m_ * (t_ini_ - k), m_); }
  Vec output_lag(Index k) const { return value_.segment(m_ * t_ini_ + p_ * (t_ini_ - k), p_); }

  /// Shift in a newly measured pair (u_t, y_t).
  void push(const Vec& u, const Vec& y) {
    require(u.size() == m_ && y.size() == p_, ErrorCode::ShapeMismatch,
            "ExtendedState::push: sample dimension mismatch");
    const Index nu = m_ * t_ini_;
    const Index ny = p_ * t_ini_;
    Vec next(value_.size());
    next.head(nu - m_) = value_.segment(m_, nu - m_);
    next.segment(nu - m_, m_) = u;
    next.segment(nu, ny - p_) = value_.segment(nu + p_, ny - p_);
    next.tail(p_) = y;
    value_ = std::move(next);
  }

  /// Packs the last t_ini samples of the given histories.
  static ExtendedState from_history(const std::vector<Vec>& u_hist, const std::vector<Vec>& y_hist,
                                    Index t_ini) {
    require(u_hist.size() == y_hist.size(), ErrorCode::ShapeMismatch,
            "from_history: histories differ in length");
    require(static_cast<Index>(u_hist.size()) >= t_ini, ErrorCode::InsufficientData,
            "from_history: history shorter than t_ini");
    const Index m = u_hist.front().size();
    const Index p = y_hist.front().size();
    ExtendedState xi(m, p, t_ini);
    const std::size_t start = u_hist.size() - static_cast<std::size_t>(t_ini);
    for (Index k = 0; k < t_ini; ++k) {
      xi.value_.segment(k * m, m) = u_hist[start + static_cast<std::size_t>(k)];
      xi.value_.segment(m * t_ini + k * p, p) = y_hist[start + static_cast<std::size_t>(k)];
    }
    return xi;
  }

 private:
  Vec value_;
  Index m_;
  Index p_;
  Index t_ini_;
};

/// One-step predictor y_t = r xi_t and the shift realisation (a_e, b_e).
class DataDrivenModel {
 public:
  const Mat& r() const { return r_; }
  const Mat& a_e() const { return a_e_; }
  const Mat& b_e() const { return b_e_; }
  Index m() const { return m_; }
  Index p() const { return p_; }
  Index t_ini() const { return t_ini_; }
  Index state_dim() const { return (m_ + p_) * t_ini_; }
  double residual() const { return residual_; }

  friend DataDrivenModel build_extended_dynamics(const Mat& r, Index m, Index p, Index t_ini,
                                                 double residual);

 private:
  Mat r_;
  Mat a_e_;
  Mat b_e_;
  Index m_ = 0;
  Index p_ = 0;
  Index t_ini_ = 0;
  double residual_ = 0.0;
};

inline DataDrivenModel build_extended_dynamics(const Mat& r, Index m, Index p, Index t_ini,
                                               double residual = 0.0) {
  require(m > 0 && p > 0 && t_ini > 0, ErrorCode::InvalidArgument,
          "build_extended_dynamics: dimensions must be positive");
  const Index n = (m + p) * t_ini;
  if (r.rows() != p || r.cols() != n) {
    throw Error(ErrorCode::ShapeMismatch, "build_extended_dynamics: r must be " +
                                              std::to_string(p) + "x" + std::to_string(n));
  }
  require(r.allFinite() && residual >= 0.0, ErrorCode::InvalidArgument,
          "build_extended_dynamics: r must be finite and residual nonnegative");
  const Index nu = m * t_ini;
  const Index ny = p * t_ini;
  DataDrivenModel model;
  model.r_ = r;
  model.m_ = m;
  model.p_ = p;
  model.t_ini_ = t_ini;
  model.residual_ = residual;
  model.a_e_ = Mat::Zero(n, n);
  model.b_e_ = Mat::Zero(n, m);
  for (Index i = 0; i < nu - m; ++i) model.a_e_(i, i + m) = 1.0;
  model.b_e_.block(nu - m, 0, m, m).setIdentity();
  for (Index i = 0; i < ny - p; ++i) model.a_e_(nu + i, nu + i + p) = 1.0;
  model.a_e_.bottomRows(p) = r;
  return model;
}

struct PredictorFit {
  Mat r;
  double residual = 0.0;
};

inline constexpr double kPredictorTolerance = 1e-9;

/// Minimum-norm solution of R W = Y_f. Throws InconsistentData when the
/// relative residual exceeds `tol` (noisy data or t_ini below the lag).
inline PredictorFit fit_predictor(const data::HankelPartition& part,
                                  double tol = kPredictorTolerance) {
  const Mat w = part.stacked_past();
  require(w.size() > 0 && w.cwiseAbs().maxCoeff() > 0.0, ErrorCode::InvalidArgument,
          "fit_predictor: W must be nonzero");
  PredictorFit fit;
  fit.r = numkit::pinv_right_solve(w, part.y_future);
  fit.residual = (fit.r * w - part.y_future).norm() / std::max(1.0, part.y_future.norm());
  if (fit.residual > tol) {
    throw Error(ErrorCode::InconsistentData,
                "fit_predictor: relative residual " + std::to_string(fit.residual) +
                    " exceeds tolerance (noisy data or t_ini below the system lag)");
  }
  return fit;
}

inline DataDrivenModel identify(const data::TrajectoryDataset& ds, Index t_ini,
                                double tol = kPredictorTolerance) {
  const auto part = data::partition(ds, t_ini);
  const auto fit = fit_predictor(part, tol);
  return build_extended_dynamics(fit.r, ds.m(), ds.p(), t_ini, fit.residual);
}

inline void require_compatible(const DataDrivenModel& model, const ExtendedState& xi) {
  require(xi.m() == model.m() && xi.p() == model.p() && xi.t_ini() == model.t_ini(),
          ErrorCode::ShapeMismatch, "extended state does not match the model dimensions");
}

inline ExtendedState step_extended(const DataDrivenModel& model, const ExtendedState& xi,
                                   const Vec& u) {
  require_compatible(model, xi);
  require(u.size() == model.m(), ErrorCode::ShapeMismatch, "step_extended: input dimension");
  return ExtendedState(model.a_e() * xi.value() + model.b_e() * u, model.m(), model.p(),
                       model.t_ini());
}

inline Vec predict_output(const DataDrivenModel& model, const ExtendedState& xi) {
  require_compatible(model, xi);
  return model.r() * xi.value();
}

}  // namespace iodcbf::model
