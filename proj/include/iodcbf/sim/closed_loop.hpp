#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "iodcbf/filter/filter.hpp"
#include "iodcbf/sim/plant.hpp"

namespace iodcbf::sim {

/// Uniform on [-amplitude, amplitude] per input channel, held for
/// `hold_steps` samples.
struct PiecewiseRandom {
  Index hold_steps = 1;
  double amplitude = 1.0;
  std::uint64_t seed = 0;
};

/// u_l = -K xi.
struct StaticFeedback {
  Mat gain;
};

struct ConstantInput {
  Vec value;
};

using NominalGenerator = std::variant<PiecewiseRandom, StaticFeedback, ConstantInput>;

struct ScheduleSegment {
  Index start_step = 0;
  Index end_step = 0;  // exclusive
  NominalGenerator generator;
};

/// Contiguous list of nominal-controller segments starting at step 0.
class NominalSchedule {
 public:
  NominalSchedule() = default;

  explicit NominalSchedule(std::vector<ScheduleSegment> segments) : segments_(std::move(segments)) {
    Index expect = 0;
    for (const auto& s : segments_) {
      require(s.start_step == expect && s.end_step > s.start_step, ErrorCode::InvalidArgument,
              "NominalSchedule: segments must be contiguous, non-empty and start at step 0");
      expect = s.end_step;
      if (const auto* r = std::get_if<PiecewiseRandom>(&s.generator)) {
        require(r->hold_steps > 0 && r->amplitude >= 0.0 && std::isfinite(r->amplitude),
                ErrorCode::InvalidArgument, "NominalSchedule: bad piecewise-random parameters");
      }
    }
    cache_.resize(segments_.size());
  }

  Index end_step() const { return segments_.empty() ? 0 : segments_.back().end_step; }
  const std::vector<ScheduleSegment>& segments() const { return segments_; }

  /// Nominal input at step t given the current extended state.
  Vec evaluate(Index t, const Vec& xi, Index m) {
    require(t >= 0 && t < end_step(), ErrorCode::InvalidArgument,
            "NominalSchedule: step outside the schedule");
    std::size_t k = 0;
    while (segments_[k].end_step <= t) ++k;
    const auto& seg = segments_[k];
    if (const auto* r = std::get_if<PiecewiseRandom>(&seg.generator)) {
      // Held values are drawn in order and cached so that the result does not
      // depend on which steps were queried before.
      auto& held = cache_[k];
      const auto block = static_cast<std::size_t>((t - seg.start_step) / r->hold_steps);
      if (held.values.empty()) held.rng.seed(r->seed);
      std::uniform_real_distribution<double> dist(-r->amplitude, r->amplitude);
      while (held.values.size() <= block) {
        Vec v(m);
        for (Index i = 0; i < m; ++i) v[i] = dist(held.rng);
        held.values.push_back(std::move(v));
      }
      return held.values[block];
    }
    if (const auto* f = std::get_if<StaticFeedback>(&seg.generator)) {
      require(f->gain.rows() == m && f->gain.cols() == xi.size(), ErrorCode::ShapeMismatch,
              "NominalSchedule: feedback gain must be m x dim(xi)");
      return -(f->gain * xi);
    }
    const auto& c = std::get<ConstantInput>(seg.generator);
    require(c.value.size() == m, ErrorCode::ShapeMismatch, "NominalSchedule: constant input size");
    return c.value;
  }

 private:
  struct HeldValues {
    std::mt19937_64 rng;
    std::vector<Vec> values;
  };
  std::vector<ScheduleSegment> segments_;
  std::vector<HeldValues> cache_;
};

/// Random phase followed by static feedback, the layout of the delayed
/// double-integrator scenario.
inline NominalSchedule random_then_feedback(Index switch_step, Index total_steps, Index hold_steps,
                                            double amplitude, std::uint64_t seed, Mat gain) {
  require(switch_step > 0 && total_steps > switch_step, ErrorCode::InvalidArgument,
          "random_then_feedback: need 0 < switch_step < total_steps");
  return NominalSchedule({{0, switch_step, PiecewiseRandom{hold_steps, amplitude, seed}},
                          {switch_step, total_steps, StaticFeedback{std::move(gain)}}});
}

inline NominalSchedule constant_schedule(Vec value, Index steps) {
  if (steps == 0) return NominalSchedule();
  return NominalSchedule({{0, steps, ConstantInput{std::move(value)}}});
}

/// LQR gain for the delayed double integrator with T_ini = 5.
inline Mat time_delay_feedback_gain() {
  Mat k(1, 10);
  k << 0.05, 0.16, 0.15, 0.143, 0.13, 0, 0, -5.44, -5.16, 11.46;
  return k;
}

struct SimRow {
  Index step = 0;
  double time_s = 0.0;
  Vec u_nominal;
  Vec u_applied;
  Vec y;
  double h = 0.0;  // h(xi_t), before applying u_t
  double lambda = 0.0;
  numkit::SolveKind qp_status = numkit::SolveKind::Optimal;
  bool violation = false;
};

enum class RunOutcome { Completed, FilterInfeasible, HistoryMismatch, SafetyViolation };

constexpr std::string_view to_string(RunOutcome o) {
  switch (o) {
    case RunOutcome::Completed: return "completed";
    case RunOutcome::FilterInfeasible: return "filter_infeasible";
    case RunOutcome::HistoryMismatch: return "history_mismatch";
    case RunOutcome::SafetyViolation: return "safety_violation";
  }
  return "unknown";
}

struct SimLog {
  std::vector<SimRow> rows;
  std::uint64_t seed = 0;
  std::string config_hash;
  RunOutcome outcome = RunOutcome::Completed;
  std::string message;
  double max_prediction_error = 0.0;

  bool ok() const { return outcome == RunOutcome::Completed; }
};

struct ClosedLoopOptions {
  double sample_time = 0.1;
  double history_tol = 1e-6;
  double safety_tol = 1e-8;
  /// Difference |u_applied - u_nominal| above which a step counts as a filter
  /// intervention.
  double intervention_tol = 1e-7;
};

/// Runs the filter in the loop for `steps` samples. Errors along the way
/// (infeasible QP, model/plant disagreement, constraint violation) halt the
/// run and are reported in the log together with the rows recorded so far.
template <model::LinearStepModel M>
SimLog run_closed_loop(StateSpacePlant& plant, const model::DataDrivenModel& model,
                       const M& filter_model, const geometry::Polytope& safe_set,
                       const filter::FilterConfig& cfg, NominalSchedule schedule, Index steps,
                       model::ExtendedState xi, const ClosedLoopOptions& opt = {}) {
  model::require_compatible(model, xi);
  require(steps >= 0 && steps <= schedule.end_step(), ErrorCode::InvalidArgument,
          "run_closed_loop: schedule does not cover the requested steps");
  require(plant.m() == model.m() && plant.p() == model.p(), ErrorCode::ShapeMismatch,
          "run_closed_loop: plant and model dimensions differ");
  require(filter::h_value(safe_set, xi) >= -cfg.qp_tol, ErrorCode::InvalidArgument,
          "run_closed_loop: initial extended state is outside the safe set");
  filter::CbfFilterSession<M> session(filter_model, safe_set, cfg);
  SimLog log;
  log.rows.reserve(static_cast<std::size_t>(steps));
  for (Index t = 0; t < steps; ++t) {
    SimRow row;
    row.step = t;
    row.time_s = static_cast<double>(t) * opt.sample_time;
    row.u_nominal = schedule.evaluate(t, xi.value(), model.m());
    const auto res = session(xi.value(), row.u_nominal);
    row.h = res.h_before;
    row.qp_status = res.status;
    if (!res.optimal()) {
      log.rows.push_back(std::move(row));
      log.outcome = RunOutcome::FilterInfeasible;
      log.message = "filter QP returned " + std::string(numkit::to_string(res.status)) +
                    " at step " + std::to_string(t);
      return log;
    }
    row.u_applied = res.u_safe;
    row.lambda = res.lambda;
    row.y = plant.step(row.u_applied);
    const double err = (row.y - model::predict_output(model, xi)).lpNorm<Eigen::Infinity>();
    log.max_prediction_error = std::max(log.max_prediction_error, err);
    xi.push(row.u_applied, row.y);
    const bool u_ok = geometry::contains(cfg.u_set, row.u_applied, opt.safety_tol);
    row.violation = !u_ok || filter::h_value(safe_set, xi) < -opt.safety_tol;
    log.rows.push_back(std::move(row));
    if (err > opt.history_tol) {
      log.outcome = RunOutcome::HistoryMismatch;
      log.message = "measured output deviates from the model prediction by " +
                    std::to_string(err) + " at step " + std::to_string(t);
      return log;
    }
    if (log.rows.back().violation) {
      log.outcome = RunOutcome::SafetyViolation;
      log.message = "constraint violation at step " + std::to_string(t);
      return log;
    }
  }
  return log;
}

inline SimLog run_closed_loop(StateSpacePlant& plant, const model::DataDrivenModel& model,
                              const geometry::Polytope& safe_set, const filter::FilterConfig& cfg,
                              NominalSchedule schedule, Index steps, model::ExtendedState xi,
                              const ClosedLoopOptions& opt = {}) {
  return run_closed_loop(plant, model, model, safe_set, cfg, std::move(schedule), steps,
                         std::move(xi), opt);
}

/// First step whose applied input differs from the nominal one, or -1.
inline Index first_intervention(const SimLog& log, double tol = ClosedLoopOptions{}.intervention_tol) {
  for (const auto& r : log.rows)
    if (r.u_applied.size() > 0 && (r.u_applied - r.u_nominal).lpNorm<Eigen::Infinity>() > tol)
      return r.step;
  return -1;
}

struct SimSummary {
  Index steps = 0;
  double max_abs_y = 0.0;
  double max_abs_u = 0.0;
  double min_h = std::numeric_limits<double>::infinity();
  Index infeasible_count = 0;
  Index violation_count = 0;
  Index intervention_count = 0;
  Index first_intervention = -1;
  double max_prediction_error = 0.0;
  std::string outcome;
};

inline SimSummary summarize(const SimLog& log) {
  SimSummary s;
  s.steps = static_cast<Index>(log.rows.size());
  s.max_prediction_error = log.max_prediction_error;
  s.outcome = std::string(to_string(log.outcome));
  s.first_intervention = first_intervention(log);
  const double tol = ClosedLoopOptions{}.intervention_tol;
  for (const auto& r : log.rows) {
    s.min_h = std::min(s.min_h, r.h);
    if (r.qp_status != numkit::SolveKind::Optimal) {
      ++s.infeasible_count;
      continue;
    }
    s.max_abs_u = std::max(s.max_abs_u, r.u_applied.lpNorm<Eigen::Infinity>());
    s.max_abs_y = std::max(s.max_abs_y, r.y.lpNorm<Eigen::Infinity>());
    if (r.violation) ++s.violation_count;
    if ((r.u_applied - r.u_nominal).lpNorm<Eigen::Infinity>() > tol) ++s.intervention_count;
  }
  return s;
}

}  // namespace iodcbf::sim
