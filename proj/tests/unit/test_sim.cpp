#include <gtest/gtest.h>

#include <random>

#include "iodcbf/sim/closed_loop.hpp"
#include "support/safe_set.hpp"

using namespace iodcbf;
using namespace iodcbf::sim;

namespace {

Vec scalar(double x) { return Vec::Constant(1, x); }

filter::FilterConfig config(double lambda_min) {
  filter::FilterConfig cfg;
  cfg.lambda_min = lambda_min;
  cfg.u_set = fixture::unit_interval();
  return cfg;
}

model::ExtendedState origin() { return model::ExtendedState(1, 1, fixture::kTIni); }

SimLog scenario(double lambda_min, std::uint64_t seed, Index steps = 4000) {
  auto plant = time_delay_double_integrator();
  auto sched = random_then_feedback(steps / 2, steps, 20, 1.5, seed, time_delay_feedback_gain());
  auto log = run_closed_loop(plant, fixture::model(), fixture::filter_set(), config(lambda_min),
                             std::move(sched), steps, origin());
  log.seed = seed;
  return log;
}

}  // namespace

TEST(Plant, ZeroInputFromRestStaysAtZero) {
  auto plant = time_delay_double_integrator();
  for (int t = 0; t < 50; ++t) EXPECT_EQ(plant.step(scalar(0.0))[0], 0.0);
}

TEST(Plant, ImpulseResponseMatchesHandIteration) {
  // u_0 = 1 reaches the state at t = 2, the velocity at t = 3 and the
  // position at t = 4; afterwards y_t = 0.01 (t - 3).
  auto plant = time_delay_double_integrator();
  std::vector<double> ys;
  for (int t = 0; t < 10; ++t) ys.push_back(plant.step(scalar(t == 0 ? 1.0 : 0.0))[0]);
  for (int t = 0; t < 4; ++t) EXPECT_EQ(ys[t], 0.0) << t;
  for (int t = 4; t < 10; ++t) EXPECT_NEAR(ys[t], 0.01 * (t - 3), 1e-15) << t;
}

TEST(Plant, MatchesArxRecursion) {
  auto plant = time_delay_double_integrator();
  fixture::ArxOracle arx;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    const double u = dist(rng);
    EXPECT_NEAR(plant.step(scalar(u))[0], arx.next(u), 1e-9) << t;
  }
}

TEST(Plant, QueueLengthStaysEqualToDelay) {
  auto plant = time_delay_double_integrator();
  for (int t = 0; t < 7; ++t) {
    plant.step(scalar(t));
    EXPECT_EQ(static_cast<Index>(plant.pending_inputs().size()), 2);
  }
  EXPECT_THROW(plant.step(scalar(std::nan(""))), Error);
}

TEST(Warmup, ZeroHistoryGivesZeroState) {
  auto plant = time_delay_double_integrator();
  const auto xi = warmup_history(plant, std::vector<Vec>(8, scalar(0.0)), fixture::kTIni);
  EXPECT_EQ(xi.value(), Vec::Zero(10));
}

TEST(Warmup, ReplayThroughModelMatchesPlant) {
  auto plant = time_delay_double_integrator();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<Vec> warm;
  for (int t = 0; t < 9; ++t) warm.push_back(scalar(dist(rng)));
  auto xi = warmup_history(plant, warm, fixture::kTIni);
  for (int t = 0; t < 200; ++t) {
    const Vec u = scalar(dist(rng));
    const double predicted = model::predict_output(fixture::model(), xi)[0];
    const Vec y = plant.step(u);
    EXPECT_NEAR(predicted, y[0], 1e-9) << t;
    const auto stepped = model::step_extended(fixture::model(), xi, u);
    xi.push(u, y);
    EXPECT_LE((stepped.value() - xi.value()).lpNorm<Eigen::Infinity>(), 1e-9) << t;
  }
}

TEST(Warmup, InputsOutsideUGiveStateOutsideXi) {
  auto plant = time_delay_double_integrator();
  std::vector<Vec> warm(6, scalar(0.0));
  warm[4] = scalar(1.5);
  const auto xi = warmup_history(plant, warm, fixture::kTIni);
  EXPECT_FALSE(geometry::contains(fixture::xi_box(), xi.value()));
  EXPECT_THROW(warmup_history(plant, std::vector<Vec>(3, scalar(0.0)), fixture::kTIni), Error);
}

TEST(Schedule, RejectsGapsAndOverlaps) {
  EXPECT_THROW(NominalSchedule({{1, 5, ConstantInput{scalar(0)}}}), Error);
  EXPECT_THROW(NominalSchedule({{0, 5, ConstantInput{scalar(0)}}, {4, 8, ConstantInput{scalar(0)}}}),
               Error);
  EXPECT_THROW(NominalSchedule({{0, 5, PiecewiseRandom{0, 1.0, 1}}}), Error);
  EXPECT_NO_THROW(NominalSchedule({{0, 5, ConstantInput{scalar(0)}}, {5, 8, ConstantInput{scalar(1)}}}));
}

TEST(Schedule, PiecewiseRandomHoldsAndStaysInRange) {
  NominalSchedule s({{0, 200, PiecewiseRandom{20, 1.5, 9}}});
  const Vec xi = Vec::Zero(10);
  bool beyond_unit = false;
  for (Index t = 0; t < 200; ++t) {
    const double u = s.evaluate(t, xi, 1)[0];
    EXPECT_LE(std::abs(u), 1.5);
    EXPECT_EQ(u, s.evaluate(t - t % 20, xi, 1)[0]);
    beyond_unit = beyond_unit || std::abs(u) > 1.0;
  }
  EXPECT_TRUE(beyond_unit);
  EXPECT_NE(s.evaluate(0, xi, 1)[0], s.evaluate(20, xi, 1)[0]);
}

TEST(Schedule, QueryOrderDoesNotMatter) {
  NominalSchedule a({{0, 100, PiecewiseRandom{10, 1.0, 5}}});
  NominalSchedule b({{0, 100, PiecewiseRandom{10, 1.0, 5}}});
  const Vec xi = Vec::Zero(10);
  const double late = b.evaluate(95, xi, 1)[0];
  for (Index t = 0; t < 100; ++t) a.evaluate(t, xi, 1);
  EXPECT_EQ(a.evaluate(95, xi, 1)[0], late);
  EXPECT_EQ(a.evaluate(3, xi, 1)[0], b.evaluate(3, xi, 1)[0]);
}

TEST(Schedule, FeedbackSegmentIsMinusKXi) {
  NominalSchedule s({{0, 1, ConstantInput{scalar(0)}}, {1, 3, StaticFeedback{time_delay_feedback_gain()}}});
  Vec xi = Vec::Zero(10);
  xi[9] = 0.5;
  xi[8] = -0.25;
  EXPECT_NEAR(s.evaluate(2, xi, 1)[0], -(11.46 * 0.5 + 5.16 * 0.25), 1e-15);
  EXPECT_THROW(s.evaluate(3, xi, 1), Error);
}

TEST(ClosedLoop, ZeroNominalFromOriginStaysAtRest) {
  auto plant = time_delay_double_integrator();
  const auto log = run_closed_loop(plant, fixture::model(), fixture::filter_set(), config(0.1),
                                   constant_schedule(scalar(0.0), 100), 100, origin());
  ASSERT_TRUE(log.ok()) << log.message;
  ASSERT_EQ(log.rows.size(), 100u);
  for (const auto& r : log.rows) {
    EXPECT_NEAR(r.u_applied[0], 0.0, 1e-12);
    EXPECT_NEAR(r.y[0], 0.0, 1e-12);
    EXPECT_NEAR(r.lambda, 0.1, 1e-9);
  }
  EXPECT_EQ(first_intervention(log), -1);
}

TEST(ClosedLoop, EmptyScheduleGivesEmptyLog) {
  auto plant = time_delay_double_integrator();
  const auto log = run_closed_loop(plant, fixture::model(), fixture::filter_set(), config(1.0),
                                   NominalSchedule(), 0, origin());
  EXPECT_TRUE(log.ok());
  EXPECT_TRUE(log.rows.empty());
}

TEST(ClosedLoop, ScheduleMustCoverSteps) {
  auto plant = time_delay_double_integrator();
  EXPECT_THROW(run_closed_loop(plant, fixture::model(), fixture::filter_set(), config(1.0),
                               constant_schedule(scalar(0.0), 10), 11, origin()),
               Error);
}

TEST(ClosedLoop, RejectsInitialStateOutsideSafeSet) {
  auto plant = time_delay_double_integrator();
  Vec v = Vec::Zero(10);
  v[9] = 1.2;
  EXPECT_THROW(run_closed_loop(plant, fixture::model(), fixture::filter_set(), config(1.0),
                               constant_schedule(scalar(0.0), 10), 10,
                               model::ExtendedState(v, 1, 1, fixture::kTIni)),
               Error);
}

TEST(ClosedLoop, ScenarioIsSafeForEachLambdaMin) {
  for (double lm : {0.01, 0.1, 1.0}) {
    const auto log = scenario(lm, 1);
    ASSERT_TRUE(log.ok()) << lm << ": " << log.message;
    const auto s = summarize(log);
    EXPECT_EQ(s.steps, 4000);
    EXPECT_EQ(s.infeasible_count, 0);
    EXPECT_EQ(s.violation_count, 0);
    EXPECT_LE(s.max_abs_y, 1.0 + 1e-8) << lm;
    EXPECT_LE(s.max_abs_u, 1.0 + 1e-8) << lm;
    EXPECT_GE(s.min_h, -1e-8) << lm;
    EXPECT_LE(s.max_prediction_error, 1e-8) << lm;
    EXPECT_GT(s.intervention_count, 0) << lm;
    for (const auto& r : log.rows) {
      EXPECT_GE(r.lambda, lm - 1e-9);
      EXPECT_LE(r.lambda, 1.0 + 1e-9);
    }
  }
}

TEST(ClosedLoop, AdversarialNominalSaturatesBelowBound) {
  auto plant = time_delay_double_integrator();
  const auto log = run_closed_loop(plant, fixture::model(), fixture::filter_set(), config(1.0),
                                   constant_schedule(scalar(1.0), 600), 600, origin());
  ASSERT_TRUE(log.ok()) << log.message;
  const auto s = summarize(log);
  EXPECT_GE(s.min_h, -1e-8);
  EXPECT_LE(s.max_abs_y, 1.0 + 1e-8);
  EXPECT_GT(s.max_abs_y, 0.9);
  EXPECT_GE(first_intervention(log), 0);
  EXPECT_GT(s.intervention_count, 100);
}

TEST(ClosedLoop, SmallerLambdaMinIntervenesEarlier) {
  auto run = [](double lm) {
    auto plant = time_delay_double_integrator();
    return run_closed_loop(plant, fixture::model(), fixture::filter_set(), config(lm),
                           constant_schedule(scalar(1.0), 300), 300, origin());
  };
  const Index soft = first_intervention(run(0.01));
  const Index hard = first_intervention(run(1.0));
  ASSERT_GE(soft, 0);
  ASSERT_GE(hard, 0);
  EXPECT_LT(soft, hard);
}

TEST(ClosedLoop, InsufficientInputAuthorityStopsWithPartialLog) {
  // The safe set was built for |u| <= 1, but this filter may only push
  // forward: eventually no admissible input keeps the state inside.
  auto cfg = config(1.0);
  cfg.u_set = geometry::box_polytope(scalar(0.5), scalar(1.0));
  auto plant = time_delay_double_integrator();
  const auto log = run_closed_loop(plant, fixture::model(), fixture::filter_set(), cfg,
                                   constant_schedule(scalar(1.0), 2000), 2000, origin());
  EXPECT_EQ(log.outcome, RunOutcome::FilterInfeasible);
  ASSERT_FALSE(log.rows.empty());
  EXPECT_LT(log.rows.size(), 2000u);
  EXPECT_NE(log.rows.back().qp_status, numkit::SolveKind::Optimal);
  EXPECT_FALSE(log.message.empty());
}

TEST(ClosedLoop, WrongModelIsReportedAsHistoryMismatch) {
  Mat r = fixture::model().r();
  r(0, 9) += 1e-3;
  const auto wrong = model::build_extended_dynamics(r, 1, 1, fixture::kTIni);
  auto plant = time_delay_double_integrator();
  const auto log = run_closed_loop(plant, wrong, fixture::model(), fixture::filter_set(), config(1.0),
                                   random_then_feedback(100, 200, 20, 1.5, 2, time_delay_feedback_gain()),
                                   200, origin());
  EXPECT_EQ(log.outcome, RunOutcome::HistoryMismatch);
  EXPECT_GT(log.max_prediction_error, 1e-6);
}

TEST(ClosedLoop, RunsAreBitIdentical) {
  const auto a = scenario(0.1, 5, 600);
  const auto b = scenario(0.1, 5, 600);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].u_applied, b.rows[i].u_applied);
    EXPECT_EQ(a.rows[i].y, b.rows[i].y);
    EXPECT_EQ(a.rows[i].lambda, b.rows[i].lambda);
    EXPECT_EQ(a.rows[i].h, b.rows[i].h);
  }
}

TEST(ClosedLoop, DifferentSeedsGiveDifferentNominals) {
  const auto a = scenario(1.0, 5, 100);
  const auto b = scenario(1.0, 6, 100);
  EXPECT_NE(a.rows[0].u_nominal[0], b.rows[0].u_nominal[0]);
}
