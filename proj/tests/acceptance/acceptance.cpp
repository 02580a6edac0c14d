// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "iodcbf/filter/checks.hpp"
#include "iodcbf/filter/filter.hpp"
#include "iodcbf/geometry/operations.hpp"
#include "iodcbf/numkit/lp.hpp"
#include "iodcbf/numkit/qp.hpp"
#include "iodcbf/sim/closed_loop.hpp"
#include "support/oracles.hpp"
#include "support/time_delay.hpp"

using namespace iodcbf;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", id, name,
              o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

geometry::Polytope unit_interval() {
  return geometry::box_polytope(Vec::Constant(1, -1.0), Vec::Constant(1, 1.0));
}

geometry::Polytope ambient() {
  return geometry::extended_constraints(unit_interval(), unit_interval(), fixture::kTIni);
}

// Computed once, shared by criteria 3, 7 and 9 (exact set) and 5, 6 (set
// computed with the input bound shrunk by 1e-6).
const geometry::InvariantSetReport& exact_report() {
  static const auto r = geometry::invariant_set(ambient(), fixture::model(), unit_interval(), 200, 1e-7);
  return r;
}

const geometry::Polytope& margin_set() {
  static const auto s = geometry::invariant_set(ambient(), fixture::model(),
                                                geometry::tighten(unit_interval(), 1e-6), 200, 1e-7)
                            .set;
  return s;
}

filter::FilterConfig filter_config(double lambda_min) {
  filter::FilterConfig cfg;
  cfg.lambda_min = lambda_min;
  cfg.beta = 1e6;
  cfg.u_set = unit_interval();
  return cfg;
}

model::ExtendedState origin() { return model::ExtendedState(1, 1, fixture::kTIni); }

// -- 1 ------------------------------------------------------------------------

Outcome pe_rank() {
  const auto t0 = Clock::now();
  const auto rep = data::check_pe(fixture::dataset(), fixture::kTIni);
  const double dt = seconds_since(t0);
  return {rep.stacked_rank == 10 && dt < 1.0,
          "stacked rank " + std::to_string(rep.stacked_rank) + " (want 10), input Hankel rank " +
              std::to_string(rep.input_hankel_rank) + fmt(", %.4f s (limit 1 s)", dt)};
}

// -- 2 ------------------------------------------------------------------------

Outcome predictor() {
  const auto& m = fixture::model();
  auto plant = sim::time_delay_double_integrator();
  fixture::ArxOracle arx;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto xi = origin();
  double plant_err = 0.0;
  double arx_err = 0.0;
  double arx_vs_plant = 0.0;
  for (Index t = 0; t < 200 + fixture::kTIni; ++t) {
    const Vec ut = Vec::Constant(1, u(rng));
    const double pred = model::predict_output(m, xi)[0];
    const double y = plant.step(ut)[0];
    const double y_arx = arx.next(ut[0]);
    // The zero history is consistent with the plant at rest, so the
    // prediction is valid from t = 0.
    plant_err = std::max(plant_err, std::abs(pred - y));
    arx_err = std::max(arx_err, std::abs(pred - y_arx));
    arx_vs_plant = std::max(arx_vs_plant, std::abs(y - y_arx));
    xi.push(ut, Vec::Constant(1, y));
  }
  const bool ok = m.residual() <= 1e-9 && plant_err <= 1e-8 && arx_err <= 1e-8 && arx_vs_plant <= 1e-8;
  return {ok, fmt("residual %.2e (<= 1e-9)", m.residual()) +
                  fmt(", max |pred - plant| %.2e", plant_err) +
                  fmt(", max |pred - ARX| %.2e (<= 1e-8)", arx_err)};
}

// -- 3 ------------------------------------------------------------------------

Outcome invariant_set() {
  const auto t0 = Clock::now();
  const auto& rep = exact_report();
  const double dt = seconds_since(t0);
  const auto& s = rep.set;
  const auto ball = geometry::chebyshev_center(s);
  const bool nonempty = ball.kind == numkit::SolveKind::Optimal && ball.radius > 0.0;
  const bool inside = geometry::is_subset(s, ambient(), 1e-7);
  const auto inv = filter::sampled_invariance(fixture::model(), s, unit_interval(), 1000, 3);
  const bool ok = rep.converged && nonempty && inside && inv.samples >= 1000 && inv.passed() && dt <= 900;
  return {ok, std::string(rep.converged ? "converged" : "NOT converged") + " in " +
                  std::to_string(rep.iterations) + " iterations, " + std::to_string(s.num_rows()) +
                  fmt(" rows, inner radius %.3g", ball.radius) + (inside ? ", inside Xi" : ", NOT inside Xi") +
                  ", invariance " + std::to_string(inv.samples - inv.failures) + "/" +
                  std::to_string(inv.samples) + fmt(" LP-feasible, set time %.2f s (limit 900 s)", dt)};
}

// -- 4 ------------------------------------------------------------------------

geometry::Polytope random_polytope_3d(std::mt19937_64& rng, int cuts) {
  std::uniform_real_distribution<double> rhs(0.3, 1.5);
  Mat h(6 + cuts, 3);
  Vec c(6 + cuts);
  h.topRows(6) << 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1;
  c.head(6).setConstant(2.0);
  for (int k = 0; k < cuts; ++k) {
    h.row(6 + k) = oracle::random_unit(rng, 3).transpose() * (0.5 + rhs(rng));
    c[6 + k] = rhs(rng);
  }
  return geometry::Polytope(h, c);
}

Outcome geometry_oracles() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  int instances = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const auto p = random_polytope_3d(rng, 4 + trial % 9);
    const Index drop = trial % 3;
    const auto proj = geometry::eliminate_variable(p, drop);
    const auto verts = oracle::enumerate_vertices(p.lhs(), p.rhs());
    if (verts.empty()) return {false, "vertex oracle found no vertices"};
    for (int k = 0; k < 64; ++k) {
      const double ang = 2.0 * M_PI * k / 64.0;
      Vec d2(2);
      d2 << std::cos(ang), std::sin(ang);
      Vec d3 = Vec::Zero(3);
      for (Index i = 0, j = 0; i < 3; ++i)
        if (i != drop) d3[i] = d2[j++];
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& v : verts) best = std::max(best, d3.dot(v));
      const auto s = geometry::support(proj, d2);
      if (s.kind != numkit::SolveKind::Optimal) return {false, "support LP failed on a projection"};
      worst = std::max(worst, std::abs(s.value - best));
    }
    ++instances;
  }
  // y+ = y + u, |u| <= 1: Pre([-1, 1]) = [-2, 2] over R, and [-1, 1] within [-1, 1].
  const model::LinearModel integrator((Mat(1, 1) << 1).finished(), (Mat(1, 1) << 1).finished());
  const auto pre = geometry::pre_set(unit_interval(), integrator, unit_interval(),
                                     geometry::Polytope::universe(1));
  const auto within = geometry::pre_set(unit_interval(), integrator, unit_interval(), unit_interval());
  const Vec up = Vec::Constant(1, 1.0);
  const Vec down = Vec::Constant(1, -1.0);
  const bool exact = geometry::support(pre, up).value == 2.0 && geometry::support(pre, down).value == 2.0 &&
                     geometry::support(within, up).value == 1.0 &&
                     geometry::support(within, down).value == 1.0;
  return {instances >= 100 && worst <= 1e-7 && exact,
          std::to_string(instances) + fmt(" 3-D instances, max support error %.2e (<= 1e-7)", worst) +
              (exact ? ", 1-D pre-set exact" : ", 1-D pre-set WRONG")};
}

// -- 5 ------------------------------------------------------------------------

Outcome closed_loop_safety() {
  const auto& set = margin_set();
  int runs = 0;
  int bad = 0;
  Index infeasible = 0;
  double max_y = 0.0;
  double max_u = 0.0;
  double min_h = std::numeric_limits<double>::infinity();
  double slowest = 0.0;
  std::string first_bad;
  for (const double lambda : {0.01, 0.1, 1.0}) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto t0 = Clock::now();
      auto plant = sim::time_delay_double_integrator();
      auto sched = sim::random_then_feedback(2000, 4000, 20, 1.5, seed, sim::time_delay_feedback_gain());
      const auto log = sim::run_closed_loop(plant, fixture::model(), set, filter_config(lambda),
                                            std::move(sched), 4000, origin());
      const double dt = seconds_since(t0);
      slowest = std::max(slowest, dt);
      const auto s = sim::summarize(log);
      ++runs;
      infeasible += s.infeasible_count;
      max_y = std::max(max_y, s.max_abs_y);
      max_u = std::max(max_u, s.max_abs_u);
      min_h = std::min(min_h, s.min_h);
      const bool ok = log.ok() && s.steps == 4000 && s.infeasible_count == 0 &&
                      s.max_abs_y <= 1 + 1e-8 && s.max_abs_u <= 1 + 1e-8 && s.min_h >= -1e-8 && dt <= 120;
      if (!ok && bad++ == 0)
        first_bad = fmt(" (first failure: lambda_min %g", lambda) + ", seed " + std::to_string(seed) +
                    ", " + s.outcome + ")";
    }
  }
  return {bad == 0, std::to_string(runs - bad) + "/" + std::to_string(runs) + " runs ok, " +
                        std::to_string(infeasible) + " infeasible QPs" +
                        fmt(", max |y| %.12f", max_y) + fmt(", max |u| %.12f", max_u) +
                        fmt(", min h %.2e", min_h) + fmt(", slowest run %.2f s (limit 120 s)", slowest) +
                        first_bad};
}

// -- 6 ------------------------------------------------------------------------

Outcome lambda_behaviour() {
  const auto& set = margin_set();
  auto run = [&](double lambda) {
    auto plant = sim::time_delay_double_integrator();
    return sim::run_closed_loop(plant, fixture::model(), set, filter_config(lambda),
                                sim::constant_schedule(Vec::Constant(1, 1.0), 300), 300, origin());
  };
  const auto fast = run(0.01);
  const auto slow = run(1.0);
  const Index f_fast = sim::first_intervention(fast);
  const Index f_slow = sim::first_intervention(slow);

  // Saturation: wherever u_nominal already satisfies the decay constraint at
  // lambda_min with room to spare, the realized lambda must equal lambda_min.
  // Replayed on the random/feedback scenario so both regimes occur.
  Index slack_steps = 0;
  double worst = 0.0;
  for (const double lambda : {0.01, 0.1}) {
    auto plant = sim::time_delay_double_integrator();
    auto sched = sim::random_then_feedback(2000, 4000, 20, 1.5, 1, sim::time_delay_feedback_gain());
    const auto log = sim::run_closed_loop(plant, fixture::model(), set, filter_config(lambda),
                                          std::move(sched), 4000, origin());
    if (!log.ok()) return {false, "scenario run failed: " + log.message};
    auto xi = origin();
    for (const auto& r : log.rows) {
      const auto [hb, room] = filter::safe_input_hyperplane(fixture::model(), set, xi.value());
      const double h0 = filter::h_value(set, xi);
      const double margin = (hb * r.u_nominal - room).array().maxCoeff() + (1.0 - lambda) * h0;
      const bool u_ok = std::abs(r.u_nominal[0]) <= 1.0;
      if (margin <= -1e-9 && u_ok) {
        ++slack_steps;
        worst = std::max(worst, std::abs(r.lambda - lambda));
      }
      xi.push(r.u_applied, r.y);
    }
  }
  const bool ok = f_fast >= 0 && f_slow >= 0 && f_fast < f_slow && slack_steps > 0 && worst <= 1e-9;
  return {ok, "first intervention on u_l = 1: step " + std::to_string(f_fast) +
                  " (lambda_min 0.01) vs step " + std::to_string(f_slow) + " (lambda_min 1); " +
                  std::to_string(slack_steps) + fmt(" slack steps, max |lambda - lambda_min| %.1e (<= 1e-9)", worst)};
}

// -- 7 ------------------------------------------------------------------------

Outcome mpsf_equivalence() {
  const auto t0 = Clock::now();
  const auto eq = filter::mpsf_equivalence(fixture::model(), ambient(), unit_interval(),
                                           exact_report().set, 100, 77);
  const double dt = seconds_since(t0);
  return {eq.samples == 100 && eq.passed(1e-6) && dt < 10.0,
          std::to_string(eq.samples) + " states, " + std::to_string(eq.solver_failures) +
              " solver failures" + fmt(", max deviation %.2e (<= 1e-6)", eq.max_deviation) +
              fmt(", %.3f s (limit 10 s)", dt)};
}

// -- 8 ------------------------------------------------------------------------

Outcome solver_suites() {
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double lp_err = 0.0;
  double qp_err = 0.0;
  int lp_mismatch = 0;
  int qp_mismatch = 0;
  int nondeterministic = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 2 + trial % 4;
    const Index rows = 3 + trial % 5;
    numkit::LpProblem p;
    p.objective = Vec(n);
    for (Index j = 0; j < n; ++j) p.objective[j] = u(rng);
    p.ineq_lhs = Mat(rows + 2 * n, n);
    p.ineq_rhs = Vec(rows + 2 * n);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < n; ++j) p.ineq_lhs(i, j) = u(rng);
      p.ineq_rhs[i] = 0.3 * u(rng) + 0.2;
    }
    // Box rows keep every instance bounded.
    p.ineq_lhs.bottomRows(2 * n).setZero();
    for (Index j = 0; j < n; ++j) {
      p.ineq_lhs(rows + 2 * j, j) = 1.0;
      p.ineq_lhs(rows + 2 * j + 1, j) = -1.0;
      p.ineq_rhs[rows + 2 * j] = 2.0;
      p.ineq_rhs[rows + 2 * j + 1] = 2.0;
    }
    const auto want = oracle::lp_min_by_vertices(p.objective, p.ineq_lhs, p.ineq_rhs);
    const auto s1 = numkit::solve_lp(p);
    const auto s2 = numkit::solve_lp(p);
    if (s1.kind != s2.kind || (s1.optimal() && !(*s1.solution == *s2.solution))) ++nondeterministic;
    if (!want) {
      if (s1.kind != numkit::SolveKind::Infeasible) ++lp_mismatch;
    } else if (!s1.optimal()) {
      ++lp_mismatch;
    } else {
      lp_err = std::max(lp_err, std::abs(*s1.objective_value - *want));
    }
  }
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 2 + trial % 3;
    Mat m(n, n);
    for (Index i = 0; i < n * n; ++i) m.data()[i] = u(rng);
    const Mat q = m * m.transpose() + 0.5 * Mat::Identity(n, n);
    Vec lin(n);
    for (Index i = 0; i < n; ++i) lin[i] = 2.0 * u(rng);
    const Index rows = 1 + trial % 6;
    Mat a(rows, n);
    Vec b(rows);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < n; ++j) a(i, j) = u(rng);
      b[i] = 0.5 * u(rng);
    }
    const auto want = oracle::qp_by_active_sets(q, lin, a, b);
    const numkit::QpProblem p{q, lin, a, b, std::nullopt};
    const auto s1 = numkit::solve_qp(p);
    const auto s2 = numkit::solve_qp(p);
    if (s1.kind != s2.kind || (s1.optimal() && !(*s1.solution == *s2.solution))) ++nondeterministic;
    if (!want) {
      if (s1.kind != numkit::SolveKind::Infeasible) ++qp_mismatch;
    } else if (!s1.optimal()) {
      ++qp_mismatch;
    } else {
      qp_err = std::max(qp_err, (*s1.solution - *want).cwiseAbs().maxCoeff());
    }
  }
  const bool ok = lp_mismatch == 0 && qp_mismatch == 0 && nondeterministic == 0 && lp_err <= 1e-7 &&
                  qp_err <= 1e-6;
  return {ok, fmt("200 LPs max objective error %.2e (<= 1e-7)", lp_err) + ", " +
                  std::to_string(lp_mismatch) + " status mismatches; " +
                  fmt("200 QPs max solution error %.2e (<= 1e-6)", qp_err) + ", " +
                  std::to_string(qp_mismatch) + " status mismatches; " +
                  std::to_string(nondeterministic) + " non-repeatable solves"};
}

// -- 9 ------------------------------------------------------------------------

Outcome sign_conditions() {
  const auto s = filter::sign_conditions(exact_report().set, 1000, 100, 1000, 909, 1e-9);
  return {s.passed() && s.interior == 1000 && s.boundary == 100 && s.exterior == 1000,
          "interior " + std::to_string(s.interior - s.interior_failures) + "/" +
              std::to_string(s.interior) + " with h > 0, boundary " +
              std::to_string(s.boundary - s.boundary_failures) + "/" + std::to_string(s.boundary) +
              fmt(" with |h| <= 1e-9 (max %.1e)", s.boundary_max_abs_h) + ", exterior " +
              std::to_string(s.exterior - s.exterior_failures) + "/" + std::to_string(s.exterior) +
              " with h < 0"};
}

}  // namespace

int main() {
  report(1, "PE rank", pe_rank);
  report(2, "predictor", predictor);
  report(3, "invariant set", invariant_set);
  report(4, "geometry oracles", geometry_oracles);
  report(5, "closed-loop safety", closed_loop_safety);
  report(6, "lambda behaviour", lambda_behaviour);
  report(7, "MPSF equivalence", mpsf_equivalence);
  report(8, "solver suites", solver_suites);
  report(9, "sign conditions", sign_conditions);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
