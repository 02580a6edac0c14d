// iodcbf: data generation, model fitting, safe-set computation, closed-loop
// simulation and property checks for the input-output barrier-function filter.
//
// Exit codes: 0 ok, 2 invalid input or config, 3 numerical failure or failed
// check, 4 set iteration did not converge.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "iodcbf/filter/checks.hpp"
#include "iodcbf/filter/filter.hpp"
#include "iodcbf/geometry/operations.hpp"
#include "iodcbf/geometry/vertices.hpp"
#include "iodcbf/io/config.hpp"
#include "iodcbf/io/serialize.hpp"
#include "iodcbf/sim/closed_loop.hpp"

namespace fs = std::filesystem;
using namespace iodcbf;
using io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitNotConverged = 4;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch:
    case ErrorCode::InvalidArgument:
    case ErrorCode::DepthTooLarge:
    case ErrorCode::InsufficientData:
    case ErrorCode::BadBounds:
    case ErrorCode::ZeroRow:
    case ErrorCode::ConfigError:
    case ErrorCode::IoError:
      return kExitInvalid;
    case ErrorCode::NotConverged:
      return kExitNotConverged;
    default:
      return kExitNumerical;
  }
}

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

io::Config load(const Common& opt) {
  io::Config cfg = opt.config_path.empty() ? io::parse_config(io::default_config_json())
                                           : io::load_config(opt.config_path);
  if (!opt.out.empty()) cfg.output_dir = opt.out;
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  require(!ec, ErrorCode::IoError, "cannot create output directory " + cfg.output_dir);
  return cfg;
}

std::string out_path(const io::Config& cfg, const std::string& name) {
  return (fs::path(cfg.output_dir) / name).string();
}

json header(const io::Config& cfg, std::uint64_t seed) {
  return {{"config_version", io::kConfigVersion}, {"config_hash", cfg.hash}, {"seed", seed}};
}

geometry::Polytope load_set(const std::string& path, const io::Config& cfg) {
  auto set = io::polytope_from_json(io::read_json(path));
  require(!set.empty_flag() && set.num_rows() > 0, ErrorCode::EmptyResult, path + ": safe set is empty");
  return cfg.row_scaling == "unit" ? geometry::normalize_rows(set) : set;
}

model::DataDrivenModel load_model(const std::string& path, const io::Config& cfg) {
  auto m = io::model_from_json(io::read_json(path));
  require(m.m() == cfg.m() && m.p() == cfg.p(), ErrorCode::ShapeMismatch,
          path + ": model dimensions differ from the configured plant");
  return m;
}

// -- generate-data -----------------------------------------------------------

int cmd_generate_data(const Common& opt) {
  auto cfg = load(opt);
  const std::uint64_t seed = opt.seed.value_or(cfg.dataset_seed);
  const auto ds = sim::generate_dataset(cfg.make_plant(), cfg.dataset_length, seed, cfg.dataset_sigma);
  const auto pe = data::check_pe(ds, cfg.t_ini, cfg.rank_tol);
  const Index heuristic = (cfg.m() + cfg.p() + 1) * (cfg.t_ini + 1);
  io::write_dataset_csv(out_path(cfg, "dataset.csv"), ds);
  json rep = header(cfg, seed);
  rep["length"] = ds.length();
  rep["t_ini"] = cfg.t_ini;
  rep["pe"] = io::pe_to_json(pe);
  rep["suggested_min_length"] = heuristic;
  io::write_json(out_path(cfg, "pe_report.json"), rep);
  std::cout << "dataset: " << ds.length() << " samples, stacked rank " << pe.stacked_rank
            << ", input Hankel rank " << pe.input_hankel_rank << " (need " << cfg.m() * (cfg.t_ini + 1)
            << ")\n";
  if (ds.length() < heuristic)
    std::cerr << "warning: fewer than " << heuristic << " samples; excitation may be marginal\n";
  if (!pe.satisfied) {
    std::cerr << "error: input is not persistently exciting of order " << pe.required_order << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

// -- build-model -------------------------------------------------------------

int cmd_build_model(const Common& opt, std::string dataset_path, std::optional<Index> t_ini) {
  auto cfg = load(opt);
  if (dataset_path.empty()) dataset_path = out_path(cfg, "dataset.csv");
  const auto ds = io::read_dataset_csv(dataset_path);
  const auto mdl = model::identify(ds, t_ini.value_or(cfg.t_ini), cfg.residual_tol);
  json j = io::model_to_json(mdl);
  j["config_hash"] = cfg.hash;
  io::write_json(out_path(cfg, "model.json"), j);
  std::cout << "model: t_ini " << mdl.t_ini() << ", relative residual " << mdl.residual() << "\n";
  return kExitOk;
}

// -- invariant-set -----------------------------------------------------------

void write_projection(const io::Config& cfg, const geometry::Polytope& set, Index t_ini, int dims) {
  // y_{t-1}, y_{t-2}, y_{t-3} of the first output channel.
  const Index y_last = cfg.m() * t_ini + cfg.p() * (t_ini - 1);
  std::vector<Index> idx;
  std::vector<std::string> names;
  for (int k = 0; k < dims; ++k) {
    idx.push_back(y_last - k * cfg.p());
    names.push_back("y_t-" + std::to_string(k + 1));
  }
  const auto proj = geometry::project(set, idx);
  const auto pts = dims == 2 ? geometry::vertices_2d(proj) : geometry::vertices_3d(proj);
  io::write_vertices_csv(out_path(cfg, "projection_" + std::to_string(dims) + "d.csv"), pts, names);
}

int cmd_invariant_set(const Common& opt, const std::string& model_path) {
  auto cfg = load(opt);
  const auto mdl = load_model(model_path.empty() ? out_path(cfg, "model.json") : model_path, cfg);
  const auto u_set = geometry::tighten(cfg.u_set(), cfg.input_margin);
  const auto rep = geometry::invariant_set(cfg.ambient(), mdl, u_set, cfg.max_iter, cfg.set_tol,
                                           [](int k, Index rows) {
                                             std::cerr << "iteration " << k << ": " << rows << " rows\n";
                                           });
  json set = io::polytope_to_json(rep.set);
  set["config_hash"] = cfg.hash;
  io::write_json(out_path(cfg, "safe_set.json"), set);
  json r = header(cfg, 0);
  r.erase("seed");
  r["converged"] = rep.converged;
  r["iterations"] = rep.iterations;
  r["rows"] = rep.set.num_rows();
  r["per_iteration_rows"] = rep.per_iteration_constraint_counts;
  r["input_margin"] = cfg.input_margin;
  r["contained_in_ambient"] = geometry::is_subset(rep.set, cfg.ambient(), cfg.set_tol);
  io::write_json(out_path(cfg, "invariant_report.json"), r);
  write_projection(cfg, rep.set, mdl.t_ini(), 2);
  if (mdl.t_ini() >= 3) write_projection(cfg, rep.set, mdl.t_ini(), 3);
  std::cout << "safe set: " << rep.set.num_rows() << " rows after " << rep.iterations
            << " iterations" << (rep.converged ? "" : " (not converged)") << "\n";
  return rep.converged ? kExitOk : kExitNotConverged;
}

// -- simulate ----------------------------------------------------------------

int cmd_simulate(const Common& opt, const std::string& model_path, const std::string& set_path,
                 std::optional<double> lambda_min) {
  auto cfg = load(opt);
  if (lambda_min) cfg.lambda_min = *lambda_min;
  if (opt.seed) cfg.scenario_seed = *opt.seed;
  const auto mdl = load_model(model_path.empty() ? out_path(cfg, "model.json") : model_path, cfg);
  const auto set = load_set(set_path.empty() ? out_path(cfg, "safe_set.json") : set_path, cfg);
  auto fcfg = cfg.filter_config();
  fcfg.validate(cfg.m());
  auto plant = cfg.make_plant();
  sim::ClosedLoopOptions clo;
  clo.sample_time = cfg.sample_time;
  const model::ExtendedState xi0(Vec::Zero((cfg.m() + cfg.p()) * mdl.t_ini()), cfg.m(), cfg.p(),
                                 mdl.t_ini());
  auto log = sim::run_closed_loop(plant, mdl, set, fcfg, cfg.schedule(), cfg.steps, xi0, clo);
  log.seed = cfg.scenario_seed;
  log.config_hash = cfg.hash;
  io::write_text(out_path(cfg, "simlog.csv"), io::simlog_csv(log, cfg.m(), cfg.p()));
  const auto s = sim::summarize(log);
  json j = header(cfg, log.seed);
  j["lambda_min"] = cfg.lambda_min;
  j["beta"] = cfg.beta;
  j["summary"] = io::summary_to_json(s);
  j["message"] = log.message;
  io::write_json(out_path(cfg, "summary.json"), j);
  std::cout << "simulate: " << s.outcome << ", " << s.steps << " steps, max|y| " << s.max_abs_y
            << ", max|u| " << s.max_abs_u << ", min h " << s.min_h << ", first intervention "
            << s.first_intervention << "\n";
  if (!log.ok()) {
    std::cerr << "error: " << log.message << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

// -- verify ------------------------------------------------------------------

constexpr double kEquivalenceTol = 1e-6;

int cmd_verify(const Common& opt, const std::string& model_path, const std::string& set_path) {
  auto cfg = load(opt);
  if (opt.seed) cfg.verify_seed = *opt.seed;
  const auto mdl = load_model(model_path.empty() ? out_path(cfg, "model.json") : model_path, cfg);
  const auto set = load_set(set_path.empty() ? out_path(cfg, "safe_set.json") : set_path, cfg);
  const auto ambient = cfg.ambient();
  const auto u_set = cfg.u_set();

  const bool contained = geometry::is_subset(set, ambient, cfg.set_tol);
  const auto inv = filter::sampled_invariance(mdl, set, u_set, cfg.verify_samples, cfg.verify_seed);
  const auto sign = filter::sign_conditions(set, cfg.verify_samples, cfg.verify_boundary,
                                            cfg.verify_exterior, cfg.verify_seed + 1);
  const auto eq = filter::mpsf_equivalence(mdl, ambient, u_set, set, cfg.equivalence_samples,
                                           cfg.verify_seed + 2);
  const bool eq_ok = cfg.equivalence_samples == 0 || eq.passed(kEquivalenceTol);

  json j = header(cfg, cfg.verify_seed);
  j["contained_in_ambient"] = {{"passed", contained}};
  j["invariance"] = {{"passed", inv.passed()}, {"samples", inv.samples}, {"failures", inv.failures}};
  j["sign_conditions"] = {{"passed", sign.passed()},
                          {"interior", sign.interior},
                          {"interior_failures", sign.interior_failures},
                          {"boundary", sign.boundary},
                          {"boundary_failures", sign.boundary_failures},
                          {"boundary_max_abs_h", sign.boundary_max_abs_h},
                          {"exterior", sign.exterior},
                          {"exterior_failures", sign.exterior_failures}};
  j["mpsf_equivalence"] = {{"passed", eq_ok},
                           {"samples", eq.samples},
                           {"solver_failures", eq.solver_failures},
                           {"max_deviation", eq.max_deviation},
                           {"tolerance", kEquivalenceTol}};
  const bool all = contained && inv.passed() && sign.passed() && eq_ok;
  j["passed"] = all;
  io::write_json(out_path(cfg, "verify_report.json"), j);
  std::cout << "containment " << (contained ? "pass" : "FAIL") << ", invariance "
            << (inv.passed() ? "pass" : "FAIL") << " (" << inv.failures << "/" << inv.samples
            << " failures), sign " << (sign.passed() ? "pass" : "FAIL") << ", equivalence "
            << (eq_ok ? "pass" : "FAIL") << " (max deviation " << eq.max_deviation << ")\n";
  return all ? kExitOk : kExitNumerical;
}

// -- filter-batch ------------------------------------------------------------

int cmd_filter_batch(const Common& opt, const std::string& model_path, const std::string& set_path,
                     const std::string& input_path, std::optional<double> lambda_min) {
  auto cfg = load(opt);
  if (lambda_min) cfg.lambda_min = *lambda_min;
  const auto mdl = load_model(model_path.empty() ? out_path(cfg, "model.json") : model_path, cfg);
  const auto set = load_set(set_path.empty() ? out_path(cfg, "safe_set.json") : set_path, cfg);
  auto fcfg = cfg.filter_config();
  fcfg.validate(cfg.m());
  const Index n = mdl.a_e().rows();
  const auto rows = io::read_csv_numbers(input_path, nullptr);
  json results = json::array();
  bool all_ok = true;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(static_cast<Index>(rows[r].size()) == n + cfg.m(), ErrorCode::IoError,
            input_path + ": each row needs dim(xi) + m values");
    Vec xi(n);
    Vec ul(cfg.m());
    for (Index i = 0; i < n; ++i) xi[i] = rows[r][static_cast<std::size_t>(i)];
    for (Index i = 0; i < cfg.m(); ++i) ul[i] = rows[r][static_cast<std::size_t>(n + i)];
    const auto res = filter::cbf_filter(mdl, set, fcfg, xi, ul);
    all_ok = all_ok && res.optimal();
    results.push_back(io::filter_result_to_json(res));
  }
  json j = header(cfg, 0);
  j.erase("seed");
  j["lambda_min"] = cfg.lambda_min;
  j["results"] = std::move(results);
  io::write_json(out_path(cfg, "filter_results.json"), j);
  std::cout << "filter-batch: " << rows.size() << " rows" << (all_ok ? "" : ", some infeasible") << "\n";
  return all_ok ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Input-output control barrier function toolkit"};
  app.require_subcommand(1);
  Common opt;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "Config file (JSON); built-in example if omitted")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the seed used by this command");
    sub->add_option("--out", opt.out, "Output directory (overrides output_dir)");
  };

  auto* gen = app.add_subcommand("generate-data", "Record an excitation trajectory and its rank report");
  add_common(gen);

  std::string dataset_path;
  Index t_ini = 0;
  auto* build = app.add_subcommand("build-model", "Fit the extended-state model from a dataset");
  add_common(build);
  build->add_option("--dataset", dataset_path, "Dataset CSV (default <out>/dataset.csv)");
  auto* t_ini_opt = build->add_option("--t-ini", t_ini, "History length (default from config)");

  std::string model_path;
  std::string set_path;
  std::string input_path;
  double lambda_min = 1.0;
  auto* inv = app.add_subcommand("invariant-set", "Compute the controlled invariant safe set");
  add_common(inv);
  inv->add_option("--model", model_path, "Model JSON (default <out>/model.json)");

  auto* sim = app.add_subcommand("simulate", "Run the filtered closed loop on the configured scenario");
  add_common(sim);
  sim->add_option("--model", model_path, "Model JSON (default <out>/model.json)");
  sim->add_option("--set", set_path, "Safe set JSON (default <out>/safe_set.json)");
  auto* lm_sim = sim->add_option("--lambda-min", lambda_min, "Override filter.lambda_min");

  auto* ver = app.add_subcommand("verify", "Sampled invariance, sign and equivalence checks");
  add_common(ver);
  ver->add_option("--model", model_path, "Model JSON (default <out>/model.json)");
  ver->add_option("--set", set_path, "Safe set JSON (default <out>/safe_set.json)");

  auto* batch = app.add_subcommand("filter-batch", "Filter rows of (xi, u_nominal) read from CSV");
  add_common(batch);
  batch->add_option("--model", model_path, "Model JSON (default <out>/model.json)");
  batch->add_option("--set", set_path, "Safe set JSON (default <out>/safe_set.json)");
  batch->add_option("--input", input_path, "CSV with a header and rows xi_0..xi_n-1,u_0..")
      ->required();
  auto* lm_batch = batch->add_option("--lambda-min", lambda_min, "Override filter.lambda_min");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  for (auto* sub : app.get_subcommands())
    if (sub->count("--seed") > 0) opt.seed = seed;

  try {
    if (gen->parsed()) return cmd_generate_data(opt);
    if (build->parsed())
      return cmd_build_model(opt, dataset_path,
                             t_ini_opt->count() ? std::optional<Index>(t_ini) : std::nullopt);
    if (inv->parsed()) return cmd_invariant_set(opt, model_path);
    if (sim->parsed())
      return cmd_simulate(opt, model_path, set_path,
                          lm_sim->count() ? std::optional<double>(lambda_min) : std::nullopt);
    if (ver->parsed()) return cmd_verify(opt, model_path, set_path);
    if (batch->parsed())
      return cmd_filter_batch(opt, model_path, set_path, input_path,
                              lm_batch->count() ? std::optional<double>(lambda_min) : std::nullopt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitInvalid;
}
