#pragma once

// Versioned run configuration. Every object is checked for unknown keys so a
// typo fails loudly instead of silently falling back to a default.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "iodcbf/filter/filter.hpp"
#include "iodcbf/geometry/polytope.hpp"
#include "iodcbf/io/serialize.hpp"
#include "iodcbf/sim/closed_loop.hpp"
#include "iodcbf/sim/plant.hpp"

namespace iodcbf::io {

inline constexpr int kConfigVersion = 1;

struct PlantSpec {
  Mat a;
  Mat b;
  Mat c;
  Index input_delay = 0;
};

struct SegmentSpec {
  Index start = 0;
  Index end = 0;
  std::string type;  // "random", "feedback" or "constant"
  Index hold_steps = 1;
  double amplitude = 1.0;
  std::optional<std::uint64_t> seed;
  Mat gain;
  Vec value;
};

struct Config {
  PlantSpec plant;
  Index t_ini = 5;

  Index dataset_length = 17;
  std::uint64_t dataset_seed = 7;
  double dataset_sigma = 1.0;
  std::optional<double> rank_tol;
  double residual_tol = model::kPredictorTolerance;

  Vec u_min;
  Vec u_max;
  Vec y_min;
  Vec y_max;

  double lambda_min = 1.0;
  double beta = filter::kDefaultBeta;
  double qp_tol = 1e-9;
  std::string row_scaling = "unit";  // "unit" or "none"

  int max_iter = 200;
  double set_tol = 1e-7;
  double input_margin = 1e-6;

  Index steps = 4000;
  double sample_time = 0.1;
  std::uint64_t scenario_seed = 1;
  std::vector<SegmentSpec> segments;

  Index verify_samples = 1000;
  Index verify_boundary = 100;
  Index verify_exterior = 1000;
  Index equivalence_samples = 100;
  std::uint64_t verify_seed = 11;

  std::string output_dir = "out";

  /// FNV-1a 64 of the canonical JSON form, as 16 hex digits.
  std::string hash;

  Index m() const { return plant.b.cols(); }
  Index p() const { return plant.c.rows(); }

  geometry::Polytope u_set() const { return geometry::box_polytope(u_min, u_max); }
  geometry::Polytope y_set() const { return geometry::box_polytope(y_min, y_max); }
  geometry::Polytope ambient() const {
    return geometry::extended_constraints(u_set(), y_set(), t_ini);
  }
  sim::StateSpacePlant make_plant() const {
    return sim::StateSpacePlant(plant.a, plant.b, plant.c, plant.input_delay);
  }

  filter::FilterConfig filter_config() const {
    filter::FilterConfig f;
    f.lambda_min = lambda_min;
    f.beta = beta;
    f.qp_tol = qp_tol;
    f.u_set = u_set();
    return f;
  }

  sim::NominalSchedule schedule() const {
    std::vector<sim::ScheduleSegment> out;
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const auto& s = segments[i];
      sim::ScheduleSegment seg;
      seg.start_step = s.start;
      seg.end_step = s.end;
      if (s.type == "random")
        seg.generator = sim::PiecewiseRandom{s.hold_steps, s.amplitude,
                                             s.seed.value_or(scenario_seed + i)};
      else if (s.type == "feedback")
        seg.generator = sim::StaticFeedback{s.gain};
      else
        seg.generator = sim::ConstantInput{s.value};
      out.push_back(std::move(seg));
    }
    return sim::NominalSchedule(std::move(out));
  }
};

inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return out;
}

namespace detail {

inline void only_keys(const json& j, const std::string& where, std::set<std::string> allowed) {
  require(j.is_object(), ErrorCode::ConfigError, where + ": expected an object");
  for (const auto& [key, _] : j.items())
    require(allowed.count(key) > 0, ErrorCode::ConfigError, where + ": unknown key '" + key + "'");
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, where + "." + key + ": " + e.what());
  }
}

inline Index get_index(const json& j, const std::string& key, const std::string& where,
                       Index fallback) {
  if (!j.contains(key)) return fallback;
  require(j.at(key).is_number_integer(), ErrorCode::ConfigError,
          where + "." + key + ": expected an integer");
  return j.at(key).get<Index>();
}

inline std::uint64_t get_seed(const json& j, const std::string& key, const std::string& where,
                              std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  require(j.at(key).is_number_unsigned() || (j.at(key).is_number_integer() && j.at(key).get<long long>() >= 0),
          ErrorCode::ConfigError, where + "." + key + ": expected a nonnegative integer");
  return j.at(key).get<std::uint64_t>();
}

inline Vec bound(const json& j, const std::string& key, Index n, double fallback) {
  if (!j.contains(key)) return Vec::Constant(n, fallback);
  const auto& v = j.at(key);
  if (v.is_number()) return Vec::Constant(n, v.get<double>());
  Vec out = vec_from_json(v, "constraints." + key);
  require(out.size() == n, ErrorCode::ConfigError, "constraints." + key + ": wrong length");
  return out;
}

}  // namespace detail

/// The delayed double-integrator example.
inline json default_config_json() {
  return json::parse(R"({
    "version": 1,
    "plant": {"a": [[1.0, 0.1], [0.0, 1.0]], "b": [[0.0], [0.1]], "c": [[1.0, 0.0]], "input_delay": 2},
    "t_ini": 5,
    "dataset": {"length": 17, "seed": 7, "sigma": 1.0},
    "constraints": {"u_min": -1.0, "u_max": 1.0, "y_min": -1.0, "y_max": 1.0},
    "filter": {"lambda_min": 1.0, "beta": 1000000.0, "qp_tol": 1e-9, "row_scaling": "unit"},
    "invariant_set": {"max_iter": 200, "tol": 1e-7, "input_margin": 1e-6},
    "scenario": {"steps": 4000, "sample_time": 0.1, "seed": 1, "segments": [
      {"start": 0, "end": 2000, "type": "random", "hold_steps": 20, "amplitude": 1.5},
      {"start": 2000, "end": 4000, "type": "feedback",
       "gain": [[0.05, 0.16, 0.15, 0.143, 0.13, 0.0, 0.0, -5.44, -5.16, 11.46]]}]},
    "verify": {"samples": 1000, "boundary": 100, "exterior": 1000, "equivalence_samples": 100, "seed": 11},
    "output_dir": "out"
  })");
}

inline Config parse_config(const json& j) {
  using detail::get;
  using detail::get_index;
  using detail::get_seed;
  detail::only_keys(j, "config", {"version", "plant", "t_ini", "dataset", "constraints", "filter",
                                  "invariant_set", "scenario", "verify", "output_dir"});
  require(j.contains("version") && j.at("version").is_number_integer() &&
              j.at("version").get<int>() == kConfigVersion,
          ErrorCode::ConfigError, "config: version must be " + std::to_string(kConfigVersion));
  require(j.contains("plant"), ErrorCode::ConfigError, "config: missing 'plant'");

  Config c;
  const auto& pj = j.at("plant");
  detail::only_keys(pj, "plant", {"a", "b", "c", "input_delay"});
  require(pj.contains("a") && pj.contains("b") && pj.contains("c"), ErrorCode::ConfigError,
          "plant: a, b and c are required");
  c.plant.a = mat_from_json(pj.at("a"), "plant.a");
  c.plant.b = mat_from_json(pj.at("b"), "plant.b");
  c.plant.c = mat_from_json(pj.at("c"), "plant.c");
  c.plant.input_delay = get_index(pj, "input_delay", "plant", 0);
  try {
    (void)c.make_plant();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, std::string("plant: ") + e.what());
  }

  c.t_ini = get_index(j, "t_ini", "config", c.t_ini);
  require(c.t_ini > 0, ErrorCode::ConfigError, "t_ini must be positive");

  const json empty = json::object();
  const auto& dj = j.value("dataset", empty);
  detail::only_keys(dj, "dataset", {"length", "seed", "sigma", "rank_tol", "residual_tol"});
  c.dataset_length = get_index(dj, "length", "dataset", c.dataset_length);
  c.dataset_seed = get_seed(dj, "seed", "dataset", c.dataset_seed);
  c.dataset_sigma = get(dj, "sigma", "dataset", c.dataset_sigma);
  if (dj.contains("rank_tol") && !dj.at("rank_tol").is_null())
    c.rank_tol = get(dj, "rank_tol", "dataset", 0.0);
  c.residual_tol = get(dj, "residual_tol", "dataset", c.residual_tol);
  require(c.dataset_length > 0 && c.dataset_sigma > 0.0 && c.residual_tol > 0.0,
          ErrorCode::ConfigError, "dataset: length, sigma and residual_tol must be positive");

  const auto& kj = j.value("constraints", empty);
  detail::only_keys(kj, "constraints", {"u_min", "u_max", "y_min", "y_max"});
  c.u_min = detail::bound(kj, "u_min", c.m(), -1.0);
  c.u_max = detail::bound(kj, "u_max", c.m(), 1.0);
  c.y_min = detail::bound(kj, "y_min", c.p(), -1.0);
  c.y_max = detail::bound(kj, "y_max", c.p(), 1.0);
  try {
    (void)c.u_set();
    (void)c.y_set();
  } catch (const Error& e) {
    throw Error(ErrorCode::BadBounds, std::string("constraints: ") + e.what());
  }

  const auto& fj = j.value("filter", empty);
  detail::only_keys(fj, "filter", {"lambda_min", "beta", "qp_tol", "row_scaling"});
  c.lambda_min = get(fj, "lambda_min", "filter", c.lambda_min);
  c.beta = get(fj, "beta", "filter", c.beta);
  c.qp_tol = get(fj, "qp_tol", "filter", c.qp_tol);
  c.row_scaling = get(fj, "row_scaling", "filter", c.row_scaling);
  require(c.row_scaling == "unit" || c.row_scaling == "none", ErrorCode::ConfigError,
          "filter.row_scaling must be 'unit' or 'none'");
  try {
    c.filter_config().validate(c.m());
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }

  const auto& ij = j.value("invariant_set", empty);
  detail::only_keys(ij, "invariant_set", {"max_iter", "tol", "input_margin"});
  c.max_iter = static_cast<int>(get_index(ij, "max_iter", "invariant_set", c.max_iter));
  c.set_tol = get(ij, "tol", "invariant_set", c.set_tol);
  c.input_margin = get(ij, "input_margin", "invariant_set", c.input_margin);
  require(c.max_iter > 0 && c.set_tol > 0.0 && c.input_margin >= 0.0, ErrorCode::ConfigError,
          "invariant_set: max_iter and tol must be positive, input_margin nonnegative");

  const auto& sj = j.value("scenario", empty);
  detail::only_keys(sj, "scenario", {"steps", "sample_time", "seed", "segments"});
  c.steps = get_index(sj, "steps", "scenario", c.steps);
  c.sample_time = get(sj, "sample_time", "scenario", c.sample_time);
  c.scenario_seed = get_seed(sj, "seed", "scenario", c.scenario_seed);
  require(c.steps >= 0 && c.sample_time > 0.0, ErrorCode::ConfigError,
          "scenario: steps must be nonnegative and sample_time positive");
  const json segs = sj.value("segments", json::array());
  require(segs.is_array(), ErrorCode::ConfigError, "scenario.segments: expected an array");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const std::string where = "scenario.segments[" + std::to_string(i) + "]";
    const auto& g = segs[i];
    detail::only_keys(g, where,
                      {"start", "end", "type", "hold_steps", "amplitude", "seed", "gain", "value"});
    SegmentSpec s;
    s.start = get_index(g, "start", where, -1);
    s.end = get_index(g, "end", where, -1);
    s.type = get<std::string>(g, "type", where, "");
    if (s.type == "random") {
      s.hold_steps = get_index(g, "hold_steps", where, 1);
      s.amplitude = get(g, "amplitude", where, 1.0);
      if (g.contains("seed")) s.seed = get_seed(g, "seed", where, 0);
    } else if (s.type == "feedback") {
      require(g.contains("gain"), ErrorCode::ConfigError, where + ": feedback needs 'gain'");
      s.gain = mat_from_json(g.at("gain"), where + ".gain");
      require(s.gain.rows() == c.m() && s.gain.cols() == (c.m() + c.p()) * c.t_ini,
              ErrorCode::ConfigError, where + ".gain must be m x (m + p) t_ini");
    } else if (s.type == "constant") {
      require(g.contains("value"), ErrorCode::ConfigError, where + ": constant needs 'value'");
      s.value = g.at("value").is_number() ? Vec::Constant(c.m(), g.at("value").get<double>())
                                          : vec_from_json(g.at("value"), where + ".value");
      require(s.value.size() == c.m(), ErrorCode::ConfigError, where + ".value must have m entries");
    } else {
      throw Error(ErrorCode::ConfigError, where + ": type must be random, feedback or constant");
    }
    c.segments.push_back(std::move(s));
  }
  try {
    const auto sched = c.schedule();
    require(c.steps <= sched.end_step(), ErrorCode::ConfigError,
            "scenario: segments cover " + std::to_string(sched.end_step()) + " steps, fewer than steps");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, std::string("scenario: ") + e.what());
  }

  const auto& vj = j.value("verify", empty);
  detail::only_keys(vj, "verify", {"samples", "boundary", "exterior", "equivalence_samples", "seed"});
  c.verify_samples = get_index(vj, "samples", "verify", c.verify_samples);
  c.verify_boundary = get_index(vj, "boundary", "verify", c.verify_boundary);
  c.verify_exterior = get_index(vj, "exterior", "verify", c.verify_exterior);
  c.equivalence_samples = get_index(vj, "equivalence_samples", "verify", c.equivalence_samples);
  c.verify_seed = get_seed(vj, "seed", "verify", c.verify_seed);
  require(c.verify_samples > 0 && c.verify_boundary >= 0 && c.verify_exterior >= 0 &&
              c.equivalence_samples >= 0,
          ErrorCode::ConfigError, "verify: sample counts must be nonnegative (samples positive)");

  c.output_dir = get<std::string>(j, "output_dir", "config", c.output_dir);
  // Keys sorted so that reordering a file does not change its hash.
  c.hash = fnv1a_hex(nlohmann::json::parse(j.dump()).dump());
  return c;
}

inline Config load_config(const std::string& path) { return parse_config(read_json(path)); }

}  // namespace iodcbf::io
