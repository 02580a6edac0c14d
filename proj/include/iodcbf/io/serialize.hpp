#pragma once

// JSON for structured artifacts, CSV for time series and vertex lists.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "iodcbf/data/dataset.hpp"
#include "iodcbf/filter/filter.hpp"
#include "iodcbf/geometry/operations.hpp"
#include "iodcbf/model/model.hpp"
#include "iodcbf/sim/closed_loop.hpp"

namespace iodcbf::io {

using json = nlohmann::ordered_json;

inline json to_json(const Vec& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json to_json(const Mat& m) {
  json a = json::array();
  for (Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vec(m.row(i).transpose())));
  return a;
}

/// Non-finite values have no JSON spelling; they are written as null.
inline json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline Vec vec_from_json(const json& j, const std::string& what) {
  require(j.is_array(), ErrorCode::ConfigError, what + ": expected an array of numbers");
  Vec v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_number(), ErrorCode::ConfigError, what + ": expected numbers");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline Mat mat_from_json(const json& j, const std::string& what) {
  require(j.is_array() && !j.empty(), ErrorCode::ConfigError, what + ": expected a nonempty matrix");
  const Vec first = vec_from_json(j[0], what);
  Mat m(static_cast<Index>(j.size()), first.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vec row = vec_from_json(j[i], what);
    require(row.size() == first.size(), ErrorCode::ConfigError, what + ": ragged matrix");
    m.row(static_cast<Index>(i)) = row.transpose();
  }
  return m;
}

// -- files -------------------------------------------------------------------

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path);
  out << text;
  require(static_cast<bool>(out), ErrorCode::IoError, "write failed for " + path);
}

inline json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// Shortest decimal form that reads back to the same double.
inline std::string fmt(double x) {
  std::ostringstream ss;
  ss << std::setprecision(17) << x;
  return ss.str();
}

// -- polytope ----------------------------------------------------------------

inline json polytope_to_json(const geometry::Polytope& p) {
  json rows = json::array();
  for (Index i = 0; i < p.num_rows(); ++i) {
    json r = to_json(Vec(p.lhs().row(i).transpose()));
    r.push_back(p.rhs()[i]);
    rows.push_back(std::move(r));
  }
  return {{"dim", p.dim()}, {"rows", rows}, {"normalized", p.normalized()}, {"empty", p.empty_flag()}};
}

inline geometry::Polytope polytope_from_json(const json& j) {
  require(j.is_object() && j.contains("dim") && j.contains("rows"), ErrorCode::ConfigError,
          "polytope: expected {dim, rows}");
  const auto dim = j.at("dim").get<Index>();
  require(dim > 0, ErrorCode::ConfigError, "polytope: dim must be positive");
  if (j.value("empty", false)) return geometry::Polytope::make_empty(dim);
  const auto& rows = j.at("rows");
  require(rows.is_array(), ErrorCode::ConfigError, "polytope: rows must be an array");
  Mat h(static_cast<Index>(rows.size()), dim);
  Vec c(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Vec r = vec_from_json(rows[i], "polytope row");
    require(r.size() == dim + 1, ErrorCode::ConfigError, "polytope: row length must be dim + 1");
    h.row(static_cast<Index>(i)) = r.head(dim).transpose();
    c[static_cast<Index>(i)] = r[dim];
  }
  geometry::Polytope p(std::move(h), std::move(c));
  p.mark_normalized(j.value("normalized", false));
  return p;
}

// -- model -------------------------------------------------------------------

inline json model_to_json(const model::DataDrivenModel& m) {
  return {{"m", m.m()}, {"p", m.p()}, {"t_ini", m.t_ini()}, {"r", to_json(m.r())},
          {"residual", m.residual()}};
}

inline model::DataDrivenModel model_from_json(const json& j) {
  require(j.is_object(), ErrorCode::ConfigError, "model: expected an object");
  return model::build_extended_dynamics(mat_from_json(j.at("r"), "model r"), j.at("m").get<Index>(),
                                        j.at("p").get<Index>(), j.at("t_ini").get<Index>(),
                                        j.value("residual", 0.0));
}

inline json pe_to_json(const data::PeReport& r) {
  return {{"stacked_rank", r.stacked_rank},
          {"input_hankel_rank", r.input_hankel_rank},
          {"required_order", r.required_order},
          {"satisfied", r.satisfied}};
}

inline json filter_result_to_json(const filter::FilterResult& r) {
  return {{"status", std::string(numkit::to_string(r.status))},
          {"u_safe", r.optimal() ? to_json(r.u_safe) : json(nullptr)},
          {"lambda", number(r.lambda)},
          {"h_before", number(r.h_before)},
          {"h_after_predicted", number(r.h_after_predicted)},
          {"objective", number(r.objective)},
          {"iterations", r.iterations}};
}

inline json summary_to_json(const sim::SimSummary& s) {
  return {{"outcome", s.outcome},
          {"steps", s.steps},
          {"max_abs_y", s.max_abs_y},
          {"max_abs_u", s.max_abs_u},
          {"min_h", number(s.min_h)},
          {"infeasible_count", s.infeasible_count},
          {"violation_count", s.violation_count},
          {"intervention_count", s.intervention_count},
          {"first_intervention", s.first_intervention},
          {"max_prediction_error", s.max_prediction_error}};
}

// -- CSV ---------------------------------------------------------------------

inline std::vector<std::vector<double>> read_csv_numbers(const std::string& path,
                                                         std::vector<std::string>* header) {
  std::istringstream in(read_text(path));
  std::string line;
  std::vector<std::vector<double>> rows;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (first) {
      first = false;
      if (header) *header = cells;
      continue;
    }
    std::vector<double> vals;
    for (const auto& c : cells) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      require(used == c.size() && used > 0, ErrorCode::IoError,
              path + ": non-numeric cell '" + c + "'");
      vals.push_back(v);
    }
    rows.push_back(std::move(vals));
  }
  return rows;
}

/// Columns t, u_0.., y_0..
inline void write_dataset_csv(const std::string& path, const data::TrajectoryDataset& ds) {
  std::ostringstream out;
  out << "t";
  for (Index i = 0; i < ds.m(); ++i) out << ",u_" << i;
  for (Index i = 0; i < ds.p(); ++i) out << ",y_" << i;
  out << "\n";
  for (Index t = 0; t < ds.length(); ++t) {
    out << t;
    for (Index i = 0; i < ds.m(); ++i) out << ',' << fmt(ds.inputs()[t][i]);
    for (Index i = 0; i < ds.p(); ++i) out << ',' << fmt(ds.outputs()[t][i]);
    out << "\n";
  }
  write_text(path, out.str());
}

inline data::TrajectoryDataset read_dataset_csv(const std::string& path) {
  std::vector<std::string> header;
  const auto rows = read_csv_numbers(path, &header);
  Index m = 0;
  Index p = 0;
  for (const auto& h : header) {
    if (h.rfind("u_", 0) == 0) ++m;
    if (h.rfind("y_", 0) == 0) ++p;
  }
  require(!header.empty() && header[0] == "t" && m > 0 && p > 0 &&
              static_cast<Index>(header.size()) == 1 + m + p,
          ErrorCode::IoError, path + ": expected header t,u_0..,y_0..");
  std::vector<Vec> us;
  std::vector<Vec> ys;
  for (const auto& r : rows) {
    require(static_cast<Index>(r.size()) == 1 + m + p, ErrorCode::IoError, path + ": ragged row");
    Vec u(m);
    Vec y(p);
    for (Index i = 0; i < m; ++i) u[i] = r[static_cast<std::size_t>(1 + i)];
    for (Index i = 0; i < p; ++i) y[i] = r[static_cast<std::size_t>(1 + m + i)];
    us.push_back(std::move(u));
    ys.push_back(std::move(y));
  }
  require(!us.empty(), ErrorCode::InsufficientData, path + ": no samples");
  return data::TrajectoryDataset(std::move(us), std::move(ys));
}

/// One row per step: step, time_s, u_nominal_*, u_applied_*, y_*, h, lambda,
/// qp_status, violation.
inline std::string simlog_csv(const sim::SimLog& log, Index m, Index p) {
  std::ostringstream out;
  out << "step,time_s";
  for (Index i = 0; i < m; ++i) out << ",u_nominal_" << i;
  for (Index i = 0; i < m; ++i) out << ",u_applied_" << i;
  for (Index i = 0; i < p; ++i) out << ",y_" << i;
  out << ",h,lambda,qp_status,violation\n";
  auto cells = [&](const Vec& v, Index n) {
    for (Index i = 0; i < n; ++i) out << ',' << (i < v.size() ? fmt(v[i]) : std::string("nan"));
  };
  for (const auto& r : log.rows) {
    out << r.step << ',' << fmt(r.time_s);
    cells(r.u_nominal, m);
    cells(r.u_applied, m);
    cells(r.y, p);
    out << ',' << fmt(r.h) << ',' << fmt(r.lambda) << ',' << numkit::to_string(r.qp_status) << ','
        << (r.violation ? 1 : 0) << "\n";
  }
  return out.str();
}

inline void write_vertices_csv(const std::string& path, const std::vector<Vec>& pts,
                               const std::vector<std::string>& names) {
  std::ostringstream out;
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << "\n";
  for (const auto& x : pts) {
    for (Index i = 0; i < x.size(); ++i) out << (i ? "," : "") << fmt(x[i]);
    out << "\n";
  }
  write_text(path, out.str());
}

}  // namespace iodcbf::io
