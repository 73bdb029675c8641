#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "itpi/deflection.hpp"
#include "itpi/geometry.hpp"
#include "itpi/propagator.hpp"
#include "itpi/significance.hpp"

namespace itpi::io {

using json = nlohmann::json;

// 17 significant digits round-trips every double.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size())
    throw Error(ErrorCode::io, "line " + std::to_string(line) + ": not a number: '" + s + "'");
  return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

inline void write_path_csv(std::ostream& os, const PiecewisePath& path) {
  static const char* axes[] = {"x", "y", "z"};
  os << "t";
  for (int d = 0; d < path.dim(); ++d) os << ',' << axes[d];
  os << '\n';
  for (const auto& v : path.vertices()) {
    os << fmt(v.t);
    for (int d = 0; d < v.dim; ++d) os << ',' << fmt(v.x[d]);
    os << '\n';
  }
}

// Strictly decreasing time marks the tagged time-reversed form.
inline PiecewisePath read_path_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::io, "empty path file");
  const auto header = split_csv(line);
  static const std::vector<std::vector<std::string>> valid = {
      {"t", "x"}, {"t", "x", "y"}, {"t", "x", "y", "z"}};
  bool ok = false;
  for (const auto& h : valid) ok = ok || h == header;
  if (!ok) throw Error(ErrorCode::io, "path header must be t,x[,y[,z]]");
  const int dim = static_cast<int>(header.size()) - 1;
  std::vector<SpacetimePoint> v;
  std::size_t n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (static_cast<int>(cells.size()) != dim + 1)
      throw Error(ErrorCode::io, "line " + std::to_string(n) + ": expected " + std::to_string(dim + 1) + " columns");
    SpacetimePoint p;
    p.dim = dim;
    p.t = parse_double(cells[0], n);
    for (int d = 0; d < dim; ++d) p.x[d] = parse_double(cells[static_cast<std::size_t>(d) + 1], n);
    v.push_back(p);
  }
  const bool reversed = v.size() >= 2 && v[1].t < v[0].t;
  return PiecewisePath(std::move(v), reversed);
}

inline json path_to_json(const PiecewisePath& path) {
  json verts = json::array();
  for (const auto& v : path.vertices()) {
    json row = json::array({v.t});
    for (int d = 0; d < v.dim; ++d) row.push_back(v.x[d]);
    verts.push_back(row);
  }
  return {{"dim", path.dim()}, {"time_reversed", path.time_reversed()}, {"vertices", verts}};
}

inline PiecewisePath path_from_json(const json& j) {
  try {
    const int dim = j.at("dim").get<int>();
    if (dim < 1 || dim > 3) throw Error(ErrorCode::io, "dim must be 1, 2 or 3");
    std::vector<SpacetimePoint> v;
    for (const auto& row : j.at("vertices")) {
      if (static_cast<int>(row.size()) != dim + 1) throw Error(ErrorCode::io, "vertex width does not match dim");
      SpacetimePoint p;
      p.dim = dim;
      p.t = row[0].get<double>();
      for (int d = 0; d < dim; ++d) p.x[d] = row[static_cast<std::size_t>(d) + 1].get<double>();
      v.push_back(p);
    }
    return PiecewisePath(std::move(v), j.value("time_reversed", false));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::io, e.what());
  }
}

inline void write_ensemble_csv(std::ostream& os, const PathEnsemble& ens) {
  os << "path_id,tau,weight\n";
  for (std::size_t i = 0; i < ens.size(); ++i)
    os << i << ',' << fmt(ens.internal_times()[i]) << ',' << fmt(ens.weights()[i]) << '\n';
}

inline PathEnsemble read_ensemble_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || split_csv(line) != std::vector<std::string>{"path_id", "tau", "weight"})
    throw Error(ErrorCode::io, "ensemble header must be path_id,tau,weight");
  std::vector<double> taus, weights;
  std::size_t n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != 3) throw Error(ErrorCode::io, "line " + std::to_string(n) + ": expected 3 columns");
    taus.push_back(parse_double(cells[1], n));
    weights.push_back(parse_double(cells[2], n));
  }
  return PathEnsemble::from_internal_times(std::move(taus), std::move(weights));
}

inline void write_field_csv(std::ostream& os, const AmplitudeField& f) {
  const bool se = !f.standard_error.empty();
  os << "site_index,x,re,im,prob" << (se ? ",stderr" : "") << '\n';
  for (std::size_t j = 0; j < f.values.size(); ++j) {
    os << j << ',' << fmt(f.x[j]) << ',' << fmt(f.values[j].real()) << ',' << fmt(f.values[j].imag()) << ','
       << fmt(std::norm(f.values[j]));
    if (se) os << ',' << fmt(f.standard_error[j]);
    os << '\n';
  }
}

inline json field_to_json(const AmplitudeField& f) {
  json sites = json::array();
  for (std::size_t j = 0; j < f.values.size(); ++j) {
    json s = {{"site_index", j}, {"x", f.x[j]}, {"re", f.values[j].real()}, {"im", f.values[j].imag()},
              {"prob", std::norm(f.values[j])}};
    if (!f.standard_error.empty()) s["stderr"] = f.standard_error[j];
    sites.push_back(s);
  }
  return {{"total_time", f.total_time}, {"sites", sites}};
}

inline json normalization_to_json(const LatticeNormalization& n) {
  return {{"row_factor", n.row_factor},
          {"global_scale", n.global_scale},
          {"kernel_modulus", n.kernel_modulus},
          {"mass_over_hbar_eff", n.mass_over_hbar_eff},
          {"overridden", n.overridden},
          {"convention", "per-slice unit l2 norm of the free central hop row, then one least-squares constant "
                         "matching the free kernel modulus on the central half of the sites"}};
}

inline std::string join_flags(const std::vector<std::string>& flags) {
  std::string s;
  for (const auto& f : flags) s += (s.empty() ? "" : ";") + f;
  return s;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "Q,D,u,delta_alpha,delta_alpha_num,delta_alpha_C,delta_alpha_C_num,difference,first_order_difference,flags\n";
  for (const auto& r : rows) {
    const auto& d = r.result;
    os << fmt(r.Q) << ',' << fmt(r.D) << ',' << fmt(r.u) << ',';
    if (!r.error.empty()) {
      os << ",,,,,,\"error: " << r.error << "\"\n";
      continue;
    }
    os << fmt(d.delta_alpha_analytic) << ',' << fmt(d.delta_alpha_numeric) << ',' << fmt(d.delta_alpha_C_analytic)
       << ',' << fmt(d.delta_alpha_C_numeric) << ',' << fmt(d.difference_numeric) << ',' << fmt(d.difference_analytic)
       << ',' << join_flags(d.flags) << '\n';
  }
}

inline json sweep_to_json(const std::vector<SweepRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json j = {{"Q", r.Q}, {"D", r.D}, {"u", r.u}};
    if (!r.error.empty()) {
      j["error"] = r.error;
    } else {
      const auto& d = r.result;
      j.update({{"delta_alpha", d.delta_alpha_analytic},
                {"delta_alpha_num", d.delta_alpha_numeric},
                {"delta_alpha_num_error", d.delta_alpha_numeric_error},
                {"delta_alpha_C", d.delta_alpha_C_analytic},
                {"delta_alpha_C_num", d.delta_alpha_C_numeric},
                {"delta_alpha_C_num_error", d.delta_alpha_C_numeric_error},
                {"difference", d.difference_numeric},
                {"first_order_difference", d.difference_analytic},
                {"speed_drift", d.extremal.speed_drift},
                {"max_transverse_acceleration", d.extremal.max_transverse_acceleration},
                {"radiated_fraction", d.extremal.radiated_fraction},
                {"flags", d.flags}});
    }
    out.push_back(j);
  }
  return out;
}

// Write through a sibling temporary and rename into place.
inline void atomic_write(const std::filesystem::path& target, const std::string& content) {
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorCode::io, "cannot open " + tmp.string());
    os << content;
    os.flush();
    if (!os) throw Error(ErrorCode::io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw Error(ErrorCode::io, "rename to " + target.string() + " failed: " + ec.message());
}

}  // namespace itpi::io
