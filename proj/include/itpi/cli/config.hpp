#pragma once

// Run configuration for the command-line tool. One YAML file per scenario;
// every section is optional and validated before any computation. Unknown
// keys are errors so that typos never fall back to defaults silently.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "itpi/constants.hpp"
#include "itpi/deflection.hpp"
#include "itpi/error.hpp"
#include "itpi/geometry.hpp"
#include "itpi/inversion.hpp"
#include "itpi/monte_carlo.hpp"
#include "itpi/propagator.hpp"

namespace itpi::cli {

using json = nlohmann::json;

enum class PotentialKind { flat, uniform, weak_gravity, induced_coulomb };
enum class Method { transfer_matrix, monte_carlo };

struct PotentialConfig {
  PotentialKind kind = PotentialKind::flat;
  double phi0 = 0.0;
  double GM = 0.0;
  double Q = 0.0;
  double e = 1.0;
  double m_e = 1.0;
  double u = 0.0;
  Vec3 center{};
};

struct PropagateConfig {
  Method method = Method::transfer_matrix;
  LatticeSpec lattice;
  SamplerSpec sampler;
  double boost_u = 0.0;  // evaluate with omega_u instead of omega_0
  std::optional<LatticeNormalization> normalization;
};

struct InvertConfig {
  std::string path_file;
  InversionPolicy policy;
};

struct DeflectConfig {
  CoulombExperiment experiment;
  std::vector<double> Q, D, u;  // empty axes fall back to the single experiment value
  StepControl control;
};

struct SignificanceConfig {
  std::string ensemble_file;            // CSV of internal times and weights
  std::vector<std::string> path_files;  // or explicit paths sharing endpoints
  std::vector<double> weights;
};

struct InvarianceConfig {
  std::string path_file;
  std::vector<double> u{0.1, 0.3, 0.5, 0.7, 0.9};
  Vec3 direction{1.0, 0.0, 0.0};
};

struct RunConfig {
  UnitSystem units = UnitSystem::natural();
  InternalClock clock;
  PotentialConfig potential;
  double weak_field_bound = 1e-3;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string output_directory = ".";
  std::string format = "csv";
  PropagateConfig propagate;
  InvertConfig invert;
  DeflectConfig deflect;
  SignificanceConfig significance;
  InvarianceConfig invariance;
  std::filesystem::path base_directory;  // relative file names resolve here
  json echo = json::object();

  InducedMetric metric() const {
    const auto& k = units.constants;
    const auto& p = potential;
    switch (p.kind) {
      case PotentialKind::flat: return InducedMetric(UniformPotential{0.0}, k, weak_field_bound);
      case PotentialKind::uniform: return InducedMetric(UniformPotential{p.phi0}, k, weak_field_bound);
      case PotentialKind::weak_gravity: return InducedMetric(WeakGravity{p.GM, p.center}, k, weak_field_bound);
      case PotentialKind::induced_coulomb:
        return InducedMetric(InducedCoulomb{p.Q, p.e, p.m_e, p.u, p.center}, k, weak_field_bound);
    }
    return InducedMetric::flat(k);
  }

  std::filesystem::path resolve(const std::string& file) const {
    std::filesystem::path f(file);
    return f.is_absolute() ? f : base_directory / f;
  }
};

namespace detail {

inline void only_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node || node.IsNull()) return;
  if (!node.IsMap()) throw Error(ErrorCode::config, where + " must be a mapping");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) throw Error(ErrorCode::config, "unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  if (!node || node.IsNull() || !node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw Error(ErrorCode::config, where + "." + key + " has the wrong type");
  }
}

inline void read_vec3(const YAML::Node& node, const char* key, Vec3& out, const std::string& where) {
  if (!node || node.IsNull() || !node[key]) return;
  std::vector<double> v;
  read(node, key, v, where);
  if (v.empty() || v.size() > 3) throw Error(ErrorCode::config, where + "." + key + " needs 1 to 3 components");
  out = {};
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
}

template <class E>
E read_enum(const YAML::Node& node, const char* key, E fallback, const std::string& where,
            std::initializer_list<std::pair<const char*, E>> names) {
  if (!node || node.IsNull() || !node[key]) return fallback;
  std::string s;
  read(node, key, s, where);
  std::string options;
  for (const auto& [n, v] : names) {
    if (s == n) return v;
    options += (options.empty() ? "" : ", ") + std::string(n);
  }
  throw Error(ErrorCode::config, where + "." + key + " must be one of: " + options);
}

inline json to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Map: {
      json j = json::object();
      for (const auto& kv : n) j[kv.first.as<std::string>()] = to_json(kv.second);
      return j;
    }
    case YAML::NodeType::Sequence: {
      json j = json::array();
      for (const auto& v : n) j.push_back(to_json(v));
      return j;
    }
    case YAML::NodeType::Scalar: {
      const auto s = n.Scalar();
      if (n.Tag() == "!") return s;  // quoted
      try {
        std::size_t used = 0;
        const long long i = std::stoll(s, &used);
        if (used == s.size()) return i;
      } catch (const std::exception&) {
      }
      try {
        std::size_t used = 0;
        const double d = std::stod(s, &used);
        if (used == s.size()) return d;
      } catch (const std::exception&) {
      }
      if (s == "true") return true;
      if (s == "false") return false;
      return s;
    }
    default: return nullptr;
  }
}

}  // namespace detail

inline RunConfig parse_config(const YAML::Node& root, const std::filesystem::path& base = ".") {
  using detail::only_keys;
  using detail::read;
  RunConfig c;
  c.base_directory = base;
  if (!root || root.IsNull()) return c;
  only_keys(root, "config", {"units", "constants", "clock", "potential", "weak_field_bound", "seed", "workers",
                             "output", "propagate", "invert", "deflect", "significance", "invariance"});
  c.echo = detail::to_json(root);

  const auto tag = detail::read_enum(root, "units", UnitTag::natural, "config",
                                     {{"natural", UnitTag::natural}, {"si", UnitTag::si}});
  if (tag == UnitTag::si) {
    c.units = UnitSystem::si();
    if (root["constants"]) throw Error(ErrorCode::config, "constants are fixed by CODATA in SI units");
  } else {
    const auto k = root["constants"];
    only_keys(k, "constants", {"k_e", "G"});
    double k_e = 1.0, G = 1.0;
    read(k, "k_e", k_e, "constants");
    read(k, "G", G, "constants");
    c.units = UnitSystem::natural(k_e, G);
  }
  c.units.validate();

  const auto clock = root["clock"];
  only_keys(clock, "clock", {"rest_mass", "alpha"});
  read(clock, "rest_mass", c.clock.rest_mass, "clock");
  read(clock, "alpha", c.clock.alpha, "clock");
  c.clock.validate();

  const auto pot = root["potential"];
  only_keys(pot, "potential", {"kind", "phi0", "GM", "Q", "e", "m_e", "u", "center"});
  c.potential.kind = detail::read_enum(pot, "kind", PotentialKind::flat, "potential",
                                       {{"flat", PotentialKind::flat},
                                        {"uniform", PotentialKind::uniform},
                                        {"weak_gravity", PotentialKind::weak_gravity},
                                        {"induced_coulomb", PotentialKind::induced_coulomb}});
  read(pot, "phi0", c.potential.phi0, "potential");
  read(pot, "GM", c.potential.GM, "potential");
  read(pot, "Q", c.potential.Q, "potential");
  read(pot, "e", c.potential.e, "potential");
  read(pot, "m_e", c.potential.m_e, "potential");
  read(pot, "u", c.potential.u, "potential");
  detail::read_vec3(pot, "center", c.potential.center, "potential");
  read(root, "weak_field_bound", c.weak_field_bound, "config");
  long long seed = 0;
  read(root, "seed", seed, "config");
  if (seed < 0) throw Error(ErrorCode::config, "seed must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);
  int workers = 1;
  read(root, "workers", workers, "config");
  if (workers < 1) throw Error(ErrorCode::config, "workers must be at least 1");
  c.workers = static_cast<unsigned>(workers);
  try {
    (void)c.metric();
  } catch (const Error& e) {
    throw Error(ErrorCode::config, std::string("potential: ") + e.what());
  }

  const auto out = root["output"];
  only_keys(out, "output", {"directory", "format"});
  read(out, "directory", c.output_directory, "output");
  read(out, "format", c.format, "output");
  if (c.format != "csv" && c.format != "json") throw Error(ErrorCode::config, "output.format must be csv or json");

  const auto prop = root["propagate"];
  only_keys(prop, "propagate", {"method", "lattice", "sampler", "boost_u", "normalization"});
  auto& P = c.propagate;
  P.method = detail::read_enum(prop, "method", Method::transfer_matrix, "propagate",
                               {{"transfer_matrix", Method::transfer_matrix}, {"monte_carlo", Method::monte_carlo}});
  read(prop, "boost_u", P.boost_u, "propagate");
  const auto lat = prop ? prop["lattice"] : YAML::Node();
  only_keys(lat, "propagate.lattice",
            {"n_slices", "dt", "total_time", "x_min", "x_max", "n_sites", "source_x", "t0", "hop_rule", "edge_taper"});
  auto& L = P.lattice;
  read(lat, "n_slices", L.n_slices, "propagate.lattice");
  read(lat, "x_min", L.x_min, "propagate.lattice");
  read(lat, "x_max", L.x_max, "propagate.lattice");
  read(lat, "n_sites", L.n_sites, "propagate.lattice");
  read(lat, "source_x", L.source_x, "propagate.lattice");
  read(lat, "t0", L.t0, "propagate.lattice");
  read(lat, "edge_taper", L.edge_taper, "propagate.lattice");
  const bool has_lat = lat && lat.IsMap();
  if (has_lat && lat["dt"] && lat["total_time"]) throw Error(ErrorCode::config, "give either dt or total_time, not both");
  L.dt = 1.0 / L.n_slices;
  read(lat, "dt", L.dt, "propagate.lattice");
  if (has_lat && lat["total_time"]) {
    double T = 0.0;
    read(lat, "total_time", T, "propagate.lattice");
    L.dt = T / L.n_slices;
  }
  L.hop_rule = detail::read_enum(lat, "hop_rule", HopRule::quasi_interpolated, "propagate.lattice",
                                 {{"point", HopRule::point}, {"quasi_interpolated", HopRule::quasi_interpolated}});
  L.validate();
  const auto smp = prop ? prop["sampler"] : YAML::Node();
  only_keys(smp, "propagate.sampler", {"n_samples", "sigma", "proposal"});
  long long n_samples = static_cast<long long>(P.sampler.n_samples);
  read(smp, "n_samples", n_samples, "propagate.sampler");
  if (n_samples < 1) throw Error(ErrorCode::config, "n_samples must be at least 1");
  P.sampler.n_samples = static_cast<std::size_t>(n_samples);
  read(smp, "sigma", P.sampler.sigma, "propagate.sampler");
  P.sampler.proposal =
      detail::read_enum(smp, "proposal", Proposal::gaussian_bridge, "propagate.sampler",
                        {{"gaussian_bridge", Proposal::gaussian_bridge}, {"uniform_lattice", Proposal::uniform_lattice}});
  P.sampler.seed = c.seed;
  P.sampler.validate();
  if (prop && prop["normalization"]) {
    const auto nrm = prop["normalization"];
    only_keys(nrm, "propagate.normalization", {"row_factor", "global_scale"});
    LatticeNormalization n;
    if (!nrm["row_factor"] || !nrm["global_scale"])
      throw Error(ErrorCode::config, "normalization override needs row_factor and global_scale");
    read(nrm, "row_factor", n.row_factor, "propagate.normalization");
    read(nrm, "global_scale", n.global_scale, "propagate.normalization");
    P.normalization = n;
  }
  if (!(std::abs(P.boost_u) < c.units.constants.c)) throw Error(ErrorCode::config, "propagate.boost_u must be subluminal");

  const auto inv = root["invert"];
  only_keys(inv, "invert", {"path_file", "delta_t_fraction", "root_preference", "max_bisection_steps"});
  read(inv, "path_file", c.invert.path_file, "invert");
  read(inv, "delta_t_fraction", c.invert.policy.delta_t_fraction, "invert");
  read(inv, "max_bisection_steps", c.invert.policy.max_bisection_steps, "invert");
  c.invert.policy.root_preference = detail::read_enum(
      inv, "root_preference", RootPreference::nearer_to_midpoint, "invert",
      {{"nearer_to_midpoint", RootPreference::nearer_to_midpoint}, {"positive_side", RootPreference::positive_side}});
  c.invert.policy.validate();

  const auto def = root["deflect"];
  only_keys(def, "deflect", {"experiment", "sweep", "rel_tol", "abs_tol"});
  const auto ex = def ? def["experiment"] : YAML::Node();
  only_keys(ex, "deflect.experiment",
            {"Q", "e", "m_e", "u", "D", "center_x", "gun_x", "screen_x", "detector_x", "small_angle_bound"});
  auto& E = c.deflect.experiment;
  E.constants = c.units.constants;
  E.weak_field_bound = c.weak_field_bound;
  for (auto [key, ptr] : {std::pair{"Q", &E.Q}, {"e", &E.e}, {"m_e", &E.m_e}, {"u", &E.u}, {"D", &E.D},
                          {"center_x", &E.center_x}, {"gun_x", &E.gun_x}, {"screen_x", &E.screen_x},
                          {"detector_x", &E.detector_x}, {"small_angle_bound", &E.small_angle_bound}})
    read(ex, key, *ptr, "deflect.experiment");
  const auto sw = def ? def["sweep"] : YAML::Node();
  only_keys(sw, "deflect.sweep", {"Q", "D", "u"});
  read(sw, "Q", c.deflect.Q, "deflect.sweep");
  read(sw, "D", c.deflect.D, "deflect.sweep");
  read(sw, "u", c.deflect.u, "deflect.sweep");
  read(def, "rel_tol", c.deflect.control.rel_tol, "deflect");
  read(def, "abs_tol", c.deflect.control.abs_tol, "deflect");
  if (!(c.deflect.control.rel_tol > 0.0 && c.deflect.control.abs_tol > 0.0))
    throw Error(ErrorCode::config, "deflect tolerances must be positive");

  const auto sig = root["significance"];
  only_keys(sig, "significance", {"ensemble_file", "path_files", "weights"});
  read(sig, "ensemble_file", c.significance.ensemble_file, "significance");
  read(sig, "path_files", c.significance.path_files, "significance");
  read(sig, "weights", c.significance.weights, "significance");
  if (!c.significance.ensemble_file.empty() && !c.significance.path_files.empty())
    throw Error(ErrorCode::config, "significance takes either ensemble_file or path_files");

  const auto ivr = root["invariance"];
  only_keys(ivr, "invariance", {"path_file", "u", "direction"});
  read(ivr, "path_file", c.invariance.path_file, "invariance");
  read(ivr, "u", c.invariance.u, "invariance");
  detail::read_vec3(ivr, "direction", c.invariance.direction, "invariance");
  return c;
}

inline RunConfig load_config(const std::filesystem::path& file) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(file.string());
  } catch (const YAML::BadFile&) {
    throw Error(ErrorCode::config, "cannot read config " + file.string());
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::config, "config is not valid YAML: " + std::string(e.what()));
  }
  return parse_config(root, file.parent_path().empty() ? std::filesystem::path(".") : file.parent_path());
}

inline RunConfig parse_config_string(const std::string& text) {
  try {
    return parse_config(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::config, "config is not valid YAML: " + std::string(e.what()));
  }
}

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// One manifest per command invocation; it lists every file the run wrote.
struct RunManifest {
  std::string command;
  json config = json::object();
  std::string version;
  std::string started;
  std::string finished;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::optional<LatticeNormalization> normalization;
  json acceptance;  // validate only
  json summary = json::object();
  std::vector<std::string> outputs;

  json to_json() const {
    json j = {{"command", command}, {"tool_version", version},  {"started", started}, {"finished", finished},
              {"seed", seed},       {"workers", workers},       {"config", config},   {"outputs", outputs},
              {"summary", summary}};
    if (normalization)
      j["normalization"] = {{"row_factor", normalization->row_factor},
                            {"global_scale", normalization->global_scale},
                            {"kernel_modulus", normalization->kernel_modulus},
                            {"mass_over_hbar_eff", normalization->mass_over_hbar_eff},
                            {"overridden", normalization->overridden}};
    if (!acceptance.is_null()) j["acceptance"] = acceptance;
    return j;
  }
};

}  // namespace itpi::cli
