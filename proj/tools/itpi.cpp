// Batch front end. Exit codes: 0 success, 1 computation or criterion
// failure, 2 invalid input.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "itpi/cli/config.hpp"
#include "itpi/frames.hpp"
#include "itpi/io.hpp"
#include "itpi/testing/acceptance.hpp"

namespace fs = std::filesystem;
using namespace itpi;
using cli::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::string out;
  std::string format;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "YAML run configuration");
  sub->add_option("--seed", c.seed, "overrides the configured seed");
  sub->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, "output directory (overrides output.directory)");
  sub->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

cli::RunConfig resolve(const Common& c) {
  auto cfg = c.config.empty() ? cli::parse_config(YAML::Node()) : cli::load_config(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.propagate.sampler.seed = *c.seed;
  }
  if (c.workers) cfg.workers = *c.workers;
  if (!c.out.empty()) cfg.output_directory = c.out;
  if (!c.format.empty()) cfg.format = c.format;
  return cfg;
}

class Writer {
 public:
  Writer(const cli::RunConfig& cfg, std::string command) : dir_(cfg.output_directory) {
    m_.command = std::move(command);
    m_.config = cfg.echo;
    m_.version = ITPI_VERSION;
    m_.started = cli::utc_now();
    m_.seed = cfg.seed;
    m_.workers = cfg.workers;
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::io, "cannot create " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& content) {
    io::atomic_write(dir_ / name, content);
    m_.outputs.push_back(name);
  }

  cli::RunManifest& manifest() { return m_; }

  void finish() {
    m_.finished = cli::utc_now();
    io::atomic_write(dir_ / (m_.command + ".manifest.json"), m_.to_json().dump(2) + "\n");
  }

 private:
  fs::path dir_;
  cli::RunManifest m_;
};

template <class F>
std::string render(F f) {
  std::ostringstream os;
  f(os);
  return os.str();
}

PiecewisePath load_path(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw Error(ErrorCode::io, "cannot read path file " + file.string());
  if (file.extension() == ".json") {
    try {
      return io::path_from_json(json::parse(is));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::io, file.string() + ": " + e.what());
    }
  }
  return io::read_path_csv(is);
}

double clock_frequency(const cli::RunConfig& cfg, double u = 0.0) {
  return boosted_frequency(rest_frequency(cfg.clock, cfg.units.constants), u, cfg.units.constants.c);
}

int cmd_propagate(const cli::RunConfig& cfg) {
  const auto metric = cfg.metric();
  const auto& P = cfg.propagate;
  const double omega = clock_frequency(cfg, P.boost_u);
  Writer w(cfg, "propagate");
  AmplitudeField f;
  if (P.method == cli::Method::transfer_matrix) {
    TransferOptions opt;
    opt.workers = cfg.workers;
    opt.normalization = P.normalization;
    f = propagate_transfer_matrix(P.lattice, metric, omega, opt);
  } else if (P.sampler.proposal == Proposal::uniform_lattice) {
    const auto norm = P.normalization ? *P.normalization
                                      : calibrate_lattice(P.lattice, cfg.units.constants, omega, cfg.workers);
    f = propagate_monte_carlo_lattice(P.lattice, metric, omega, norm, P.sampler, cfg.workers);
    f.normalization = norm;
    f.normalization.overridden = P.normalization.has_value();
  } else {
    const auto& L = P.lattice;
    std::vector<SpacetimePoint> targets;
    for (int i = 0; i < L.n_sites; ++i) targets.push_back(SpacetimePoint::make(L.t0 + L.total_time(), {L.site(i)}));
    BridgeOptions opt;
    opt.workers = cfg.workers;
    f = propagate_monte_carlo(SpacetimePoint::make(L.t0, {L.source_x}), targets, L.n_slices, metric, omega,
                              P.sampler, opt);
  }
  if (cfg.format == "csv")
    w.write("field.csv", render([&](std::ostream& os) { io::write_field_csv(os, f); }));
  else
    w.write("field.json", io::field_to_json(f).dump(2) + "\n");
  if (P.method == cli::Method::transfer_matrix || P.sampler.proposal == Proposal::uniform_lattice)
    w.manifest().normalization = f.normalization;
  w.manifest().summary = {{"omega", omega}, {"sites", f.values.size()}, {"total_time", f.total_time}};
  w.finish();
  return 0;
}

int cmd_invert(const cli::RunConfig& cfg, const std::string& path_flag) {
  const std::string file = path_flag.empty() ? cfg.invert.path_file : path_flag;
  if (file.empty()) throw Error(ErrorCode::config, "invert needs invert.path_file or --path");
  const auto path = load_path(path_flag.empty() ? cfg.resolve(file) : fs::path(file));
  const auto res = invert_path(path, cfg.metric(), cfg.invert.policy);
  Writer w(cfg, "invert");
  const auto& r = res.report;
  const json report = {{"original_tau", r.original_tau},
                       {"inverted_tau", r.inverted_tau},
                       {"negation_residual", r.negation_residual},
                       {"operand_scale", r.operand_scale},
                       {"segments", {{"timelike", r.segment_kinds.timelike},
                                     {"null", r.segment_kinds.null},
                                     {"spacelike", r.segment_kinds.spacelike}}},
                       {"max_spatial_excursion", r.max_spatial_excursion},
                       {"mean_spatial_excursion", r.mean_spatial_excursion},
                       {"total_halvings", r.total_halvings},
                       {"timelike_scale", r.timelike_scale}};
  if (cfg.format == "csv")
    w.write("inverted_path.csv", render([&](std::ostream& os) { io::write_path_csv(os, res.path); }));
  else
    w.write("inverted_path.json", io::path_to_json(res.path).dump(2) + "\n");
  w.write("inversion_report.json", report.dump(2) + "\n");
  w.manifest().summary = report;
  w.finish();
  return 0;
}

int cmd_deflect(const cli::RunConfig& cfg) {
  const auto& D = cfg.deflect;
  const auto& base = D.experiment;
  auto axis = [](const std::vector<double>& v, double fallback) { return v.empty() ? std::vector<double>{fallback} : v; };
  const auto rows = deflection_sweep(base, axis(D.Q, base.Q), axis(D.D, base.D), axis(D.u, base.u), D.control,
                                     cfg.workers);
  Writer w(cfg, "deflect");
  if (cfg.format == "csv")
    w.write("sweep.csv", render([&](std::ostream& os) { io::write_sweep_csv(os, rows); }));
  else
    w.write("sweep.json", io::sweep_to_json(rows).dump(2) + "\n");
  std::size_t invalid = 0;
  for (const auto& r : rows) invalid += !r.error.empty();
  w.manifest().summary = {{"cells", rows.size()}, {"invalid_cells", invalid}};
  w.finish();
  return 0;
}

int cmd_significance(const cli::RunConfig& cfg, const std::string& ensemble_flag) {
  const auto metric = cfg.metric();
  const auto& S = cfg.significance;
  PathEnsemble ens;
  if (!ensemble_flag.empty() || !S.ensemble_file.empty()) {
    const fs::path file = ensemble_flag.empty() ? cfg.resolve(S.ensemble_file) : fs::path(ensemble_flag);
    std::ifstream is(file);
    if (!is) throw Error(ErrorCode::io, "cannot read ensemble file " + file.string());
    ens = io::read_ensemble_csv(is);
  } else if (!S.path_files.empty()) {
    std::vector<PiecewisePath> paths;
    for (const auto& f : S.path_files) paths.push_back(load_path(cfg.resolve(f)));
    ens = PathEnsemble(std::move(paths), metric, S.weights);
  } else {
    throw Error(ErrorCode::config, "significance needs significance.ensemble_file, path_files or --ensemble");
  }
  const double omega = clock_frequency(cfg);
  const auto W = ensemble_significance(ens, omega);
  json rows = json::array();
  std::ostringstream csv;
  csv << "path_id,tau,weight,re,im,modulus\n";
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const auto s = path_significance(i, ens, omega);
    csv << i << ',' << io::fmt(ens.internal_times()[i]) << ',' << io::fmt(ens.weights()[i]) << ',' << io::fmt(s.real())
        << ',' << io::fmt(s.imag()) << ',' << io::fmt(std::norm(s)) << '\n';
    rows.push_back({{"path_id", i}, {"tau", ens.internal_times()[i]}, {"weight", ens.weights()[i]},
                    {"re", s.real()}, {"im", s.imag()}, {"modulus", std::norm(s)}});
  }
  json summary = {{"omega", omega},
                  {"ensemble_re", W.real()},
                  {"ensemble_im", W.imag()},
                  {"likelihood", significance_modulus(W)},
                  {"time_invertible", is_negation_symmetric(ens.internal_times(), ens.weights(), 1e-12)}};
  if (summary["time_invertible"].get<bool>()) {
    const auto F = factorized_significance(ens, omega);
    summary["factorized_re"] = F.value.real();
    summary["factorized_im"] = F.value.imag();
  }
  Writer w(cfg, "significance");
  if (cfg.format == "csv")
    w.write("significance.csv", csv.str());
  else
    w.write("significance.json", json{{"paths", rows}, {"ensemble", summary}}.dump(2) + "\n");
  w.manifest().summary = summary;
  w.finish();
  return 0;
}

int cmd_invariance(const cli::RunConfig& cfg, const std::string& path_flag) {
  const std::string file = path_flag.empty() ? cfg.invariance.path_file : path_flag;
  if (file.empty()) throw Error(ErrorCode::config, "invariance needs invariance.path_file or --path");
  const auto path = load_path(path_flag.empty() ? cfg.resolve(file) : fs::path(file));
  const auto metric = cfg.metric();
  std::ostringstream csv;
  csv << "u,rest_phase,matching_phase,residual,relative_residual,reordered_segment\n";
  json rows = json::array();
  double worst = 0.0;
  for (double u : cfg.invariance.u) {
    const auto r = check_invariance(path, cfg.clock, MatchingFrame{u, cfg.invariance.direction}, metric);
    worst = std::max(worst, r.relative_residual);
    csv << io::fmt(u) << ',' << io::fmt(r.rest_phase) << ',' << io::fmt(r.matching_phase) << ',' << io::fmt(r.residual)
        << ',' << io::fmt(r.relative_residual) << ','
        << (r.reordered_segment ? std::to_string(*r.reordered_segment) : std::string()) << '\n';
    json row = {{"u", u}, {"rest_phase", r.rest_phase}, {"matching_phase", r.matching_phase},
                {"residual", r.residual}, {"relative_residual", r.relative_residual}};
    if (r.reordered_segment) row["reordered_segment"] = *r.reordered_segment;
    rows.push_back(row);
  }
  Writer w(cfg, "invariance");
  if (cfg.format == "csv")
    w.write("invariance.csv", csv.str());
  else
    w.write("invariance.json", rows.dump(2) + "\n");
  w.manifest().summary = {{"max_relative_residual", worst}};
  w.finish();
  return 0;
}

int cmd_validate(const cli::RunConfig& cfg, const std::string& level, const std::vector<int>& ids_in, bool write) {
  namespace acc = acceptance;
  acc::Options opt;
  opt.level = level == "full" ? acc::Level::full : acc::Level::fast;
  opt.workers = cfg.workers;
  auto ids = ids_in;
  if (ids.empty())
    for (int i = 1; i <= acc::criterion_count; ++i) ids.push_back(i);
  json report = json::array();
  bool all = true;
  for (int id : ids) {
    const auto r = acc::run_criterion(id, opt);
    std::cout << r.line() << std::endl;
    report.push_back(r.to_json());
    all = all && r.passed;
  }
  if (write) {
    Writer w(cfg, "validate");
    w.write("validation_report.json", report.dump(2) + "\n");
    w.manifest().acceptance = report;
    w.manifest().summary = {{"level", level}, {"passed", all}};
    w.finish();
  }
  return all ? 0 : 1;
}

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::config:
    case ErrorCode::domain:
    case ErrorCode::io:
    case ErrorCode::malformed_path:
    case ErrorCode::weak_field:
    case ErrorCode::regime: return 2;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"itpi: internal-time path-integral engine"};
  app.set_version_flag("--version", ITPI_VERSION);
  app.require_subcommand(1);
  Common common;
  std::string path_flag, ensemble_flag, level = "fast";
  std::vector<int> criteria;

  auto* propagate = app.add_subcommand("propagate", "amplitude field on the final slice");
  auto* invert = app.add_subcommand("invert", "construct the internal-time inverse of a path");
  auto* deflect = app.add_subcommand("deflect", "deflection sweep");
  auto* significance = app.add_subcommand("significance", "relative significance of an ensemble");
  auto* invariance = app.add_subcommand("invariance", "matching-frame invariance of a path");
  auto* validate = app.add_subcommand("validate", "run the acceptance criteria");
  for (auto* s : {propagate, invert, deflect, significance, invariance, validate}) add_common(s, common);
  invert->add_option("--path", path_flag, "path file (CSV or JSON); overrides invert.path_file");
  invariance->add_option("--path", path_flag, "path file (CSV or JSON); overrides invariance.path_file");
  significance->add_option("--ensemble", ensemble_flag, "ensemble CSV (path_id,tau,weight)");
  validate->add_option("level", level, "fast or full")->check(CLI::IsMember({"fast", "full"}));
  validate->add_option("--criterion,-c", criteria, "criterion ids (default: all)")
      ->check(CLI::Range(1, acceptance::criterion_count));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto cfg = resolve(common);
    if (*propagate) return cmd_propagate(cfg);
    if (*invert) return cmd_invert(cfg, path_flag);
    if (*deflect) return cmd_deflect(cfg);
    if (*significance) return cmd_significance(cfg, ensemble_flag);
    if (*invariance) return cmd_invariance(cfg, path_flag);
    if (*validate) return cmd_validate(cfg, level, criteria, !common.out.empty() || !common.config.empty());
  } catch (const SegmentError& e) {
    std::cerr << json{{"error", std::string(to_string(e.code()))}, {"segment", e.segment()}, {"message", e.what()}}.dump()
              << '\n';
    return exit_code(e.code());
  } catch (const Error& e) {
    std::cerr << json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}}.dump() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}
