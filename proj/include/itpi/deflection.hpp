#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "itpi/constants.hpp"
#include "itpi/detail/parallel.hpp"
#include "itpi/geometry.hpp"
#include "itpi/monte_carlo.hpp"

namespace itpi {

// Source at (center_x, D); the unperturbed beam runs along y = 0 in +x.
struct CoulombExperiment {
  double Q = 1.0;
  double e = 1.0;
  double m_e = 1.0;
  double u = 0.1;
  double D = 1.0;
  double center_x = 0.0;
  double gun_x = -100.0;
  double screen_x = -100.0;
  double detector_x = 100.0;
  PhysicalConstants constants{};
  double weak_field_bound = 1e-3;
  double small_angle_bound = 0.05;

  double beta() const { return u / constants.c; }
  double epsilon() const { return lorentz_factor(u, constants.c); }
  Vec3 center() const { return {center_x, D, 0.0}; }

  // k_e Q e sqrt(1 - beta^2) / m_e, so that Phi(R) = strength / R.
  double induced_strength() const {
    return induced_coulomb_strength(InducedCoulomb{Q, e, m_e, u, center()}, constants);
  }

  void validate() const;
};

inline double induced_coulomb_potential(double R, const CoulombExperiment& exp) {
  if (!(R > 0.0)) throw Error(ErrorCode::domain, "R must be positive");
  return exp.induced_strength() / R;
}

inline double deflection_gravity_reference(double GM, double D, double u, double c) {
  if (!(u > 0.0)) throw Error(ErrorCode::domain, "u must be positive");
  if (!(D > 0.0)) throw Error(ErrorCode::domain, "D must be positive");
  return 2.0 * (GM / D) / (u * u) * (1.0 + u * u / (c * c));
}

inline double deflection_classical_analytic(const CoulombExperiment& exp) {
  const double b = exp.beta();
  return 2.0 * exp.constants.k_e * exp.Q * exp.e / (exp.D * exp.m_e) * std::sqrt((1.0 - b) * (1.0 + b)) /
         (exp.u * exp.u);
}

inline double deflection_induced_analytic(const CoulombExperiment& exp) {
  return deflection_classical_analytic(exp) * (1.0 + exp.beta() * exp.beta());
}

inline double weak_field_parameter(const CoulombExperiment& exp) {
  const double c2 = exp.constants.c * exp.constants.c;
  return 2.0 * exp.constants.k_e * exp.Q * exp.e / (exp.D * exp.m_e * c2);
}

inline void CoulombExperiment::validate() const {
  constants.validate();
  lorentz_factor(u, constants.c);
  if (!(u > 0.0)) throw Error(ErrorCode::domain, "launch speed must be positive");
  if (!(D > 0.0)) throw Error(ErrorCode::domain, "impact parameter must be positive");
  if (!(m_e > 0.0)) throw Error(ErrorCode::domain, "m_e must be positive");
  if (!(std::isfinite(Q) && std::isfinite(e))) throw Error(ErrorCode::domain, "charges must be finite");
  if (!(screen_x >= gun_x && detector_x > screen_x))
    throw Error(ErrorCode::domain, "geometry must satisfy gun <= screen < detector along the axis");
  if (!(std::abs(weak_field_parameter(*this)) < weak_field_bound))
    throw Error(ErrorCode::weak_field, "2 k_e |Qe| / (D m_e c^2) exceeds the weak-field bound");
  if (!(std::abs(deflection_induced_analytic(*this)) < small_angle_bound))
    throw Error(ErrorCode::regime, "predicted deflection leaves the small-angle regime");
}

// First-order difference; also enforces that it is small.
inline double deflection_difference(const CoulombExperiment& exp) {
  const double d = weak_field_parameter(exp);
  if (!(std::abs(d) < exp.weak_field_bound))
    throw Error(ErrorCode::weak_field, "2 k_e |Qe| / (D m_e c^2) is not small");
  return d;
}

// Closed-form difference without truncation: delta_alpha_C * u^2 / c^2.
inline double deflection_difference_full(const CoulombExperiment& exp) {
  return deflection_induced_analytic(exp) - deflection_classical_analytic(exp);
}

struct StepControl {
  double rel_tol = 1e-12;
  double abs_tol = 1e-15;
  double asymptotic_factor = 100.0;  // angle measured this many D from the source
  std::size_t max_steps = 2000000;
  double refine_factor = 32.0;       // tolerance ratio of the error-estimate rerun
};

struct TrajectorySample {
  double t, x, y, vx, vy;
};

struct TrajectoryResult {
  std::vector<TrajectorySample> samples;  // physical units
  double angle = 0.0;                     // positive away from the source
  double angle_error = 0.0;
  double speed_drift = 0.0;               // relative, endpoint to endpoint
  double max_speed_deviation = 0.0;       // relative, along the trajectory
  double energy_drift = 0.0;              // relative drift of the conserved quantity
  double max_transverse_acceleration = 0.0;
  double radiated_fraction = 0.0;         // Larmor estimate relative to kinetic energy
  double epsilon_variation = 0.0;         // classical only
  double final_y = 0.0;                   // physical y at the end plane
  std::size_t steps = 0;
};

namespace detail {

using State4 = std::array<double, 4>;

// Dimensionless frame: length D, speed c, source at (0, 1).
struct ExtremalRhs {
  double kappa;  // Phi / c^2 = kappa / r
  void operator()(const State4& s, State4& ds, double) const {
    const double rx = s[0], ry = s[1] - 1.0;
    const double r2 = rx * rx + ry * ry;
    const double r = std::sqrt(r2);
    const double phi = kappa / r;
    const double gx = -kappa * rx / (r2 * r), gy = -kappa * ry / (r2 * r);
    const double v2 = s[2] * s[2] + s[3] * s[3];
    const double gv = gx * s[2] + gy * s[3];
    const double inv = 1.0 / (1.0 - 2.0 * phi);
    ds[0] = s[2];
    ds[1] = s[3];
    ds[2] = (-gx * (1.0 + v2) + 2.0 * gv * s[2]) * inv;
    ds[3] = (-gy * (1.0 + v2) + 2.0 * gv * s[3]) * inv;
  }
};

// State (x, y, p_x, p_y) with p = gamma v.
struct ClassicalRhs {
  double kappa;  // k_e Q e / (m_e D c^2)
  void operator()(const State4& s, State4& ds, double) const {
    const double rx = s[0], ry = s[1] - 1.0;
    const double r2 = rx * rx + ry * ry;
    const double r3 = r2 * std::sqrt(r2);
    const double g = std::sqrt(1.0 + s[2] * s[2] + s[3] * s[3]);
    ds[0] = s[2] / g;
    ds[1] = s[3] / g;
    ds[2] = kappa * rx / r3;
    ds[3] = kappa * ry / r3;
  }
};

template <class Rhs>
std::vector<std::pair<double, State4>> integrate_to_plane(const Rhs& rhs, State4 s0, double x_end, double speed,
                                                          double rel_tol, double abs_tol, std::size_t max_steps) {
  namespace ode = boost::numeric::odeint;
  auto stepper = ode::make_dense_output(abs_tol, rel_tol, ode::runge_kutta_dopri5<State4>());
  const double t_budget = 10.0 * (x_end - s0[0]) / speed;
  stepper.initialize(s0, 0.0, 1e-3 / speed);
  std::vector<std::pair<double, State4>> out;
  out.emplace_back(0.0, s0);
  std::size_t steps = 0;
  try {
    while (true) {
      const auto [ta, tb] = stepper.do_step(rhs);
      const State4 cur = stepper.current_state();
      const double rx = cur[0], ry = cur[1] - 1.0;
      if (rx * rx + ry * ry < 1e-4) throw Error(ErrorCode::regime, "trajectory captured by the source");
      if (cur[0] >= x_end) {
        double lo = ta, hi = tb;
        State4 mid{};
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
          const double tm = 0.5 * (lo + hi);
          stepper.calc_state(tm, mid);
          (mid[0] < x_end ? lo : hi) = tm;
        }
        stepper.calc_state(hi, mid);
        out.emplace_back(hi, mid);
        return out;
      }
      out.emplace_back(tb, cur);
      if (++steps > max_steps) throw Error(ErrorCode::integrator, "step budget exhausted");
      if (tb > t_budget) throw Error(ErrorCode::regime, "trajectory does not escape toward the detector plane");
    }
  } catch (const boost::numeric::odeint::step_adjustment_error& e) {
    throw Error(ErrorCode::integrator, e.what());
  }
}

inline double signed_angle(double vx, double vy) { return -std::atan2(vy, vx); }

// Larmor loss 2 k_e e^2 a^2 / (3 c^3) integrated over the flight, relative to
// the kinetic energy; `a2_integral` is the dimensionless integral of a^2 dt.
inline double larmor_fraction(const CoulombExperiment& exp, double a2_integral, double kinetic) {
  return 2.0 / 3.0 * exp.constants.k_e * exp.e * exp.e * a2_integral / (exp.D * kinetic);
}

struct Launch {
  double x0, y0, angle, x_end;  // dimensionless, launch angle toward the source positive
};

inline TrajectoryResult run_extremal(const CoulombExperiment& exp, const Launch& L, double rel, double abs,
                                     std::size_t max_steps) {
  const double c2 = exp.constants.c * exp.constants.c;
  const double kappa = exp.induced_strength() / (exp.D * c2);
  const double b = exp.beta();
  State4 s0{L.x0, L.y0, b * std::cos(L.angle), b * std::sin(L.angle)};
  const auto traj = integrate_to_plane(ExtremalRhs{kappa}, s0, L.x_end, b, rel, abs, max_steps);

  TrajectoryResult r;
  auto energy = [&](const State4& s) {
    const double phi = kappa / std::hypot(s[0], s[1] - 1.0);
    return (1.0 - 2.0 * phi) * (s[2] * s[2] + s[3] * s[3]) + 2.0 * phi;
  };
  const double e0 = energy(s0);
  const double v0 = std::hypot(s0[2], s0[3]);
  double larmor = 0.0, prev_a2 = 0.0, prev_t = 0.0;
  ExtremalRhs rhs{kappa};
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& [t, s] = traj[i];
    State4 ds{};
    rhs(s, ds, t);
    const double v = std::hypot(s[2], s[3]);
    const double a_perp = std::abs(ds[2] * s[3] - ds[3] * s[2]) / v;
    const double a2 = ds[2] * ds[2] + ds[3] * ds[3];
    if (i > 0) larmor += 0.5 * (a2 + prev_a2) * (t - prev_t);
    prev_a2 = a2;
    prev_t = t;
    r.max_transverse_acceleration = std::max(r.max_transverse_acceleration, a_perp * c2 / exp.D);
    r.max_speed_deviation = std::max(r.max_speed_deviation, std::abs(v - v0) / v0);
    r.energy_drift = std::max(r.energy_drift, std::abs(energy(s) - e0) / std::abs(e0));
    r.samples.push_back({t * exp.D / exp.constants.c, exp.center_x + s[0] * exp.D, s[1] * exp.D,
                         s[2] * exp.constants.c, s[3] * exp.constants.c});
  }
  const auto& end = traj.back().second;
  r.angle = signed_angle(end[2], end[3]);
  r.speed_drift = std::abs(std::hypot(end[2], end[3]) - v0) / v0;
  r.final_y = end[1] * exp.D;
  r.steps = traj.size() - 1;
  const double ke = (exp.epsilon() - 1.0) * exp.m_e * c2;
  r.radiated_fraction = larmor_fraction(exp, larmor, ke);
  return r;
}

inline TrajectoryResult run_classical(const CoulombExperiment& exp, const Launch& L, double rel, double abs,
                                      std::size_t max_steps) {
  const double c2 = exp.constants.c * exp.constants.c;
  const double kappa = exp.constants.k_e * exp.Q * exp.e / (exp.m_e * exp.D * c2);
  const double b = exp.beta();
  const double g0 = exp.epsilon();
  State4 s0{L.x0, L.y0, g0 * b * std::cos(L.angle), g0 * b * std::sin(L.angle)};
  const auto traj = integrate_to_plane(ClassicalRhs{kappa}, s0, L.x_end, b, rel, abs, max_steps);

  TrajectoryResult r;
  auto gamma = [](const State4& s) { return std::sqrt(1.0 + s[2] * s[2] + s[3] * s[3]); };
  auto energy = [&](const State4& s) { return gamma(s) + kappa / std::hypot(s[0], s[1] - 1.0); };
  const double e0 = energy(s0);
  const double v0 = b;
  double larmor = 0.0, prev_a2 = 0.0, prev_t = 0.0;
  ClassicalRhs rhs{kappa};
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& [t, s] = traj[i];
    const double g = gamma(s);
    const double vx = s[2] / g, vy = s[3] / g;
    State4 ds{};
    rhs(s, ds, t);
    // a = (F - v (v . F)) / gamma for unit rest mass
    const double vf = vx * ds[2] + vy * ds[3];
    const double ax = (ds[2] - vx * vf) / g, ay = (ds[3] - vy * vf) / g;
    const double v = std::hypot(vx, vy);
    const double a2 = ax * ax + ay * ay;
    if (i > 0) larmor += 0.5 * (a2 + prev_a2) * (t - prev_t);
    prev_a2 = a2;
    prev_t = t;
    r.max_transverse_acceleration =
        std::max(r.max_transverse_acceleration, std::abs(ax * vy - ay * vx) / v * c2 / exp.D);
    r.max_speed_deviation = std::max(r.max_speed_deviation, std::abs(v - v0) / v0);
    r.energy_drift = std::max(r.energy_drift, std::abs(energy(s) - e0) / std::abs(e0));
    r.epsilon_variation = std::max(r.epsilon_variation, std::abs(g - g0) / g0);
    r.samples.push_back({t * exp.D / exp.constants.c, exp.center_x + s[0] * exp.D, s[1] * exp.D,
                         vx * exp.constants.c, vy * exp.constants.c});
  }
  const auto& end = traj.back().second;
  r.angle = signed_angle(end[2], end[3]);
  r.speed_drift = std::abs(std::hypot(end[2], end[3]) / gamma(end) - v0) / v0;
  r.final_y = end[1] * exp.D;
  r.steps = traj.size() - 1;
  const double ke = (g0 - 1.0) * exp.m_e * c2;
  r.radiated_fraction = larmor_fraction(exp, larmor, ke);
  return r;
}

template <class Runner>
TrajectoryResult with_error_estimate(Runner run, const StepControl& ctl) {
  auto coarse = run(ctl.rel_tol, ctl.abs_tol);
  auto fine = run(ctl.rel_tol / ctl.refine_factor, ctl.abs_tol / ctl.refine_factor);
  fine.angle_error = std::abs(fine.angle - coarse.angle);
  return fine;
}

inline Launch asymptotic_launch(const CoulombExperiment& exp, const StepControl& ctl) {
  if (!(ctl.asymptotic_factor > 1.0)) throw Error(ErrorCode::config, "asymptotic_factor must exceed 1");
  return {-ctl.asymptotic_factor, 0.0, 0.0, ctl.asymptotic_factor};
}

}  // namespace detail

inline TrajectoryResult integrate_extremal_path(const CoulombExperiment& exp, const StepControl& ctl = {}) {
  exp.validate();
  const auto L = detail::asymptotic_launch(exp, ctl);
  return detail::with_error_estimate(
      [&](double rel, double abs) { return detail::run_extremal(exp, L, rel, abs, ctl.max_steps); }, ctl);
}

inline TrajectoryResult integrate_classical_coulomb(const CoulombExperiment& exp, const StepControl& ctl = {}) {
  exp.validate();
  const auto L = detail::asymptotic_launch(exp, ctl);
  return detail::with_error_estimate(
      [&](double rel, double abs) { return detail::run_classical(exp, L, rel, abs, ctl.max_steps); }, ctl);
}

// Extremal path from the slit centre (screen_x, 0) along +x to the detector
// plane; returns the physical y of the crossing B_Gamma.
inline double extremal_intersection(const CoulombExperiment& exp, double launch_angle = 0.0,
                                    const StepControl& ctl = {}) {
  exp.validate();
  const detail::Launch L{(exp.screen_x - exp.center_x) / exp.D, 0.0, launch_angle,
                         (exp.detector_x - exp.center_x) / exp.D};
  return detail::run_extremal(exp, L, ctl.rel_tol, ctl.abs_tol, ctl.max_steps).final_y;
}

// Launch a bracket of nearby angles and require a strictly monotone map to
// the detector plane: one extremal path reaches each detector point.
inline bool check_single_extremal(const CoulombExperiment& exp, const StepControl& ctl = {}, int n = 7) {
  const double span = 1e-2 * std::max(std::abs(deflection_induced_analytic(exp)), 1e-6);
  double prev = 0.0;
  int direction = 0;
  for (int k = 0; k < n; ++k) {
    const double a = -span + 2.0 * span * k / (n - 1);
    const double y = extremal_intersection(exp, a, ctl);
    if (k > 0) {
      const int d = y > prev ? 1 : (y < prev ? -1 : 0);
      if (d == 0 || (direction != 0 && d != direction)) return false;
      direction = d;
    }
    prev = y;
  }
  return true;
}

struct DeflectionResult {
  double delta_alpha_analytic = 0.0;
  double delta_alpha_numeric = 0.0;
  double delta_alpha_numeric_error = 0.0;
  double delta_alpha_C_analytic = 0.0;
  double delta_alpha_C_numeric = 0.0;
  double delta_alpha_C_numeric_error = 0.0;
  double difference_analytic = 0.0;  // first-order 2 k_e Q e / (D m_e c^2)
  double difference_numeric = 0.0;
  TrajectoryResult extremal;
  TrajectoryResult classical;
  std::vector<std::string> flags;
};

inline DeflectionResult run_deflection(const CoulombExperiment& exp, const StepControl& ctl = {}) {
  exp.validate();
  DeflectionResult r;
  r.delta_alpha_analytic = deflection_induced_analytic(exp);
  r.delta_alpha_C_analytic = deflection_classical_analytic(exp);
  r.difference_analytic = deflection_difference(exp);
  r.extremal = integrate_extremal_path(exp, ctl);
  r.classical = integrate_classical_coulomb(exp, ctl);
  r.delta_alpha_numeric = r.extremal.angle;
  r.delta_alpha_numeric_error = r.extremal.angle_error;
  r.delta_alpha_C_numeric = r.classical.angle;
  r.delta_alpha_C_numeric_error = r.classical.angle_error;
  r.difference_numeric = r.delta_alpha_numeric - r.delta_alpha_C_numeric;
  if (r.extremal.speed_drift > 1e-3) r.flags.push_back("speed_drift");
  if (r.extremal.energy_drift > 1e-8 || r.classical.energy_drift > 1e-8) r.flags.push_back("energy_drift");
  if (r.extremal.angle_error > 1e-3 * std::abs(r.delta_alpha_numeric) ||
      r.classical.angle_error > 1e-3 * std::abs(r.delta_alpha_C_numeric))
    r.flags.push_back("integrator_error");
  if (r.extremal.radiated_fraction > 1e-3) r.flags.push_back("radiation");
  return r;
}

struct SweepRow {
  double Q = 0.0, D = 0.0, u = 0.0;
  DeflectionResult result;
  std::string error;  // set when the cell is invalid; result is then empty
};

inline std::vector<SweepRow> deflection_sweep(const CoulombExperiment& base, const std::vector<double>& Qs,
                                              const std::vector<double>& Ds, const std::vector<double>& us,
                                              const StepControl& ctl = {}, unsigned workers = 1) {
  std::vector<SweepRow> rows;
  for (double Q : Qs)
    for (double D : Ds)
      for (double u : us) rows.push_back({Q, D, u, {}, {}});
  detail::parallel_blocks(rows.size(), workers, [&](std::size_t i) {
    auto exp = base;
    exp.Q = rows[i].Q;
    exp.D = rows[i].D;
    exp.u = rows[i].u;
    try {
      rows[i].result = run_deflection(exp, ctl);
    } catch (const Error& e) {
      rows[i].error = e.what();
    }
  });
  return rows;
}

struct PeakCheckSpec {
  std::size_t n_samples = 1000000;
  std::uint64_t seed = 1;
  int n_steps = 32;
  double sigma = 100.0;             // per-step transverse bridge scale
  double aperture_width = 500.0;    // Gaussian slit half-width parameter
  double detector_half_width = 3000.0;
  int n_cells = 61;
  double alpha = 0.5;
  double min_snr = 5.0;
  unsigned workers = 1;
};

struct PeakCheckResult {
  double peak_y = 0.0;
  double extremal_y = 0.0;
  double cell_width = 0.0;
  double offset_cells = 0.0;
  double snr = 0.0;
  bool single_extremal = false;
  bool inconclusive = true;
  std::string reason;
  AmplitudeField field;
};

// Paraxial sampling: the longitudinal coordinate moves uniformly at u from
// the slit to the detector; the transverse coordinate carries the bridge.
inline PeakCheckResult detector_peak_check(const CoulombExperiment& exp, const PeakCheckSpec& spec) {
  exp.validate();
  if (spec.n_cells < 5) throw Error(ErrorCode::config, "at least five detector cells are required");
  const auto& k = exp.constants;
  const InducedMetric metric(InducedCoulomb{exp.Q, exp.e, exp.m_e, exp.u, exp.center()}, k, exp.weak_field_bound);
  const double omega = boosted_frequency(rest_frequency(InternalClock{exp.m_e, spec.alpha}, k), exp.u, k.c);
  const double T = (exp.detector_x - exp.screen_x) / exp.u;

  PeakCheckResult r;
  r.cell_width = 2.0 * spec.detector_half_width / (spec.n_cells - 1);
  std::vector<SpacetimePoint> targets;
  for (int j = 0; j < spec.n_cells; ++j)
    targets.push_back(SpacetimePoint::make(T, {exp.detector_x, -spec.detector_half_width + r.cell_width * j}));

  SamplerSpec sampler;
  sampler.n_samples = spec.n_samples;
  sampler.seed = spec.seed;
  sampler.sigma = spec.sigma;
  BridgeOptions opt;
  opt.fluctuating = {false, true, false};
  opt.aperture = GaussianAperture{{0.0, 1.0, 0.0}, spec.aperture_width};
  opt.workers = spec.workers;
  r.field = propagate_monte_carlo(SpacetimePoint::make(0.0, {exp.screen_x, 0.0}), targets, spec.n_steps, metric,
                                  omega, sampler, opt);

  const auto p = r.field.likelihood();
  const std::size_t jmax = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  r.extremal_y = extremal_intersection(exp);
  r.single_extremal = check_single_extremal(exp);
  const double se = r.field.standard_error[jmax];
  r.snr = se > 0.0 ? std::abs(r.field.values[jmax]) / se : 0.0;
  r.peak_y = r.field.x[jmax];
  if (jmax == 0 || jmax + 1 == p.size()) {
    r.reason = "likelihood maximum on the detector edge";
  } else if (r.snr < spec.min_snr) {
    r.reason = "peak amplitude below the signal-to-noise threshold";
  } else if (!r.single_extremal) {
    r.reason = "detector map of nearby extremal paths is not monotone";
  } else {
    const double lm = std::log(p[jmax - 1]), l0 = std::log(p[jmax]), lp = std::log(p[jmax + 1]);
    const double den = lm - 2.0 * l0 + lp;
    const double shift = den < 0.0 ? 0.5 * (lm - lp) / den : 0.0;
    r.peak_y += std::clamp(shift, -0.5, 0.5) * r.cell_width;
    r.inconclusive = false;
  }
  r.offset_cells = std::abs(r.peak_y - r.extremal_y) / r.cell_width;
  return r;
}

}  // namespace itpi
