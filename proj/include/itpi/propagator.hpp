#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "itpi/constants.hpp"
#include "itpi/detail/parallel.hpp"
#include "itpi/detail/quadrature.hpp"
#include "itpi/detail/summation.hpp"
#include "itpi/geometry.hpp"

namespace itpi {

using cplx = std::complex<double>;

inline cplx step_phase(const SpacetimePoint& x1, const SpacetimePoint& x2, const InducedMetric& metric,
                       double omega) {
  return std::polar(1.0, omega * segment_internal_time(x1, x2, metric));
}

inline cplx step_phase(double x1, double x2, double dt, const InducedMetric& metric, double omega) {
  return step_phase(SpacetimePoint::make(0.0, {x1}), SpacetimePoint::make(dt, {x2}), metric, omega);
}

// Point: the literal one-step phase between sites.
// QuasiInterpolated: the phase integrated against the cubic B-spline
// quasi-interpolation kernel of the source site, which suppresses the
// aliasing of rapidly oscillating hops.
enum class HopRule { point, quasi_interpolated };

struct LatticeSpec {
  int n_slices = 64;
  double dt = 1.0 / 64.0;
  double x_min = -8.0;
  double x_max = 8.0;
  int n_sites = 257;
  double source_x = 0.0;
  double t0 = 0.0;
  HopRule hop_rule = HopRule::quasi_interpolated;
  double edge_taper = 0.25;  // fraction of the width damped on each side

  double spacing() const { return (x_max - x_min) / static_cast<double>(n_sites - 1); }
  double site(int i) const { return i == n_sites - 1 ? x_max : x_min + spacing() * i; }
  double total_time() const { return n_slices * dt; }

  void validate() const {
    if (n_slices < 1) throw Error(ErrorCode::config, "n_slices must be at least 1");
    if (!(std::isfinite(dt) && dt > 0.0)) throw Error(ErrorCode::config, "dt must be positive");
    if (n_sites < 3) throw Error(ErrorCode::config, "n_sites must be at least 3");
    if (!(std::isfinite(x_min) && std::isfinite(x_max) && x_max > x_min))
      throw Error(ErrorCode::config, "x_max must exceed x_min");
    if (!(edge_taper >= 0.0 && edge_taper < 0.5)) throw Error(ErrorCode::config, "edge_taper must lie in [0, 0.5)");
    source_index();
  }

  int source_index() const {
    const double h = spacing();
    const double f = (source_x - x_min) / h;
    const long i = std::lround(f);
    if (i < 0 || i >= n_sites || std::abs(f - static_cast<double>(i)) > 1e-9)
      throw Error(ErrorCode::config, "source_x must coincide with a lattice site");
    return static_cast<int>(i);
  }

  std::vector<double> taper_mask() const {
    std::vector<double> m(static_cast<std::size_t>(n_sites), 1.0);
    const double w = edge_taper * static_cast<double>(n_sites - 1);
    if (w <= 0.0) return m;
    for (int i = 0; i < n_sites; ++i) {
      const double d = std::min(i, n_sites - 1 - i);
      if (d < w) {
        const double s = std::sin(0.5 * std::numbers::pi * d / w);
        m[static_cast<std::size_t>(i)] = s * s;
      }
    }
    return m;
  }
};

struct LatticeNormalization {
  double row_factor = 1.0;    // applied every slice: unit l2 norm of the free central row
  double global_scale = 1.0;  // applied once: least-squares fit to the free kernel modulus
  double kernel_modulus = 0.0;
  double mass_over_hbar_eff = 0.0;
  bool overridden = false;
};

struct AmplitudeField {
  std::vector<cplx> values;
  std::vector<double> x;             // coordinate along the detector line
  std::vector<double> standard_error; // empty for exact contractions
  SpacetimePoint origin;
  double total_time = 0.0;
  LatticeNormalization normalization;

  std::vector<double> likelihood() const {
    std::vector<double> p(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) p[i] = std::norm(values[i]);
    return p;
  }
};

inline cplx analytic_free_kernel(double m, double hbar, double T, double dx) {
  if (!(T > 0.0)) throw Error(ErrorCode::domain, "T must be positive");
  const cplx pref = std::sqrt(cplx(m / (2.0 * std::numbers::pi * hbar * T), 0.0) / cplx(0.0, 1.0));
  return pref * std::polar(1.0, m * dx * dx / (2.0 * hbar * T));
}

// Modulus of the free kernel whose phase matches omega * (-|dx|^2 / (c^2 T)):
// m / hbar_eff = 2 omega / c^2.
inline double free_kernel_modulus(double omega, double c, double T) {
  return std::sqrt(std::abs(omega) / (std::numbers::pi * c * c * T));
}

namespace detail {

inline double bspline3(double s) {
  const double a = std::abs(s);
  if (a < 1.0) return 2.0 / 3.0 - a * a + 0.5 * a * a * a;
  if (a < 2.0) {
    const double b = 2.0 - a;
    return b * b * b / 6.0;
  }
  return 0.0;
}

inline double quasi_kernel(double s) {
  return 4.0 / 3.0 * bspline3(s) - (bspline3(s + 1.0) + bspline3(s - 1.0)) / 6.0;
}

inline const GaussTable& gauss_table() {
  static const GaussTable table(768);
  return table;
}

inline double lattice_segment_tau(double x1, double x2, double t1, double dt, const InducedMetric& metric) {
  SpacetimePoint a, b;
  a.t = t1;
  a.x[0] = x1;
  b.t = t1 + dt;
  b.x[0] = x2;
  return signed_segment_internal_time(a, b, metric);
}

inline cplx hop_weight(const LatticeSpec& spec, const InducedMetric& metric, double omega, double t1, int i, int j) {
  const double xi = spec.site(i);
  const double yj = spec.site(j);
  if (spec.hop_rule == HopRule::point)
    return std::polar(1.0, omega * lattice_segment_tau(xi, yj, t1, spec.dt, metric));

  const double h = spec.spacing();
  const double c2 = metric.constants().c * metric.constants().c;
  const double G = 1.0 + metric.weak_field_bound();
  const auto& table = gauss_table();
  // Phase swept across one unit cell of the kernel support sets the node count.
  const double reach = std::abs(yj - xi) + 3.0 * h;
  const double kappa = std::abs(omega) * 2.0 * G * reach * h / (c2 * spec.dt);
  const std::size_t n = static_cast<std::size_t>(std::ceil(0.6 * kappa)) + 8;
  if (n > table.max_nodes())
    throw Error(ErrorCode::config, "lattice hop phase is under-resolved; refine dt or the site spacing");
  const auto& rule = table(n);
  ComplexSum acc;
  for (int cell = -3; cell < 3; ++cell) {
    for (std::size_t q = 0; q < n; ++q) {
      const double s = cell + 0.5 * (rule.nodes[q] + 1.0);
      const double w = 0.5 * rule.weights[q] * quasi_kernel(s);
      acc.add(w * std::polar(1.0, omega * lattice_segment_tau(xi + s * h, yj, t1, spec.dt, metric)));
    }
  }
  return acc.value();
}

}  // namespace detail

// Row-major hop matrix: entry [i * n + j] is the weight from site i to site j
// over one slice starting at t1. Potentials are static, so one matrix serves
// every slice.
inline std::vector<cplx> build_hop_matrix(const LatticeSpec& spec, const InducedMetric& metric, double omega,
                                          unsigned workers = 1) {
  spec.validate();
  const std::size_t n = static_cast<std::size_t>(spec.n_sites);
  std::vector<cplx> m(n * n);
  detail::parallel_blocks(n, workers, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j)
      m[i * n + j] = detail::hop_weight(spec, metric, omega, spec.t0, static_cast<int>(i), static_cast<int>(j));
  });
  return m;
}

inline double free_row_factor(const LatticeSpec& spec, const PhysicalConstants& k, double omega) {
  const auto flat = InducedMetric::flat(k);
  const int centre = (spec.n_sites - 1) / 2;
  detail::CompensatedSum s;
  for (int j = 0; j < spec.n_sites; ++j) s.add(std::norm(detail::hop_weight(spec, flat, omega, spec.t0, centre, j)));
  const double norm = std::sqrt(s.value());
  if (!(norm > 0.0)) throw Error(ErrorCode::diagnostics, "free hop row vanishes");
  return 1.0 / norm;
}

struct TransferOptions {
  unsigned workers = 1;
  std::optional<LatticeNormalization> normalization;  // skips calibration when set
  bool calibrate_global = true;
};

namespace detail {

inline std::vector<cplx> contract(const LatticeSpec& spec, const std::vector<cplx>& hop, double row_factor,
                                  unsigned workers) {
  const std::size_t n = static_cast<std::size_t>(spec.n_sites);
  const auto mask = spec.taper_mask();
  std::vector<cplx> cur(n, cplx(0.0, 0.0)), next(n);
  cur[static_cast<std::size_t>(spec.source_index())] = 1.0;
  for (int k = 0; k < spec.n_slices; ++k) {
    parallel_blocks(n, workers, [&](std::size_t j) {
      ComplexSum s;
      for (std::size_t i = 0; i < n; ++i)
        if (cur[i] != cplx(0.0, 0.0)) s.add(cur[i] * hop[i * n + j]);
      next[j] = row_factor * mask[j] * s.value();
    });
    std::swap(cur, next);
  }
  return cur;
}

inline double central_lsq_scale(const LatticeSpec& spec, const std::vector<cplx>& free_field, double modulus) {
  const int lo = spec.n_sites / 4;
  const int hi = spec.n_sites - 1 - spec.n_sites / 4;
  CompensatedSum num, den;
  for (int j = lo; j <= hi; ++j) {
    const double f = std::abs(free_field[static_cast<std::size_t>(j)]);
    num.add(modulus * f);
    den.add(f * f);
  }
  if (!(den.value() > 0.0)) throw Error(ErrorCode::diagnostics, "free field vanishes on the central sites");
  return num.value() / den.value();
}

}  // namespace detail

inline LatticeNormalization calibrate_lattice(const LatticeSpec& spec, const PhysicalConstants& k, double omega,
                                              unsigned workers = 1) {
  spec.validate();
  LatticeNormalization n;
  n.row_factor = free_row_factor(spec, k, omega);
  n.kernel_modulus = free_kernel_modulus(omega, k.c, spec.total_time());
  n.mass_over_hbar_eff = 2.0 * std::abs(omega) / (k.c * k.c);
  const auto flat = InducedMetric::flat(k);
  const auto field = detail::contract(spec, build_hop_matrix(spec, flat, omega, workers), n.row_factor, workers);
  n.global_scale = detail::central_lsq_scale(spec, field, n.kernel_modulus);
  return n;
}

inline AmplitudeField propagate_transfer_matrix(const LatticeSpec& spec, const InducedMetric& metric, double omega,
                                                const TransferOptions& opt = {}) {
  spec.validate();
  if (!std::isfinite(omega)) throw Error(ErrorCode::domain, "omega must be finite");
  const auto& k = metric.constants();
  LatticeNormalization norm;
  if (opt.normalization) {
    norm = *opt.normalization;
    norm.overridden = true;
  } else {
    norm.row_factor = free_row_factor(spec, k, omega);
    norm.kernel_modulus = free_kernel_modulus(omega, k.c, spec.total_time());
    norm.mass_over_hbar_eff = 2.0 * std::abs(omega) / (k.c * k.c);
  }
  auto values = detail::contract(spec, build_hop_matrix(spec, metric, omega, opt.workers), norm.row_factor, opt.workers);
  if (!opt.normalization) {
    if (!opt.calibrate_global) {
      norm.global_scale = 1.0;
    } else if (metric.is_flat()) {
      norm.global_scale = detail::central_lsq_scale(spec, values, norm.kernel_modulus);
    } else {
      norm.global_scale = calibrate_lattice(spec, k, omega, opt.workers).global_scale;
    }
  }
  for (auto& v : values) v *= norm.global_scale;

  AmplitudeField f;
  f.values = std::move(values);
  f.x.resize(f.values.size());
  for (int i = 0; i < spec.n_sites; ++i) f.x[static_cast<std::size_t>(i)] = spec.site(i);
  f.origin = SpacetimePoint::make(spec.t0, {spec.source_x});
  f.total_time = spec.total_time();
  f.normalization = norm;
  for (const auto& v : f.values)
    if (!(std::isfinite(v.real()) && std::isfinite(v.imag())))
      throw Error(ErrorCode::diagnostics, "non-finite amplitude");
  return f;
}

inline double velocity_dependent_step(const std::function<double(const Vec3&)>& phi,
                                      const std::function<Vec3(const Vec3&)>& A, const SpacetimePoint& x1,
                                      const SpacetimePoint& x2, double e, double m_e, const PhysicalConstants& k) {
  const double dt = x2.t - x1.t;
  if (!(dt > 0.0)) throw Error(ErrorCode::malformed_path, "step must have dt > 0");
  Vec3 mid{}, v{};
  for (int d = 0; d < x1.dim; ++d) {
    mid[d] = 0.5 * (x1.x[d] + x2.x[d]);
    v[d] = (x2.x[d] - x1.x[d]) / dt;
  }
  return velocity_dependent_value(VelocityDependent{phi, A, e, m_e}, mid, v, x1.dim, k);
}

struct ReductionReport {
  double exact_phase = 0.0;            // omega_0 * tau
  double reduced_phase = 0.0;          // omega_0 T + (alpha / (hbar/2)) sum (V - M0 v^2 / 2) dt
  double slow_motion_term = 0.0;       // omega_0 sum (2 Phi / c^2)(v^2 / c^2) dt, dropped by the reduced form
  double residual = 0.0;               // exact - reduced - slow_motion_term
  double relative_residual = 0.0;
  double max_speed = 0.0;
};

inline ReductionReport reduction_residual(const PiecewisePath& path, const InducedMetric& metric,
                                          const InternalClock& clock) {
  if (path.time_reversed()) throw Error(ErrorCode::malformed_path, "forward-time path required");
  const auto& k = metric.constants();
  const double c2 = k.c * k.c;
  const double omega0 = rest_frequency(clock, k);
  const auto& v = path.vertices();
  ReductionReport r;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double dt = v[i].t - v[i - 1].t;
    double dx2 = 0.0;
    for (int d = 0; d < v[i].dim; ++d) dx2 += (v[i].x[d] - v[i - 1].x[d]) * (v[i].x[d] - v[i - 1].x[d]);
    r.max_speed = std::max(r.max_speed, std::sqrt(dx2) / dt);
  }
  if (!(r.max_speed < 0.1 * k.c))
    throw Error(ErrorCode::regime, "path speed reaches " + std::to_string(r.max_speed / k.c) + " c; need < 0.1 c");

  detail::CompensatedSum t_total, lagrangian, slow;
  const double coupling = clock.alpha / (0.5 * k.hbar);
  for (std::size_t i = 1; i < v.size(); ++i) {
    const auto s = detail::segment_terms(v[i - 1], v[i], metric);
    const double phi = (s.g.g_tt - 1.0) * 0.5 * c2;
    const double v2 = s.dx2 / (s.dt * s.dt);
    t_total.add(s.dt);
    lagrangian.add((phi * clock.rest_mass - 0.5 * clock.rest_mass * v2) * s.dt);
    slow.add((2.0 * phi / c2) * (v2 / c2) * s.dt);
  }
  r.exact_phase = omega0 * path_internal_time(path, metric);
  r.reduced_phase = omega0 * t_total.value() + coupling * lagrangian.value();
  r.slow_motion_term = omega0 * slow.value();
  r.residual = r.exact_phase - r.reduced_phase - r.slow_motion_term;
  r.relative_residual = std::abs(r.residual) / std::max(std::abs(r.exact_phase), 1e-300);
  return r;
}

}  // namespace itpi
