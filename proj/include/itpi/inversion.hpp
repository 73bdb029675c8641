#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "itpi/detail/summation.hpp"
#include "itpi/geometry.hpp"
#include "itpi/significance.hpp"

namespace itpi {

enum class RootPreference { nearer_to_midpoint, positive_side };

struct InversionPolicy {
  double delta_t_fraction = 0.5;
  RootPreference root_preference = RootPreference::nearer_to_midpoint;
  int max_bisection_steps = 64;

  void validate() const {
    if (!(delta_t_fraction > 0.0 && delta_t_fraction < 1.0))
      throw Error(ErrorCode::config, "delta_t_fraction must lie in (0, 1)");
    if (max_bisection_steps < 0) throw Error(ErrorCode::config, "max_bisection_steps must be nonnegative");
  }
};

struct SegmentSplit {
  SpacetimePoint h;
  double delta_t_fraction = 0.0;  // fraction actually used
  int halvings = 0;
  double excursion = 0.0;         // distance of h from the segment line at the same time
  double achieved = 0.0;          // tau[p1,h] + tau[h,p2]
};

struct SegmentKindCounts {
  std::size_t timelike = 0;
  std::size_t null = 0;
  std::size_t spacelike = 0;
};

struct InversionReport {
  double original_tau = 0.0;
  double inverted_tau = 0.0;
  double negation_residual = 0.0;  // |tau + tau_inv| / operand scale of the input
  double absolute_content = 0.0;   // sum_i |dtau_i| of the input
  double operand_scale = 0.0;      // sum_i |g_tt dt_i| + |g_xx dx_i^2 / (c^2 dt_i)|
  SegmentKindCounts segment_kinds;
  double max_spatial_excursion = 0.0;
  double mean_spatial_excursion = 0.0;
  int total_halvings = 0;
  double timelike_scale = -1.0;    // per-segment target factor for nonnegative segments
};

struct InversionResult {
  PiecewisePath path;
  InversionReport report;
};

namespace detail {

inline double split_value(const SpacetimePoint& p1, const SpacetimePoint& h, const SpacetimePoint& p2,
                          const InducedMetric& m) {
  return signed_segment_internal_time(p1, h, m) + signed_segment_internal_time(h, p2, m);
}

inline double split_scale(const SpacetimePoint& p1, const SpacetimePoint& h, const SpacetimePoint& p2,
                          const InducedMetric& m, double target) {
  return segment_operand_scale(p1, h, m) + segment_operand_scale(h, p2, m) + std::abs(target);
}

// Places h on the simultaneity line t1 + a so that the two half segments sum
// to `target`. Closed form with the metric frozen at the segment midpoint,
// then secant refinement against the true midpoint-rule functional.
inline SegmentSplit split_to_target(const SpacetimePoint& p1, const SpacetimePoint& p2, const InducedMetric& metric,
                                    const InversionPolicy& policy, double target, std::size_t index) {
  policy.validate();
  const double dt = p2.t - p1.t;
  if (!(dt > 0.0)) throw SegmentError(ErrorCode::malformed_path, index, "segment must have dt > 0");
  const int dim = p1.dim;
  const double c2 = metric.constants().c * metric.constants().c;

  double ell2 = 0.0;
  Vec3 dir{};
  for (int k = 0; k < dim; ++k) {
    dir[k] = p2.x[k] - p1.x[k];
    ell2 += dir[k] * dir[k];
  }
  const double ell = std::sqrt(ell2);
  if (ell > 0.0) {
    for (int k = 0; k < dim; ++k) dir[k] /= ell;
  } else {
    dir = {1.0, 0.0, 0.0};
  }

  const auto terms = segment_terms(p1, p2, metric);
  const double g_tt = terms.g.g_tt;
  const double G = -terms.g.g_xx;
  const double straight = g_tt * dt - G * ell2 / (c2 * dt);
  const double q_target = (g_tt * dt - target) * c2 / G;
  const double q_min = ell2 / dt;

  auto place = [&](double a, double xi) {
    SpacetimePoint h;
    h.dim = dim;
    h.t = p1.t + a;
    for (int k = 0; k < dim; ++k) h.x[k] = p1.x[k] + xi * dir[k];
    return h;
  };

  double frac = policy.delta_t_fraction;
  int halvings = 0;
  for (;;) {
    const double a = frac * dt;
    const double b = dt - a;
    const double curvature = 1.0 / a + 1.0 / b;
    const double xi_v = ell * a / dt;
    double radicand = (q_target - q_min) / curvature;
    // Rounding slack measured against the operands, so null segments whose
    // target equals the straight value stay on the straight line.
    const double slack = 1e-12 * (g_tt * dt + G * ell2 / (c2 * dt)) * c2 / G / curvature;
    if (std::abs(radicand) <= slack) radicand = 0.0;
    if (radicand >= 0.0) {
      const double r = std::sqrt(radicand);
      double xi = xi_v + r;
      if (policy.root_preference == RootPreference::nearer_to_midpoint &&
          std::abs(xi_v - r - 0.5 * ell) < std::abs(xi_v + r - 0.5 * ell))
        xi = xi_v - r;

      SpacetimePoint h = place(a, xi);
      auto residual = [&](double x) { return split_value(p1, place(a, x), p2, metric) - target; };
      double f0 = residual(xi);
      const double tol = 1e-13 * split_scale(p1, h, p2, metric, target);
      if (std::abs(f0) > tol) {
        // Secant refinement for potentials that vary across the segment.
        double x0 = xi;
        double x1 = xi + (xi >= xi_v ? 1.0 : -1.0) * 1e-6 * std::max(r, std::sqrt(q_min * a) + 1e-300);
        double f1 = residual(x1);
        for (int it = 0; it < 50 && std::abs(f1) > tol; ++it) {
          if (f1 == f0) break;
          const double x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
          x0 = x1;
          f0 = f1;
          x1 = x2;
          f1 = residual(x1);
        }
        xi = x1;
        f0 = f1;
        h = place(a, xi);
      }
      if (std::abs(f0) <= 1e-10 * split_scale(p1, h, p2, metric, target)) {
        SegmentSplit s;
        s.h = h;
        s.delta_t_fraction = frac;
        s.halvings = halvings;
        s.excursion = std::abs(xi - xi_v);
        s.achieved = f0 + target;
        return s;
      }
    }
    if (halvings >= policy.max_bisection_steps || !(p1.t + 0.5 * frac * dt > p1.t)) break;
    frac *= 0.5;
    ++halvings;
  }
  std::ostringstream msg;
  msg.precision(17);
  msg << "no simultaneity-line point reaches target " << target << " after " << halvings
      << " halvings; segment internal time " << straight
      << " bounds every time-monotone two-segment refinement from above";
  throw SegmentError(ErrorCode::inversion_failure, index, msg.str());
}

}  // namespace detail

inline SegmentSplit invert_segment(const SpacetimePoint& p1, const SpacetimePoint& p2, const InducedMetric& metric,
                                   const InversionPolicy& policy = {}) {
  return detail::split_to_target(p1, p2, metric, policy, -segment_internal_time(p1, p2, metric), 0);
}

// One simultaneity point per segment, every original vertex kept.
//
// Nonnegative segments take targets lambda * dtau_i and negative segments are
// split straight (target dtau_i). lambda = -1 + 2|S_neg|/T_pos makes the
// targets sum to -tau; it equals -1 (segment-wise negation) when no segment
// is spacelike. For tau < 0 no time-monotone refinement can reach -tau, and
// segment-wise negation is attempted so the failing index is reported.
inline InversionResult invert_path(const PiecewisePath& path, const InducedMetric& metric,
                                   const InversionPolicy& policy = {}) {
  if (path.time_reversed()) throw Error(ErrorCode::malformed_path, "invert a forward-time path");
  policy.validate();
  const auto& v = path.vertices();
  const std::size_t n = path.segment_count();
  std::vector<double> dtau(n);
  detail::CompensatedSum total, positive, negative, content, operands;
  for (std::size_t i = 0; i < n; ++i) {
    dtau[i] = segment_internal_time(v[i], v[i + 1], metric);
    total.add(dtau[i]);
    content.add(std::abs(dtau[i]));
    operands.add(segment_operand_scale(v[i], v[i + 1], metric));
    (dtau[i] >= 0.0 ? positive : negative).add(dtau[i]);
  }
  const double tau = total.value();
  const double t_pos = positive.value();
  const double s_neg = negative.value();

  double lambda = -1.0;
  const bool redistribute = tau >= 0.0 && s_neg < 0.0 && t_pos > 0.0;
  if (redistribute) lambda = -1.0 + 2.0 * (-s_neg) / t_pos;

  std::vector<SpacetimePoint> out;
  out.reserve(2 * n + 1);
  out.push_back(v[0]);
  InversionReport rep;
  rep.original_tau = tau;
  rep.absolute_content = content.value();
  rep.operand_scale = operands.value();
  rep.timelike_scale = lambda;
  double excursion_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double target = -dtau[i];
    if (redistribute) target = dtau[i] >= 0.0 ? lambda * dtau[i] : dtau[i];
    const auto s = detail::split_to_target(v[i], v[i + 1], metric, policy, target, i);
    out.push_back(s.h);
    out.push_back(v[i + 1]);
    rep.total_halvings += s.halvings;
    rep.max_spatial_excursion = std::max(rep.max_spatial_excursion, s.excursion);
    excursion_sum += s.excursion;
  }
  rep.mean_spatial_excursion = n ? excursion_sum / static_cast<double>(n) : 0.0;

  PiecewisePath inverted(std::move(out));
  const auto& w = inverted.vertices();
  detail::CompensatedSum inv;
  for (std::size_t i = 1; i < w.size(); ++i) {
    inv.add(segment_internal_time(w[i - 1], w[i], metric));
    switch (classify_segment(w[i - 1], w[i], metric)) {
      case SegmentKind::Timelike: ++rep.segment_kinds.timelike; break;
      case SegmentKind::Null: ++rep.segment_kinds.null; break;
      case SegmentKind::Spacelike: ++rep.segment_kinds.spacelike; break;
    }
  }
  rep.inverted_tau = inv.value();
  const double err = std::abs(rep.inverted_tau + tau);
  rep.negation_residual = rep.operand_scale > 0.0 ? err / rep.operand_scale : err;
  return {std::move(inverted), rep};
}

struct Condition1Report {
  std::vector<InversionReport> members;
  double max_negation_residual = 0.0;
  double max_displacement = 0.0;
  double mean_displacement = 0.0;
  bool all_negated = false;
  bool closed_under_inversion = false;  // ensemble's own tau multiset is negation-symmetric
  std::vector<std::size_t> failed;      // members with no inverse image; excluded from the maxima
};

inline Condition1Report verify_condition1(const PathEnsemble& ens, const InducedMetric& metric,
                                          const InversionPolicy& policy = {}, double tolerance = 1e-9) {
  if (ens.size() == 0) throw Error(ErrorCode::insufficient_ensemble, "empty ensemble");
  if (!ens.has_paths()) throw Error(ErrorCode::insufficient_ensemble, "ensemble carries no paths to invert");
  Condition1Report r;
  r.all_negated = true;
  double sum = 0.0;
  for (std::size_t i = 0; i < ens.paths().size(); ++i) {
    InversionResult res;
    try {
      res = invert_path(ens.paths()[i], metric, policy);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::inversion_failure) throw;
      r.failed.push_back(i);
      r.all_negated = false;
      r.members.emplace_back();
      continue;
    }
    r.max_negation_residual = std::max(r.max_negation_residual, res.report.negation_residual);
    r.max_displacement = std::max(r.max_displacement, res.report.max_spatial_excursion);
    sum += res.report.mean_spatial_excursion;
    if (!(res.report.negation_residual <= tolerance)) r.all_negated = false;
    r.members.push_back(res.report);
  }
  r.mean_displacement = sum / static_cast<double>(ens.size());
  r.closed_under_inversion = is_negation_symmetric(ens.internal_times(), ens.weights(), tolerance);
  return r;
}

// The ensemble together with the image of every member; closed by construction.
inline PathEnsemble sigma_closure(const PathEnsemble& ens, const InducedMetric& metric,
                                  const InversionPolicy& policy = {}) {
  if (!ens.has_paths()) throw Error(ErrorCode::insufficient_ensemble, "ensemble carries no paths to invert");
  std::vector<PiecewisePath> paths = ens.paths();
  std::vector<double> weights = ens.weights();
  for (std::size_t i = 0; i < ens.size(); ++i) {
    paths.push_back(invert_path(ens.paths()[i], metric, policy).path);
    weights.push_back(ens.weights()[i]);
  }
  return PathEnsemble(std::move(paths), metric, std::move(weights));
}

}  // namespace itpi
