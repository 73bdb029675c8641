#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "itpi/constants.hpp"
#include "itpi/detail/summation.hpp"
#include "itpi/geometry.hpp"

namespace itpi {

struct MatchingFrame {
  double u = 0.0;
  Vec3 direction{1.0, 0.0, 0.0};

  // Unit direction restricted to the first `dim` axes.
  Vec3 unit_direction(int dim) const {
    double n2 = 0.0;
    for (int k = 0; k < dim; ++k) n2 += direction[k] * direction[k];
    if (!(n2 > 0.0) || !std::isfinite(n2))
      throw Error(ErrorCode::domain, "boost direction must be a nonzero vector in the path's space");
    const double n = std::sqrt(n2);
    Vec3 d{};
    for (int k = 0; k < dim; ++k) d[k] = direction[k] / n;
    return d;
  }
};

struct PhaseArgument {
  double value = 0.0;
};

inline SpacetimePoint boost_point(const SpacetimePoint& p, const MatchingFrame& frame, double c) {
  const double eps = lorentz_factor(frame.u, c);
  const Vec3 n = frame.unit_direction(p.dim);
  const double par = dot(p.x, n, p.dim);
  SpacetimePoint q = p;
  q.t = eps * (p.t - frame.u * par / (c * c));
  const double par_new = eps * (par - frame.u * p.t);
  for (int k = 0; k < p.dim; ++k) q.x[k] = p.x[k] + (par_new - par) * n[k];
  return q;
}

// Boosted vertices without the monotonicity requirement.
inline std::vector<SpacetimePoint> boost_vertices(const PiecewisePath& path, const MatchingFrame& frame,
                                                  double c) {
  std::vector<SpacetimePoint> out;
  out.reserve(path.vertices().size());
  for (const auto& p : path.vertices()) out.push_back(boost_point(p, frame, c));
  return out;
}

inline std::optional<std::size_t> first_reordered_segment(const std::vector<SpacetimePoint>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i].t - v[i - 1].t > 0.0)) return i - 1;
  return std::nullopt;
}

inline PiecewisePath boost_path(const PiecewisePath& path, const MatchingFrame& frame, double c) {
  auto v = boost_vertices(path, frame, c);
  if (!path.time_reversed()) {
    if (auto bad = first_reordered_segment(v))
      throw SegmentError(ErrorCode::boost_reorder, *bad, "boosted segment has dt' <= 0");
  }
  return PiecewisePath(std::move(v), path.time_reversed());
}

inline PhaseArgument phase_argument(const PiecewisePath& path, const InducedMetric& metric, double omega) {
  return {omega * path_internal_time(path, metric)};
}

struct InvarianceReport {
  double rest_phase = 0.0;       // omega_0 times the rest-frame functional
  double matching_phase = 0.0;   // omega_u times the functional in the matching parametrization
  double residual = 0.0;
  double relative_residual = 0.0;
  // Diagnostic only: omega_u times the functional re-evaluated against the
  // boosted coordinate time. Agrees with rest_phase for at-rest segments and
  // is absent when the boost reorders a segment.
  std::optional<double> coordinate_time_phase;
  std::optional<std::size_t> reordered_segment;
};

// The matching-frame phase is accumulated term by term: each segment's
// invariant interval ds^2 is taken from the boosted coordinates and its time
// increment is the matching parametrization dt' = eps * dt.
inline InvarianceReport check_invariance(const PiecewisePath& path, const InternalClock& clock,
                                         const MatchingFrame& frame, const InducedMetric& metric) {
  if (!metric.is_flat()) throw Error(ErrorCode::domain, "invariance is checked for the flat functional only");
  const auto& k = metric.constants();
  if (!(std::abs(frame.u) <= 0.9 * k.c)) throw Error(ErrorCode::domain, "|u| must not exceed 0.9 c");
  const double c2 = k.c * k.c;
  const double eps = lorentz_factor(frame.u, k.c);
  const double omega0 = rest_frequency(clock, k);
  const double omega_u = boosted_frequency(omega0, frame.u, k.c);

  InvarianceReport r;
  r.rest_phase = omega0 * path_internal_time(path, metric);

  const auto& v = path.vertices();
  const auto b = boost_vertices(path, frame, k.c);
  r.reordered_segment = first_reordered_segment(b);
  detail::CompensatedSum matching, coordinate;
  double scale = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double dtp = b[i].t - b[i - 1].t;
    double dx2 = 0.0;
    for (int d = 0; d < b[i].dim; ++d) {
      const double dx = b[i].x[d] - b[i - 1].x[d];
      dx2 += dx * dx;
    }
    const double ds2 = dtp * dtp - dx2 / c2;
    const double dt_match = eps * (v[i].t - v[i - 1].t);
    matching.add(ds2 / dt_match);
    coordinate.add(ds2 / dtp);
    scale += (dtp * dtp + dx2 / c2) / std::abs(dt_match);
  }
  r.matching_phase = omega_u * matching.value();
  if (!r.reordered_segment && !path.time_reversed()) r.coordinate_time_phase = omega_u * coordinate.value();
  r.residual = std::abs(r.matching_phase - r.rest_phase);
  // Operand scale: the two boosted terms cancel for near-null segments.
  const double denom = std::max(std::abs(r.rest_phase), std::abs(omega_u) * scale);
  r.relative_residual = denom > 0.0 ? r.residual / denom : 0.0;
  return r;
}

inline InvarianceReport check_invariance(const PiecewisePath& path, const InternalClock& clock, double u,
                                         const InducedMetric& metric) {
  return check_invariance(path, clock, MatchingFrame{u, {1.0, 0.0, 0.0}}, metric);
}

}  // namespace itpi
