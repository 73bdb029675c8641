#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "itpi/constants.hpp"
#include "itpi/error.hpp"

namespace itpi {

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b, int dim) noexcept {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += a[k] * b[k];
  return s;
}

inline Vec3 sub(const Vec3& a, const Vec3& b) noexcept {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

struct SpacetimePoint {
  double t = 0.0;
  Vec3 x{};
  int dim = 1;

  static SpacetimePoint make(double t, std::initializer_list<double> xs) {
    if (xs.size() < 1 || xs.size() > 3)
      throw Error(ErrorCode::malformed_path, "spatial dimension must be 1, 2 or 3");
    SpacetimePoint p;
    p.t = t;
    p.dim = static_cast<int>(xs.size());
    std::size_t k = 0;
    for (double v : xs) p.x[k++] = v;
    return p;
  }

  bool finite() const noexcept {
    if (!std::isfinite(t)) return false;
    for (int k = 0; k < dim; ++k)
      if (!std::isfinite(x[k])) return false;
    return true;
  }

  friend bool operator==(const SpacetimePoint& a, const SpacetimePoint& b) noexcept {
    if (a.dim != b.dim || a.t != b.t) return false;
    for (int k = 0; k < a.dim; ++k)
      if (a.x[k] != b.x[k]) return false;
    return true;
  }
};

inline SpacetimePoint midpoint(const SpacetimePoint& a, const SpacetimePoint& b) noexcept {
  SpacetimePoint m;
  m.dim = a.dim;
  m.t = 0.5 * (a.t + b.t);
  for (int k = 0; k < a.dim; ++k) m.x[k] = 0.5 * (a.x[k] + b.x[k]);
  return m;
}

class PiecewisePath {
 public:
  PiecewisePath() = default;

  // Forward paths need strictly increasing t. A time-reversed path is the
  // tagged output of reverse_path and needs strictly decreasing t.
  explicit PiecewisePath(std::vector<SpacetimePoint> vertices, bool time_reversed = false)
      : vertices_(std::move(vertices)), time_reversed_(time_reversed) {
    if (vertices_.size() < 2)
      throw Error(ErrorCode::malformed_path, "a path needs at least two vertices");
    const int d = vertices_.front().dim;
    if (d < 1 || d > 3) throw Error(ErrorCode::malformed_path, "spatial dimension must be 1, 2 or 3");
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
      const auto& v = vertices_[i];
      if (v.dim != d)
        throw Error(ErrorCode::malformed_path, "vertex " + std::to_string(i) + " has mismatched dimension");
      if (!v.finite())
        throw Error(ErrorCode::malformed_path, "vertex " + std::to_string(i) + " is not finite");
      if (i == 0) continue;
      const double dt = v.t - vertices_[i - 1].t;
      if (time_reversed_ ? !(dt < 0.0) : !(dt > 0.0))
        throw SegmentError(ErrorCode::malformed_path, i - 1,
                           time_reversed_ ? "time-reversed path must have dt < 0"
                                          : "coordinate time must increase strictly");
    }
  }

  const std::vector<SpacetimePoint>& vertices() const noexcept { return vertices_; }
  const SpacetimePoint& front() const { return vertices_.front(); }
  const SpacetimePoint& back() const { return vertices_.back(); }
  std::size_t segment_count() const noexcept { return vertices_.empty() ? 0 : vertices_.size() - 1; }
  bool time_reversed() const noexcept { return time_reversed_; }
  int dim() const noexcept { return vertices_.empty() ? 0 : vertices_.front().dim; }

 private:
  std::vector<SpacetimePoint> vertices_;
  bool time_reversed_ = false;
};

inline PiecewisePath concatenate(const PiecewisePath& a, const PiecewisePath& b) {
  if (a.time_reversed() != b.time_reversed() || !(a.back() == b.front()))
    throw Error(ErrorCode::malformed_path, "concatenated paths must meet at a shared vertex");
  auto v = a.vertices();
  v.insert(v.end(), b.vertices().begin() + 1, b.vertices().end());
  return PiecewisePath(std::move(v), a.time_reversed());
}

// Potentials are static: they depend on position (and, for the
// velocity-dependent form, on the segment velocity) but not on t.
struct UniformPotential {
  double phi0 = 0.0;
};

struct WeakGravity {
  double GM = 0.0;
  Vec3 center{};
};

// Induced electrostatic potential seen by a unit moving with launch speed u.
struct InducedCoulomb {
  double Q = 0.0;
  double e = 0.0;
  double m_e = 1.0;
  double u = 0.0;
  Vec3 center{};
};

struct VelocityDependent {
  std::function<double(const Vec3&)> scalar;
  std::function<Vec3(const Vec3&)> vector;
  double e = 1.0;
  double m_e = 1.0;
};

using Potential = std::variant<UniformPotential, WeakGravity, InducedCoulomb, VelocityDependent>;

inline double induced_coulomb_strength(const InducedCoulomb& p, const PhysicalConstants& k) {
  const double b = p.u / k.c;
  return k.k_e * p.Q * p.e * std::sqrt((1.0 - b) * (1.0 + b)) / p.m_e;
}

inline double velocity_dependent_value(const VelocityDependent& p, const Vec3& x, const Vec3& v,
                                       int dim, const PhysicalConstants& k) {
  double phi = p.scalar ? p.scalar(x) : 0.0;
  double av = 0.0;
  if (p.vector) av = dot(p.vector(x), v, dim);
  return (-p.e * phi + (p.e / k.c) * av) / p.m_e;
}

// Raw potential value without the admissibility check.
inline double evaluate_potential(const Potential& pot, const Vec3& x, const Vec3& v, int dim,
                                 const PhysicalConstants& k) {
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, UniformPotential>) {
          return p.phi0;
        } else if constexpr (std::is_same_v<T, WeakGravity>) {
          const double r = std::sqrt(dot(sub(x, p.center), sub(x, p.center), dim));
          if (!(r > 0.0)) throw Error(ErrorCode::domain, "potential evaluated at the source center");
          return -p.GM / r;
        } else if constexpr (std::is_same_v<T, InducedCoulomb>) {
          const double r = std::sqrt(dot(sub(x, p.center), sub(x, p.center), dim));
          if (!(r > 0.0)) throw Error(ErrorCode::domain, "potential evaluated at the source center");
          return induced_coulomb_strength(p, k) / r;
        } else {
          return velocity_dependent_value(p, x, v, dim, k);
        }
      },
      pot);
}

struct MetricCoefficients {
  double g_tt = 1.0;
  double g_xx = -1.0;
};

class InducedMetric {
 public:
  InducedMetric() = default;

  explicit InducedMetric(Potential potential, PhysicalConstants constants = {},
                         double weak_field_bound = 1e-3)
      : potential_(std::move(potential)), constants_(constants), bound_(weak_field_bound) {
    constants_.validate();
    if (!(bound_ > 0.0 && bound_ < 1.0))
      throw Error(ErrorCode::domain, "weak-field bound must lie in (0, 1)");
    if (const auto* vd = std::get_if<VelocityDependent>(&potential_)) {
      if (!(vd->m_e > 0.0)) throw Error(ErrorCode::domain, "m_e must be positive");
    }
    if (const auto* ic = std::get_if<InducedCoulomb>(&potential_)) {
      if (!(ic->m_e > 0.0)) throw Error(ErrorCode::domain, "m_e must be positive");
      lorentz_factor(ic->u, constants_.c);
    }
  }

  static InducedMetric flat(PhysicalConstants constants = {}) {
    return InducedMetric(UniformPotential{0.0}, constants);
  }

  const Potential& potential() const noexcept { return potential_; }
  const PhysicalConstants& constants() const noexcept { return constants_; }
  double weak_field_bound() const noexcept { return bound_; }

  bool is_flat() const noexcept {
    const auto* u = std::get_if<UniformPotential>(&potential_);
    return u && u->phi0 == 0.0;
  }

  bool is_uniform() const noexcept { return std::holds_alternative<UniformPotential>(potential_); }

  // Potential at a point for a given segment velocity, with the
  // admissibility check |2 Phi / c^2| < bound.
  double potential_at(const Vec3& x, const Vec3& v, int dim) const {
    const double phi = evaluate_potential(potential_, x, v, dim, constants_);
    const double c2 = constants_.c * constants_.c;
    if (!(std::abs(2.0 * phi / c2) < bound_))
      throw Error(ErrorCode::weak_field, "|2 Phi / c^2| = " + std::to_string(std::abs(2.0 * phi / c2)) +
                                              " exceeds the weak-field bound");
    return phi;
  }

  MetricCoefficients coefficients(double phi) const noexcept {
    const double r = 2.0 * phi / (constants_.c * constants_.c);
    return {1.0 + r, -(1.0 - r)};
  }

 private:
  Potential potential_ = UniformPotential{0.0};
  PhysicalConstants constants_{};
  double bound_ = 1e-3;
};

enum class SegmentKind { Timelike, Null, Spacelike };

inline const char* to_string(SegmentKind k) noexcept {
  switch (k) {
    case SegmentKind::Timelike: return "timelike";
    case SegmentKind::Null: return "null";
    case SegmentKind::Spacelike: return "spacelike";
  }
  return "unknown";
}

namespace detail {

struct SegmentTerms {
  double dt = 0.0;
  double dx2 = 0.0;
  MetricCoefficients g{};
};

inline SegmentTerms segment_terms(const SpacetimePoint& p1, const SpacetimePoint& p2,
                                  const InducedMetric& metric) {
  if (p1.dim != p2.dim) throw Error(ErrorCode::malformed_path, "segment endpoints differ in dimension");
  SegmentTerms s;
  s.dt = p2.t - p1.t;
  Vec3 v{};
  Vec3 mid{};
  for (int k = 0; k < p1.dim; ++k) {
    const double dx = p2.x[k] - p1.x[k];
    s.dx2 += dx * dx;
    v[k] = dx / s.dt;
    mid[k] = 0.5 * (p1.x[k] + p2.x[k]);
  }
  s.g = metric.coefficients(metric.potential_at(mid, v, p1.dim));
  return s;
}

// Valid for either sign of dt; reversed segments reuse the same midpoint and
// velocity, so their value is exactly the negation of the forward one.
inline double signed_segment_internal_time(const SpacetimePoint& p1, const SpacetimePoint& p2,
                                           const InducedMetric& metric) {
  const auto s = segment_terms(p1, p2, metric);
  const double c2 = metric.constants().c * metric.constants().c;
  return s.g.g_tt * s.dt + s.g.g_xx * s.dx2 / (c2 * s.dt);
}

}  // namespace detail

// |g_tt dt| + |g_xx dx^2 / (c^2 dt)|: the size of the two terms that cancel
// in a near-null segment, hence the scale of its rounding error.
inline double segment_operand_scale(const SpacetimePoint& p1, const SpacetimePoint& p2,
                                    const InducedMetric& metric) {
  const auto s = detail::segment_terms(p1, p2, metric);
  const double c2 = metric.constants().c * metric.constants().c;
  return std::abs(s.g.g_tt * s.dt) + std::abs(s.g.g_xx * s.dx2 / (c2 * s.dt));
}

inline double path_operand_scale(const PiecewisePath& path, const InducedMetric& metric) {
  const auto& v = path.vertices();
  double s = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) s += segment_operand_scale(v[i - 1], v[i], metric);
  return s;
}

inline double segment_internal_time(const SpacetimePoint& p1, const SpacetimePoint& p2,
                                    const InducedMetric& metric) {
  if (!(p2.t - p1.t > 0.0))
    throw Error(ErrorCode::malformed_path, "segment must have dt > 0");
  return detail::signed_segment_internal_time(p1, p2, metric);
}

inline double path_internal_time(const PiecewisePath& path, const InducedMetric& metric) {
  const auto& v = path.vertices();
  double sum = 0.0, comp = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double d = path.time_reversed() ? detail::signed_segment_internal_time(v[i - 1], v[i], metric)
                                          : segment_internal_time(v[i - 1], v[i], metric);
    const double t = sum + d;
    comp += std::abs(sum) >= std::abs(d) ? (sum - t) + d : (d - t) + sum;
    sum = t;
  }
  return sum + comp;
}

inline PiecewisePath reverse_path(const PiecewisePath& path) {
  std::vector<SpacetimePoint> v(path.vertices().rbegin(), path.vertices().rend());
  return PiecewisePath(std::move(v), !path.time_reversed());
}

inline SegmentKind classify_segment(const SpacetimePoint& p1, const SpacetimePoint& p2,
                                    const InducedMetric& metric, double null_tolerance = 1e-12) {
  if (p2.t == p1.t) throw Error(ErrorCode::malformed_path, "segment must have dt != 0");
  const auto s = detail::segment_terms(p1, p2, metric);
  const double c2dt2 = metric.constants().c * metric.constants().c * s.dt * s.dt;
  const double interval = s.g.g_tt * c2dt2 + s.g.g_xx * s.dx2;
  if (std::abs(interval) <= null_tolerance * c2dt2) return SegmentKind::Null;
  return interval > 0.0 ? SegmentKind::Timelike : SegmentKind::Spacelike;
}

}  // namespace itpi
