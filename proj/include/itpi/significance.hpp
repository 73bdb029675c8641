#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include "itpi/constants.hpp"
#include "itpi/detail/summation.hpp"
#include "itpi/geometry.hpp"

namespace itpi {

class PathEnsemble {
 public:
  PathEnsemble() = default;

  PathEnsemble(std::vector<PiecewisePath> paths, const InducedMetric& metric, std::vector<double> weights = {})
      : paths_(std::move(paths)) {
    for (std::size_t i = 1; i < paths_.size(); ++i) {
      if (!(paths_[i].front() == paths_[0].front()) || !(paths_[i].back() == paths_[0].back()))
        throw Error(ErrorCode::malformed_path,
                    "path " + std::to_string(i) + " does not share the ensemble endpoints");
    }
    taus_.reserve(paths_.size());
    for (const auto& p : paths_) taus_.push_back(path_internal_time(p, metric));
    set_weights(std::move(weights));
  }

  // Ensemble known only through its internal times (e.g. imported from CSV).
  static PathEnsemble from_internal_times(std::vector<double> taus, std::vector<double> weights = {}) {
    PathEnsemble e;
    for (double t : taus)
      if (!std::isfinite(t)) throw Error(ErrorCode::domain, "internal times must be finite");
    e.taus_ = std::move(taus);
    e.set_weights(std::move(weights));
    return e;
  }

  std::size_t size() const noexcept { return taus_.size(); }
  bool has_paths() const noexcept { return !paths_.empty(); }
  const std::vector<PiecewisePath>& paths() const noexcept { return paths_; }
  const std::vector<double>& internal_times() const noexcept { return taus_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  bool uniform() const noexcept { return uniform_; }

 private:
  void set_weights(std::vector<double> w) {
    const std::size_t n = taus_.size();
    if (w.empty()) {
      weights_.assign(n, n ? 1.0 / static_cast<double>(n) : 0.0);
      uniform_ = true;
      return;
    }
    if (w.size() != n) throw Error(ErrorCode::domain, "one weight per path is required");
    detail::CompensatedSum total;
    for (double x : w) {
      if (!(std::isfinite(x) && x > 0.0)) throw Error(ErrorCode::domain, "weights must be positive");
      total.add(x);
    }
    const double s = total.value();
    uniform_ = std::all_of(w.begin(), w.end(), [&](double x) { return x == w.front(); });
    for (auto& x : w) x /= s;
    weights_ = std::move(w);
  }

  std::vector<PiecewisePath> paths_;
  std::vector<double> taus_;
  std::vector<double> weights_;
  bool uniform_ = true;
};

inline std::complex<double> measure_of_equivalence(double tau1, double tau2, double omega) {
  return std::polar(1.0, omega * (tau1 - tau2));
}

namespace detail {

inline void require_pair(const PathEnsemble& ens) {
  if (ens.size() < 2) throw Error(ErrorCode::insufficient_ensemble, "at least two paths are required");
}

// Sum_j w_j e^{i omega tau_j} with compensation.
inline std::complex<double> weighted_phase_sum(const PathEnsemble& ens, double omega) {
  ComplexSum s;
  const auto& t = ens.internal_times();
  const auto& w = ens.weights();
  for (std::size_t j = 0; j < t.size(); ++j) s.add(w[j] * std::polar(1.0, omega * t[j]));
  return s.value();
}

}  // namespace detail

// Weighted form: sum_{j != i} w_j e^{i omega (tau_i - tau_j)} / sum_{j != i} w_j.
// Uniform weights give the plain 1/(n-1) average.
inline std::complex<double> path_significance(std::size_t i, const PathEnsemble& ens, double omega) {
  detail::require_pair(ens);
  if (i >= ens.size()) throw Error(ErrorCode::domain, "path index out of range");
  const auto& t = ens.internal_times();
  const auto& w = ens.weights();
  detail::ComplexSum s;
  detail::CompensatedSum wsum;
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (j == i) continue;
    s.add(w[j] * measure_of_equivalence(t[i], t[j], omega));
    wsum.add(w[j]);
  }
  return s.value() / wsum.value();
}

// Sum_i w_i W(gamma_i); O(n) through the total phase sum.
inline std::complex<double> ensemble_significance(const PathEnsemble& ens, double omega) {
  detail::require_pair(ens);
  const auto& t = ens.internal_times();
  const auto& w = ens.weights();
  const std::complex<double> total = detail::weighted_phase_sum(ens, omega);
  detail::ComplexSum s;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto zi = std::polar(1.0, omega * t[i]);
    const auto others = std::conj(total) - w[i] * std::conj(zi);
    s.add(w[i] * zi * others / (1.0 - w[i]));
  }
  return s.value();
}

// Sum_{i != j} e^{i omega (tau_i - tau_j)} through |Sum_i e^{i omega tau_i}|^2 - n.
inline double off_diagonal_phase_sum(const std::vector<double>& taus, double omega) {
  detail::ComplexSum s;
  for (double t : taus) s.add(std::polar(1.0, omega * t));
  return std::norm(s.value()) - static_cast<double>(taus.size());
}

inline double significance_modulus(std::complex<double> amplitude) { return std::norm(amplitude); }

// |Sum_i w_i e^{i omega tau_i}|^2, the squared modulus of the mean phase.
inline double significance_modulus(const PathEnsemble& ens, double omega) {
  return std::norm(detail::weighted_phase_sum(ens, omega));
}

// True when the weighted multiset of internal times is symmetric under
// negation: each tau pairs with a distinct -tau of equal weight.
inline bool is_negation_symmetric(const std::vector<double>& taus, const std::vector<double>& weights,
                                  double tolerance) {
  const std::size_t n = taus.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return taus[a] < taus[b]; });
  double scale = 0.0;
  for (double t : taus) scale = std::max(scale, std::abs(t));
  const double tol = tolerance * std::max(scale, 1.0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t a = idx[k], b = idx[n - 1 - k];
    if (std::abs(taus[a] + taus[b]) > tol) return false;
    if (std::abs(weights[a] - weights[b]) > tolerance * std::max(weights[a], weights[b])) return false;
  }
  return true;
}

struct FactorizedSignificance {
  std::complex<double> value;
  int sign = +1;  // orientation of the path measure; only |value| is observable
};

inline FactorizedSignificance factorized_significance(const PathEnsemble& ens, double omega,
                                                      double closure_tolerance = 1e-12, int sign = +1) {
  if (ens.size() == 0) throw Error(ErrorCode::insufficient_ensemble, "empty ensemble");
  if (!is_negation_symmetric(ens.internal_times(), ens.weights(), closure_tolerance))
    throw Error(ErrorCode::not_time_invertible, "internal-time multiset is not symmetric under negation");
  const auto m = detail::weighted_phase_sum(ens, omega);
  return {static_cast<double>(sign) * m * m, sign};
}

}  // namespace itpi
