#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "itpi/detail/parallel.hpp"
#include "itpi/detail/summation.hpp"
#include "itpi/geometry.hpp"
#include "itpi/propagator.hpp"

namespace itpi {

enum class Proposal { gaussian_bridge, uniform_lattice };

struct SamplerSpec {
  std::size_t n_samples = 100000;
  std::uint64_t seed = 0;
  Proposal proposal = Proposal::gaussian_bridge;
  double sigma = 1.0;  // per-step bridge scale

  void validate() const {
    if (n_samples < 1) throw Error(ErrorCode::config, "n_samples must be at least 1");
    if (!(std::isfinite(sigma) && sigma > 0.0)) throw Error(ErrorCode::config, "sigma must be positive");
  }
};

// Source spread along `direction` with amplitude exp(-s^2 / (4 width^2)),
// sampled from its own squared modulus.
struct GaussianAperture {
  Vec3 direction{0.0, 1.0, 0.0};
  double width = 1.0;
};

struct BridgeOptions {
  std::array<bool, 3> fluctuating{true, true, true};  // axes that receive bridge noise
  std::optional<GaussianAperture> aperture;
  unsigned workers = 1;
  std::size_t block_size = 4096;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream per block, so the result never depends on the worker count.
inline std::mt19937_64 block_stream(std::uint64_t seed, std::size_t block) {
  std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(seed) >> 32), static_cast<std::uint32_t>(splitmix64(seed)),
                    static_cast<std::uint32_t>(splitmix64(seed ^ (0xa5a5a5a5ULL + block)) >> 32),
                    static_cast<std::uint32_t>(block)};
  return std::mt19937_64(seq);
}

struct SiteMoments {
  ComplexSum sum;
  CompensatedSum sum_re2;
  CompensatedSum sum_im2;
  CompensatedSum sum_abs;
  CompensatedSum sum_abs2;

  void add(cplx z) {
    sum.add(z);
    sum_re2.add(z.real() * z.real());
    sum_im2.add(z.imag() * z.imag());
    const double a = std::abs(z);
    sum_abs.add(a);
    sum_abs2.add(a * a);
  }

  void merge(const SiteMoments& o) {
    sum.merge(o.sum);
    sum_re2.merge(o.sum_re2);
    sum_im2.merge(o.sum_im2);
    sum_abs.merge(o.sum_abs);
    sum_abs2.merge(o.sum_abs2);
  }
};

inline void finish_field(AmplitudeField& f, const std::vector<SiteMoments>& m, std::size_t n) {
  const double nn = static_cast<double>(n);
  f.values.resize(m.size());
  f.standard_error.resize(m.size());
  double total_abs = 0.0, total_abs2 = 0.0;
  for (std::size_t j = 0; j < m.size(); ++j) {
    const cplx mean = m[j].sum.value() / nn;
    const double var_re = std::max(0.0, m[j].sum_re2.value() / nn - mean.real() * mean.real());
    const double var_im = std::max(0.0, m[j].sum_im2.value() / nn - mean.imag() * mean.imag());
    f.values[j] = mean;
    f.standard_error[j] = n > 1 ? std::sqrt((var_re + var_im) * nn / (nn - 1.0) / nn) : 0.0;
    total_abs += m[j].sum_abs.value();
    total_abs2 += m[j].sum_abs2.value();
  }
  const double ess = total_abs2 > 0.0 ? total_abs * total_abs / total_abs2 : 0.0;
  if (!(ess > 0.0) || !std::isfinite(ess)) throw Error(ErrorCode::diagnostics, "zero effective sample size");
}

}  // namespace detail

// Brownian-bridge estimate of the internal time path integral from A to each
// target. The bridge law is the path measure, so every sample has unit weight
// and the estimate is the sample mean of e^{i omega tau}. All targets share
// the same noise draws.
inline AmplitudeField propagate_monte_carlo(const SpacetimePoint& A, const std::vector<SpacetimePoint>& targets,
                                            int n_steps, const InducedMetric& metric, double omega,
                                            const SamplerSpec& sampler, const BridgeOptions& opt = {}) {
  sampler.validate();
  if (n_steps < 1) throw Error(ErrorCode::config, "n_steps must be at least 1");
  if (sampler.proposal != Proposal::gaussian_bridge)
    throw Error(ErrorCode::config, "continuum sampling uses the gaussian-bridge proposal");
  if (targets.empty()) throw Error(ErrorCode::config, "no target sites");
  const int dim = A.dim;
  if (dim < 1 || dim > 2) throw Error(ErrorCode::config, "Monte Carlo mode supports d = 1 or 2");
  const double T = targets.front().t - A.t;
  for (const auto& b : targets)
    if (b.dim != dim || b.t != targets.front().t || !(b.t > A.t))
      throw Error(ErrorCode::config, "targets must share one later time slice and the source dimension");
  if (opt.block_size == 0) throw Error(ErrorCode::config, "block_size must be positive");

  Vec3 ap_dir{};
  if (opt.aperture) {
    double n2 = 0.0;
    for (int d = 0; d < dim; ++d) n2 += opt.aperture->direction[d] * opt.aperture->direction[d];
    if (!(n2 > 0.0) || !(opt.aperture->width > 0.0)) throw Error(ErrorCode::config, "invalid aperture");
    for (int d = 0; d < dim; ++d) ap_dir[d] = opt.aperture->direction[d] / std::sqrt(n2);
  }

  const std::size_t n_targets = targets.size();
  const std::size_t n_blocks = (sampler.n_samples + opt.block_size - 1) / opt.block_size;
  std::vector<std::vector<detail::SiteMoments>> blocks(n_blocks);
  const double dt = T / n_steps;

  detail::parallel_blocks(n_blocks, opt.workers, [&](std::size_t b) {
    auto rng = detail::block_stream(sampler.seed, b);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto& acc = blocks[b];
    acc.assign(n_targets, {});
    const std::size_t begin = b * opt.block_size;
    const std::size_t end = std::min(sampler.n_samples, begin + opt.block_size);
    std::vector<std::array<double, 3>> eta(static_cast<std::size_t>(n_steps) + 1);
    std::vector<SpacetimePoint> verts(static_cast<std::size_t>(n_steps) + 1);
    for (std::size_t s = begin; s < end; ++s) {
      SpacetimePoint start = A;
      if (opt.aperture) {
        const double off = std::sqrt(2.0) * opt.aperture->width * normal(rng);
        for (int d = 0; d < dim; ++d) start.x[d] += off * ap_dir[d];
      }
      for (int d = 0; d < dim; ++d) {
        double w = 0.0;
        eta[0][d] = 0.0;
        for (int k = 1; k <= n_steps; ++k) {
          w += opt.fluctuating[d] ? sampler.sigma * normal(rng) : 0.0;
          eta[static_cast<std::size_t>(k)][d] = w;
        }
        for (int k = 1; k < n_steps; ++k) eta[static_cast<std::size_t>(k)][d] -= w * k / n_steps;
        eta[static_cast<std::size_t>(n_steps)][d] = 0.0;
      }
      for (std::size_t j = 0; j < n_targets; ++j) {
        const auto& B = targets[j];
        for (int k = 0; k <= n_steps; ++k) {
          auto& v = verts[static_cast<std::size_t>(k)];
          v.dim = dim;
          const double f = static_cast<double>(k) / n_steps;
          v.t = k == n_steps ? B.t : A.t + dt * k;
          for (int d = 0; d < dim; ++d)
            v.x[d] = k == n_steps ? B.x[d]
                                  : start.x[d] + f * (B.x[d] - start.x[d]) + eta[static_cast<std::size_t>(k)][d];
        }
        double tau = 0.0;
        for (int k = 1; k <= n_steps; ++k)
          tau += segment_internal_time(verts[static_cast<std::size_t>(k - 1)], verts[static_cast<std::size_t>(k)], metric);
        acc[j].add(std::polar(1.0, omega * tau));
      }
    }
  });

  std::vector<detail::SiteMoments> total(n_targets);
  for (const auto& blk : blocks)
    for (std::size_t j = 0; j < n_targets; ++j) total[j].merge(blk[j]);

  AmplitudeField f;
  f.origin = A;
  f.total_time = T;
  f.x.resize(n_targets);
  const int axis = dim == 2 ? 1 : 0;
  for (std::size_t j = 0; j < n_targets; ++j) f.x[j] = targets[j].x[axis];
  detail::finish_field(f, total, sampler.n_samples);
  return f;
}

// Uniform-lattice proposal over interior sites. The weight n^(N-1) times the
// product of normalized hop weights and taper masks makes the estimator
// unbiased for the transfer-matrix contraction with the same normalization.
inline AmplitudeField propagate_monte_carlo_lattice(const LatticeSpec& spec, const InducedMetric& metric, double omega,
                                                    const LatticeNormalization& norm, const SamplerSpec& sampler,
                                                    unsigned workers = 1, std::size_t block_size = 4096) {
  spec.validate();
  sampler.validate();
  if (block_size == 0) throw Error(ErrorCode::config, "block_size must be positive");
  const std::size_t n = static_cast<std::size_t>(spec.n_sites);
  const int N = spec.n_slices;
  const auto mask = spec.taper_mask();
  std::vector<cplx> hop;
  if (spec.hop_rule != HopRule::point) hop = build_hop_matrix(spec, metric, omega, workers);
  const double volume = std::pow(static_cast<double>(n), N - 1);
  const double prefactor = volume * norm.global_scale * std::pow(norm.row_factor, N);
  const int src = spec.source_index();

  const std::size_t n_blocks = (sampler.n_samples + block_size - 1) / block_size;
  std::vector<std::vector<detail::SiteMoments>> blocks(n_blocks);
  detail::parallel_blocks(n_blocks, workers, [&](std::size_t b) {
    auto rng = detail::block_stream(sampler.seed, b);
    std::uniform_int_distribution<int> pick(0, spec.n_sites - 1);
    auto& acc = blocks[b];
    acc.assign(n, {});
    std::vector<int> path(static_cast<std::size_t>(N) + 1);
    const std::size_t begin = b * block_size;
    const std::size_t end = std::min(sampler.n_samples, begin + block_size);
    for (std::size_t s = begin; s < end; ++s) {
      path[0] = src;
      for (int k = 1; k < N; ++k) path[static_cast<std::size_t>(k)] = pick(rng);
      // Shared prefix over the interior slices.
      cplx prefix = prefactor;
      double tau_prefix = 0.0;
      for (int k = 1; k < N; ++k) {
        const int i = path[static_cast<std::size_t>(k - 1)], j = path[static_cast<std::size_t>(k)];
        prefix *= mask[static_cast<std::size_t>(j)];
        if (spec.hop_rule == HopRule::point)
          tau_prefix += detail::lattice_segment_tau(spec.site(i), spec.site(j), spec.t0 + (k - 1) * spec.dt, spec.dt, metric);
        else
          prefix *= hop[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)];
      }
      const int last = path[static_cast<std::size_t>(N - 1)];
      for (std::size_t j = 0; j < n; ++j) {
        cplx w = prefix * mask[j];
        if (spec.hop_rule == HopRule::point) {
          const double tau = tau_prefix + detail::lattice_segment_tau(spec.site(last), spec.site(static_cast<int>(j)),
                                                                      spec.t0 + (N - 1) * spec.dt, spec.dt, metric);
          w *= std::polar(1.0, omega * tau);
        } else {
          w *= hop[static_cast<std::size_t>(last) * n + j];
        }
        acc[j].add(w);
      }
    }
  });

  std::vector<detail::SiteMoments> total(n);
  for (const auto& blk : blocks)
    for (std::size_t j = 0; j < n; ++j) total[j].merge(blk[j]);
  AmplitudeField f;
  f.origin = SpacetimePoint::make(spec.t0, {spec.source_x});
  f.total_time = spec.total_time();
  f.normalization = norm;
  f.x.resize(n);
  for (int i = 0; i < spec.n_sites; ++i) f.x[static_cast<std::size_t>(i)] = spec.site(i);
  detail::finish_field(f, total, sampler.n_samples);
  return f;
}

}  // namespace itpi
