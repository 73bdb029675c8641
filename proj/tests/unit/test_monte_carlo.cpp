#include <cmath>

#include <gtest/gtest.h>

#include "itpi/monte_carlo.hpp"
#include "support.hpp"

using namespace itpi;

namespace {
const auto k = test::unit_constants();
const auto flat = InducedMetric::flat(k);

std::vector<SpacetimePoint> line_targets(double T, std::initializer_list<double> xs) {
  std::vector<SpacetimePoint> v;
  for (double x : xs) v.push_back(SpacetimePoint::make(T, {x}));
  return v;
}
}  // namespace

TEST(Bridge, DegenerateBridgeGivesStraightPhase) {
  SamplerSpec s;
  s.n_samples = 1;
  s.sigma = 1e-300;
  const auto A = SpacetimePoint::make(0, {0});
  const auto f = propagate_monte_carlo(A, line_targets(2.0, {0.0, 0.5, 3.0}), 8, flat, 0.7, s);
  for (std::size_t j = 0; j < 3; ++j) {
    const PiecewisePath straight({A, SpacetimePoint::make(2.0, {f.x[j]})});
    EXPECT_NEAR(std::abs(f.values[j] - std::polar(1.0, 0.7 * path_internal_time(straight, flat))), 0.0, 1e-14);
  }
}

TEST(Bridge, FreeCaseMatchesClosedFormExpectation) {
  SamplerSpec s;
  s.n_samples = 40000;
  s.seed = 5;
  s.sigma = 0.3;
  const int N = 6;
  const double T = 1.5, w = 0.5;
  const auto f = propagate_monte_carlo(SpacetimePoint::make(0, {0}), line_targets(T, {0.0, 0.4, -1.0}), N, flat, w, s);
  for (std::size_t j = 0; j < 3; ++j) {
    const auto ref = oracle::free_bridge_expectation(w, 1.0, T, N, s.sigma, 1, f.x[j] * f.x[j]);
    EXPECT_LT(std::abs(f.values[j] - ref), 4.0 * f.standard_error[j]) << "site " << j;
  }
}

TEST(Bridge, TwoDimensionalFreeCase) {
  SamplerSpec s;
  s.n_samples = 40000;
  s.seed = 6;
  s.sigma = 0.2;
  const int N = 5;
  const double T = 1.0, w = 0.5;
  std::vector<SpacetimePoint> t{SpacetimePoint::make(T, {0.3, -0.2})};
  const auto f = propagate_monte_carlo(SpacetimePoint::make(0, {0, 0}), t, N, flat, w, s);
  const auto ref = oracle::free_bridge_expectation(w, 1.0, T, N, s.sigma, 2, 0.13);
  EXPECT_LT(std::abs(f.values[0] - ref), 4.0 * f.standard_error[0]);
  EXPECT_DOUBLE_EQ(f.x[0], -0.2);
}

TEST(Bridge, ReproducibleAndWorkerIndependent) {
  SamplerSpec s;
  s.n_samples = 10000;
  s.seed = 77;
  s.sigma = 0.3;
  BridgeOptions one, many;
  one.block_size = many.block_size = 1000;
  many.workers = 3;
  const auto targets = line_targets(1.0, {0.0, 0.5});
  const auto a = propagate_monte_carlo(SpacetimePoint::make(0, {0}), targets, 4, flat, 0.5, s, one);
  const auto b = propagate_monte_carlo(SpacetimePoint::make(0, {0}), targets, 4, flat, 0.5, s, one);
  const auto c = propagate_monte_carlo(SpacetimePoint::make(0, {0}), targets, 4, flat, 0.5, s, many);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.values, c.values);
  EXPECT_EQ(a.standard_error, c.standard_error);
  s.seed = 78;
  const auto d = propagate_monte_carlo(SpacetimePoint::make(0, {0}), targets, 4, flat, 0.5, s, one);
  EXPECT_NE(a.values, d.values);
}

TEST(Bridge, ConfigErrors) {
  SamplerSpec s;
  const auto A = SpacetimePoint::make(0, {0});
  EXPECT_THROW(propagate_monte_carlo(A, line_targets(1, {0}), 0, flat, 0.5, s), Error);
  s.n_samples = 0;
  EXPECT_THROW(propagate_monte_carlo(A, line_targets(1, {0}), 4, flat, 0.5, s), Error);
  s = {};
  s.sigma = -1;
  EXPECT_THROW(propagate_monte_carlo(A, line_targets(1, {0}), 4, flat, 0.5, s), Error);
  s = {};
  std::vector<SpacetimePoint> three{SpacetimePoint::make(1, {0, 0, 0})};
  EXPECT_THROW(propagate_monte_carlo(SpacetimePoint::make(0, {0, 0, 0}), three, 4, flat, 0.5, s), Error);
  EXPECT_THROW(propagate_monte_carlo(A, line_targets(0, {0}), 4, flat, 0.5, s), Error);
}

TEST(LatticeSampler, AgreesWithTransferMatrix) {
  LatticeSpec spec;
  spec.n_slices = 4;
  spec.n_sites = 9;
  spec.x_min = -2;
  spec.x_max = 2;
  spec.dt = 0.25;
  spec.hop_rule = HopRule::quasi_interpolated;
  spec.edge_taper = 0.25;
  const auto tm = propagate_transfer_matrix(spec, flat, 0.5);
  int within = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SamplerSpec s;
    s.n_samples = 5000;
    s.seed = seed;
    s.proposal = Proposal::uniform_lattice;
    const auto mc = propagate_monte_carlo_lattice(spec, flat, 0.5, tm.normalization, s);
    for (std::size_t j = 0; j < tm.values.size(); ++j) {
      const double d = std::abs(mc.values[j] - tm.values[j]);
      within += d <= 3.0 * mc.standard_error[j] + 1e-14;
      ++total;
    }
  }
  EXPECT_GE(within, static_cast<int>(0.9 * total));
}
