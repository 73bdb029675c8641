#pragma once

#include <cstdint>
#include <random>

#include <gtest/gtest.h>

#include "itpi/constants.hpp"
#include "itpi/geometry.hpp"
#include "itpi/testing/oracles.hpp"

namespace itpi::test {

inline PhysicalConstants unit_constants() { return {1.0, 1.0, 1.0, 1.0}; }

inline PiecewisePath rest_path(std::initializer_list<double> times) {
  std::vector<SpacetimePoint> v;
  for (double t : times) v.push_back(SpacetimePoint::make(t, {0.0}));
  return PiecewisePath(std::move(v));
}

// Runs `body` on `cases` seeded generators; the case index shows up in failures.
template <class F>
void for_all(int cases, std::uint64_t seed, F body) {
  std::mt19937_64 rng(seed);
  for (int i = 0; i < cases; ++i) {
    SCOPED_TRACE("property case " + std::to_string(i));
    body(rng, i);
    if (::testing::Test::HasFatalFailure()) return;
  }
}

inline oracle::PathClass any_class(std::mt19937_64& rng) { return static_cast<oracle::PathClass>(rng() % 4); }
inline int any_dim(std::mt19937_64& rng) { return 1 + static_cast<int>(rng() % 3); }

}  // namespace itpi::test
