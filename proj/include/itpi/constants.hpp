#pragma once

#include <cmath>
#include <complex>
#include <string>

#include "itpi/error.hpp"

namespace itpi {

namespace codata {
inline constexpr double c = 299792458.0;
inline constexpr double hbar = 1.054571817e-34;
inline constexpr double k_e = 8.9875517923e9;
inline constexpr double G = 6.67430e-11;
inline constexpr double electron_mass = 9.1093837015e-31;
inline constexpr double elementary_charge = 1.602176634e-19;
}  // namespace codata

struct PhysicalConstants {
  double c = 1.0;
  double hbar = 1.0;
  double k_e = 1.0;
  double G = 1.0;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(std::isfinite(v) && v > 0.0))
        throw Error(ErrorCode::domain, std::string(name) + " must be finite and positive");
    };
    positive(c, "c");
    positive(hbar, "hbar");
    positive(k_e, "k_e");
    positive(G, "G");
  }
};

enum class UnitTag { natural, si };

struct UnitSystem {
  UnitTag tag = UnitTag::natural;
  PhysicalConstants constants{};

  static UnitSystem natural(double k_e = 1.0, double G = 1.0) {
    return {UnitTag::natural, {1.0, 1.0, k_e, G}};
  }

  static UnitSystem si() {
    return {UnitTag::si, {codata::c, codata::hbar, codata::k_e, codata::G}};
  }

  void validate() const {
    constants.validate();
    if (tag == UnitTag::natural && (constants.c != 1.0 || constants.hbar != 1.0))
      throw Error(ErrorCode::domain, "natural units require c = hbar = 1 exactly");
  }
};

struct InternalClock {
  double rest_mass = 1.0;
  double alpha = 0.5;

  void validate() const {
    if (!(std::isfinite(rest_mass) && rest_mass > 0.0))
      throw Error(ErrorCode::domain, "rest mass must be positive (massless units are out of scope)");
    if (!(std::isfinite(alpha) && alpha > 0.0))
      throw Error(ErrorCode::domain, "alpha must be positive");
  }
};

inline double lorentz_factor(double u, double c) {
  if (!(std::isfinite(u) && std::abs(u) < c))
    throw Error(ErrorCode::domain, "matching frames must be subluminal (|u| < c)");
  const double b = u / c;
  return 1.0 / std::sqrt((1.0 - b) * (1.0 + b));
}

inline double rest_frequency(const InternalClock& clock, const PhysicalConstants& k) {
  clock.validate();
  return clock.alpha * clock.rest_mass * k.c * k.c / k.hbar;
}

inline double boosted_frequency(double omega0, double u, double c) {
  return lorentz_factor(u, c) * omega0;
}

inline std::complex<double> periodic_representation(double omega, double tau) {
  return std::polar(1.0, omega * tau);
}

}  // namespace itpi
