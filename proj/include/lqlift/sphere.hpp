#pragma once

// Sphere exponent shared by all three threshold kinds.

#include <cmath>

#include "lqlift/error.hpp"

namespace lqlift {

struct SphereExponent {
  double gamma_hat = 0.0;
  double value = 0.0;
};

inline void check_sphere_args(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidParameter("sphere: alpha must lie in (0, 1]");
}

inline SphereExponent i_sph(double c3, double alpha) {
  check_sphere_args(alpha);
  if (!(c3 > 0.0) || !std::isfinite(c3)) throw InvalidParameter("i_sph: c3 must be positive");
  // (2c3 - sqrt(4c3^2 + 16 alpha)) / 8, rationalized to avoid cancellation at large c3
  const double root = std::sqrt(4.0 * c3 * c3 + 16.0 * alpha);
  const double gamma_hat = -16.0 * alpha / (8.0 * (2.0 * c3 + root));
  // log(1 - c3 / (2 gamma_hat)); the argument exceeds 1 because gamma_hat < 0
  const double value = gamma_hat - alpha / (2.0 * c3) * std::log1p(-c3 / (2.0 * gamma_hat));
  return {gamma_hat, value};
}

/// c3 -> 0 limit of i_sph.
inline double i_sph_limit(double alpha) {
  check_sphere_args(alpha);
  return -std::sqrt(alpha);
}

}  // namespace lqlift
