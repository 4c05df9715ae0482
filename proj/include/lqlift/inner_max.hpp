#pragma once

// Per-coordinate scalar maximizations over w (and a sign b) that appear
// inside every expectation integrand. All routines are closed form or use a
// bracketed Newton iteration on the first-order condition; the candidate
// w = 0 is always evaluated directly.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>

#include "lqlift/error.hpp"

namespace lqlift {

enum class SignMode { plus, minus };

enum class Branch { at_zero, interior_pos, interior_neg };

struct ScalarProblem {
  double h_mag = 0.0;  // |h|, or signed h in the weak on-support case
  double q = 1.0;
  double nu = 0.0;
  double gamma = 1.0;
  SignMode sign_mode = SignMode::plus;
  double mu = 0.0;  // support magnitude, weak case only
};

struct InnerMaxResult {
  double w_star = 0.0;
  double value = 0.0;
  Branch branch = Branch::at_zero;
  int sign_b = 0;  // winning b in {+1, -1} for the strong form, else 0
};

namespace detail {

inline void require(bool ok, const char* op, const char* what) {
  if (!ok) throw InvalidParameter(std::string(op) + ": " + what);
}

inline void check_common(const char* op, double h, double q, double nu, double gamma) {
  require(std::isfinite(h), op, "h must be finite");
  require(q >= 0.0 && q <= 1.0, op, "q must lie in [0, 1]");
  require(nu >= 0.0 && std::isfinite(nu), op, "nu must be finite and nonnegative");
  require(gamma > 0.0 && std::isfinite(gamma), op, "gamma must be finite and positive");
}

/// |w|^q with the counting convention 0^0 = 0.
inline double abs_pow(double w, double q) {
  const double a = std::abs(w);
  if (a == 0.0) return 0.0;
  if (q == 0.0) return 1.0;
  if (q == 1.0) return a;
  return std::pow(a, q);
}

inline double signed_objective(double h, double nu, double gamma, double q, double w,
                               SignMode mode) {
  const double pen = nu * abs_pow(w, q);
  return h * w + (mode == SignMode::plus ? pen : -pen) - gamma * w * w;
}

inline Branch branch_of(double w) {
  if (w > 0.0) return Branch::interior_pos;
  if (w < 0.0) return Branch::interior_neg;
  return Branch::at_zero;
}

// Root of a decreasing function g on [lo, hi] with g(lo) >= 0 >= g(hi).
// `gd(w)` returns {g(w), g'(w)}. Newton steps are kept inside the shrinking
// bracket, bisection otherwise.
template <class GD>
double bracketed_newton(GD&& gd, double lo, double hi, double start) {
  double w = start;
  for (int it = 0; it < 200; ++it) {
    const auto [gw, dgw] = gd(w);
    if (gw == 0.0) return w;
    if (gw > 0.0) lo = w; else hi = w;
    double next = w - gw / dgw;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - w);
    w = next;
    if (step <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(w)) break;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
  }
  return w;
}

inline InnerMaxResult plus_impl(double h, double nu, double gamma, double q) {
  InnerMaxResult r;
  if (q == 1.0 || nu == 0.0) {
    const double a = q == 1.0 ? h + nu : h;
    r.w_star = a > 0.0 ? a / (2.0 * gamma) : 0.0;
    r.value = a > 0.0 ? a * a / (4.0 * gamma) : 0.0;
  } else if (q == 0.0) {
    // sup of nu + h w - gamma w^2 over w > 0; at h = 0 it is approached as w -> 0+
    r.w_star = h > 0.0 ? h / (2.0 * gamma) : std::numeric_limits<double>::denorm_min();
    r.value = h * h / (4.0 * gamma) + nu;
  } else {
    // h + q nu w^(q-1) - 2 gamma w is convex and decreasing on w > 0
    const auto gd = [&](double w) {
      const double t = q * nu * std::pow(w, q - 1.0);
      return std::pair{h + t - 2.0 * gamma * w, (q - 1.0) * t / w - 2.0 * gamma};
    };
    const double lo = std::max(h / (2.0 * gamma), std::pow(q * nu / (2.0 * gamma), 1.0 / (2.0 - q)));
    const double hi = (h + nu + 1.0) / gamma + 1.0;
    r.w_star = bracketed_newton(gd, lo, hi, lo);
    r.value = signed_objective(h, nu, gamma, q, r.w_star, SignMode::plus);
  }
  r.branch = branch_of(r.w_star);
  return r;
}

inline InnerMaxResult minus_impl(double h, double nu, double gamma, double q) {
  InnerMaxResult r;
  if (q == 1.0 || nu == 0.0) {
    const double a = q == 1.0 ? h - nu : h;
    if (a > 0.0) {
      r.w_star = a / (2.0 * gamma);
      r.value = a * a / (4.0 * gamma);
    }
  } else if (q == 0.0) {
    const double v = h * h / (4.0 * gamma) - nu;
    if (v > 0.0) {
      r.w_star = h / (2.0 * gamma);
      r.value = v;
    }
  } else {
    // h - q nu w^(q-1) - 2 gamma w is concave, rising up to w_peak then falling
    const auto gd = [&](double w) {
      const double t = q * nu * std::pow(w, q - 1.0);
      return std::pair{h - t - 2.0 * gamma * w, (1.0 - q) * t / w - 2.0 * gamma};
    };
    const double w_peak = std::pow(q * (1.0 - q) * nu / (2.0 * gamma), 1.0 / (2.0 - q));
    if (gd(w_peak).first > 0.0) {
      const double hi = std::max(2.0 * w_peak, h / (2.0 * gamma)) + 1.0 / gamma;
      const double w = bracketed_newton(gd, w_peak, hi, hi);
      const double v = signed_objective(h, nu, gamma, q, w, SignMode::minus);
      if (v > 0.0) {
        r.w_star = w;
        r.value = v;
      }
    }
  }
  r.branch = branch_of(r.w_star);
  return r;
}

// Real roots of s^3 + p s + c = 0, each polished by Newton steps.
inline int depressed_cubic_roots(double p, double c, std::array<double, 3>& roots) {
  int count = 0;
  const double disc = 0.25 * c * c + p * p * p / 27.0;
  if (p == 0.0) {
    roots[count++] = std::cbrt(-c);
  } else if (disc > 0.0) {
    const double a = -std::copysign(std::cbrt(0.5 * std::abs(c) + std::sqrt(disc)), c);
    roots[count++] = a == 0.0 ? 0.0 : a - p / (3.0 * a);
  } else {
    const double r = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(1.5 * c / p * std::sqrt(-3.0 / p), -1.0, 1.0);
    const double phi = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k) roots[count++] = r * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0);
  }
  for (int i = 0; i < count; ++i) {
    for (int it = 0; it < 3; ++it) {
      const double s = roots[i];
      const double f = (s * s + p) * s + c;
      const double df = 3.0 * s * s + p;
      if (df == 0.0 || f == 0.0) break;
      roots[i] = s - f / df;
    }
  }
  return count;
}

}  // namespace detail

/// max over w >= 0 of h w + nu w^q - gamma w^2.
inline InnerMaxResult max_plus(double h, double nu, double gamma, double q) {
  detail::check_common("max_plus", h, q, nu, gamma);
  detail::require(h >= 0.0, "max_plus", "h_mag must be nonnegative");
  return detail::plus_impl(h, nu, gamma, q);
}

/// max over w >= 0 of h w - nu w^q - gamma w^2. Never negative (w = 0).
inline InnerMaxResult max_minus(double h, double nu, double gamma, double q) {
  detail::check_common("max_minus", h, q, nu, gamma);
  detail::require(h >= 0.0, "max_minus", "h_mag must be nonnegative");
  return detail::minus_impl(h, nu, gamma, q);
}

inline InnerMaxResult max_plus(const ScalarProblem& p) {
  detail::require(p.sign_mode == SignMode::plus && p.mu == 0.0, "max_plus",
                  "expects sign_mode plus and mu = 0");
  return max_plus(p.h_mag, p.nu, p.gamma, p.q);
}

inline InnerMaxResult max_minus(const ScalarProblem& p) {
  detail::require(p.sign_mode == SignMode::minus && p.mu == 0.0, "max_minus",
                  "expects sign_mode minus and mu = 0");
  return max_minus(p.h_mag, p.nu, p.gamma, p.q);
}

/// q = 1/2 by explicit roots of the stationary cubic 2 gamma s^3 - h s -+ nu/2 = 0, s = sqrt(w).
inline InnerMaxResult max_q_half(const ScalarProblem& p) {
  detail::check_common("max_q_half", p.h_mag, p.q, p.nu, p.gamma);
  detail::require(p.q == 0.5, "max_q_half", "q must equal 0.5");
  detail::require(p.h_mag >= 0.0, "max_q_half", "h_mag must be nonnegative");
  const double sign = p.sign_mode == SignMode::plus ? 1.0 : -1.0;
  std::array<double, 3> roots{};
  const int n = detail::depressed_cubic_roots(-p.h_mag / (2.0 * p.gamma),
                                              -sign * p.nu / (4.0 * p.gamma), roots);
  InnerMaxResult best;
  for (int i = 0; i < n; ++i) {
    if (!(roots[i] > 0.0)) continue;
    const double w = roots[i] * roots[i];
    const double v = detail::signed_objective(p.h_mag, p.nu, p.gamma, 0.5, w, p.sign_mode);
    if (v > best.value || (v == best.value && w < best.w_star)) {
      best.value = v;
      best.w_star = w;
    }
  }
  best.branch = detail::branch_of(best.w_star);
  return best;
}

/// max over b in {+1,-1}, w of |h||w| - nu1 b |w|^q - gamma w^2 + nu2 b.
inline InnerMaxResult max_strong(double h, double q, double nu1, double nu2, double gamma) {
  detail::check_common("max_strong", h, q, nu1, gamma);
  detail::require(h >= 0.0, "max_strong", "h_mag must be nonnegative");
  detail::require(nu2 >= 0.0 && std::isfinite(nu2), "max_strong", "nu2 must be finite and nonnegative");
  InnerMaxResult low = detail::minus_impl(h, nu1, gamma, q);
  InnerMaxResult high = detail::plus_impl(h, nu1, gamma, q);
  low.value += nu2;
  low.sign_b = 1;
  high.value -= nu2;
  high.sign_b = -1;
  return high.value > low.value ? high : low;
}

/// max over w of h w - nu |mu + w|^q + nu mu^q - gamma w^2 for signed h.
/// With t = mu + w this is max_t [a t - nu |t|^q - gamma t^2] + const, a = h + 2 gamma mu,
/// so the off-support solver applied to |a| gives the maximizer. mu = +inf is the
/// linearized limit.
inline InnerMaxResult max_weak_support(double h, double q, double nu, double gamma, double mu) {
  detail::check_common("max_weak_support", h, q, nu, gamma);
  detail::require(mu >= 0.0, "max_weak_support", "mu must be nonnegative");
  InnerMaxResult r;
  if (std::isinf(mu)) {
    const double a = q == 1.0 ? h - nu : h;
    r.w_star = a / (2.0 * gamma);
    r.value = a * a / (4.0 * gamma);
  } else {
    const double a = h + 2.0 * gamma * mu;
    const InnerMaxResult t = detail::minus_impl(std::abs(a), nu, gamma, q);
    const double t_star = std::copysign(t.w_star, a);
    r.w_star = t_star - mu;
    r.value = h * r.w_star - nu * (detail::abs_pow(t_star, q) - detail::abs_pow(mu, q)) -
              gamma * r.w_star * r.w_star;
  }
  r.branch = detail::branch_of(r.w_star);
  return r;
}

/// Smallest h at which max_minus leaves w = 0 (the kink of its value function).
inline double minus_activation_point(double q, double nu, double gamma) {
  if (nu == 0.0) return 0.0;
  if (q == 1.0) return nu;
  if (q == 0.0) return 2.0 * std::sqrt(nu * gamma);
  const double w0 = std::pow((1.0 - q) * nu / gamma, 1.0 / (2.0 - q));
  return nu * std::pow(w0, q - 1.0) + gamma * w0;
}

/// Point where the strong form switches from b = +1 to b = -1, if it does.
/// max_plus - max_minus is non-decreasing in h, so the switch is unique.
inline std::optional<double> strong_switch_point(double q, double nu1, double nu2, double gamma) {
  const auto gap = [&](double h) {
    return detail::plus_impl(h, nu1, gamma, q).value - detail::minus_impl(h, nu1, gamma, q).value -
           2.0 * nu2;
  };
  if (gap(0.0) > 0.0) return 0.0;
  double hi = 1.0;
  while (gap(hi) <= 0.0) {
    hi *= 2.0;
    if (hi > 1e8) return std::nullopt;
  }
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace lqlift
