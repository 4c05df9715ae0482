#pragma once

// Threshold exponents: nested minimization over (gamma, nu1[, nu2]) of the
// expectation functionals, and the condition function over c3 (and mu).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lqlift/error.hpp"
#include "lqlift/gauss_expect.hpp"
#include "lqlift/inner_max.hpp"
#include "lqlift/optimize.hpp"
#include "lqlift/sphere.hpp"

namespace lqlift {

enum class ThresholdKind { sectional, strong, weak };
enum class Mode { lifted, limit };

inline const char* to_string(ThresholdKind k) {
  switch (k) {
    case ThresholdKind::sectional: return "sectional";
    case ThresholdKind::strong: return "strong";
    case ThresholdKind::weak: return "weak";
  }
  return "?";
}

inline const char* to_string(Mode m) { return m == Mode::lifted ? "lifted" : "limit"; }

struct LiftParams {
  double c3 = 0.0;  // 0 marks the c3 -> 0 endpoint
  double gamma = 1.0;
  double nu1 = 0.0;
  double nu2 = 0.0;
  double mu = 0.0;  // may be +inf (weak)
};

struct ExponentValue {
  double value = std::numeric_limits<double>::infinity();
  LiftParams argmin{};
  bool feasible = false;
  Mode mode = Mode::lifted;
  bool converged = false;
  bool quadrature_ok = true;
};

namespace detail {

inline constexpr double inf = std::numeric_limits<double>::infinity();

struct ExponentSetup {
  ThresholdKind kind = ThresholdKind::sectional;
  Mode mode = Mode::lifted;
  double c3 = 0.0;
  double beta = 0.0;
  double q = 1.0;
  double mu = 0.0;
};

// gamma lives above `base` (the integrability boundary c3/2 when lifted) by at least `min_offset`.
inline double gamma_base(const ExponentSetup& s) { return s.mode == Mode::lifted ? 0.5 * s.c3 : 0.0; }
inline double gamma_min_offset(const ExponentSetup& s) { return s.mode == Mode::lifted ? 0.5e-9 * s.c3 : 1e-12; }
inline double gamma_floor(const ExponentSetup& s) { return gamma_base(s) + gamma_min_offset(s); }

// (1/c3) log E e^{c3 M} in lifted mode, E M in limit mode.
template <class M>
double expectation_term(const ExponentSetup& s, const M& m, bool half_line, const QuadratureSpec& spec,
                        const IntegrandShape& shape) {
  if (s.mode == Mode::limit) return E_plain(m, half_line, spec, shape);
  const LogExpectation r = log_E_exp(s.c3, m, half_line, spec, shape);
  return r.finite ? r.log_value / s.c3 : inf;
}

inline double exponent_objective(const ExponentSetup& s, double gamma, double nu1, double nu2,
                                 const QuadratureSpec& spec) {
  if (!(gamma >= gamma_floor(s)) || !std::isfinite(gamma) || !std::isfinite(nu1) || !std::isfinite(nu2))
    return inf;
  const double q = s.q;
  IntegrandShape off;
  off.growth = 1.0 / (4.0 * gamma);
  off.add_kink(minus_activation_point(q, nu1, gamma));
  const auto off_support = [&](double h) { return minus_impl(h, nu1, gamma, q).value; };

  switch (s.kind) {
    case ThresholdKind::sectional: {
      IntegrandShape on;
      on.growth = off.growth;
      const auto on_support = [&](double h) { return plus_impl(h, nu1, gamma, q).value; };
      const double a = expectation_term(s, on_support, true, spec, on);
      if (!std::isfinite(a)) return inf;
      return gamma + s.beta * a + (1.0 - s.beta) * expectation_term(s, off_support, true, spec, off);
    }
    case ThresholdKind::strong: {
      IntegrandShape shape = off;
      if (const auto sw = strong_switch_point(q, nu1, nu2, gamma)) shape.add_kink(*sw);
      const auto both = [&](double h) {
        return std::max(minus_impl(h, nu1, gamma, q).value + nu2, plus_impl(h, nu1, gamma, q).value - nu2);
      };
      return gamma + nu2 * (2.0 * s.beta - 1.0) + expectation_term(s, both, true, spec, shape);
    }
    case ThresholdKind::weak: {
      IntegrandShape on;
      on.growth = off.growth;
      if (std::isfinite(s.mu)) {
        const double shift = -2.0 * gamma * s.mu;
        const double act = minus_activation_point(q, nu1, gamma);
        on.add_kink(shift - act).add_kink(shift + act);
      }
      const auto on_support = [&](double h) { return max_weak_support(h, q, nu1, gamma, s.mu).value; };
      const double a = expectation_term(s, on_support, false, spec, on);
      if (!std::isfinite(a)) return inf;
      return gamma + s.beta * a + (1.0 - s.beta) * expectation_term(s, off_support, true, spec, off);
    }
  }
  return inf;
}

// Unconstrained coordinates: gamma = base + e^x0, nu1 = x1^2, nu2 = x2^2.
// x0 is held above log(min_offset) by a quadratic penalty, since the infimum
// may sit on the integrability boundary.
struct Coordinates {
  double base;
  double min_offset;
  bool strong;
  std::vector<double> to_x(double gamma, double nu1, double nu2) const {
    std::vector<double> x{std::log(std::max(gamma - base, min_offset)), std::sqrt(std::max(nu1, 0.0))};
    if (strong) x.push_back(std::sqrt(std::max(nu2, 0.0)));
    return x;
  }
  double x_min() const { return std::log(min_offset); }
  double gamma(const std::vector<double>& x) const { return base + std::max(std::exp(x[0]), min_offset); }
  double penalty(const std::vector<double>& x) const {
    const double d = x_min() - x[0];
    return d > 0.0 ? d * d : 0.0;
  }
  double nu1(const std::vector<double>& x) const { return x[1] * x[1]; }
  double nu2(const std::vector<double>& x) const { return strong ? x[2] * x[2] : 0.0; }
};

inline void check_exponent_args(const ExponentSetup& s) {
  const bool strong = s.kind == ThresholdKind::strong;
  if (!(s.beta > 0.0 && s.beta < (strong ? 0.5 + 1e-12 : 1.0)))
    throw InvalidParameter(std::string("exponent: beta outside the domain of the ") + to_string(s.kind) + " form");
  if (!(s.q >= 0.0 && s.q <= 1.0)) throw InvalidParameter("exponent: q must lie in [0, 1]");
  if (s.mode == Mode::lifted && !(s.c3 > 0.0 && std::isfinite(s.c3)))
    throw InvalidParameter("exponent: c3 must be positive");
  if (!(s.mu >= 0.0)) throw InvalidParameter("exponent: mu must be nonnegative");
}

inline ExponentValue minimize_exponent(const ExponentSetup& s, const QuadratureSpec& spec,
                                       const std::optional<LiftParams>& warm,
                                       const std::vector<double>& extra_gamma_offsets = {}) {
  check_exponent_args(s);
  QuadratureSpec fast = spec;
  fast.verify = false;
  const Coordinates coords{gamma_base(s), gamma_min_offset(s), s.kind == ThresholdKind::strong};
  const auto f = [&](const std::vector<double>& x) {
    return exponent_objective(s, coords.gamma(x), coords.nu1(x), coords.nu2(x), fast) + coords.penalty(x);
  };

  std::vector<std::vector<double>> seeds = {
      coords.to_x(coords.base + 0.5, 0.5, 0.1), coords.to_x(coords.base + 0.1, 0.1, 0.0),
      coords.to_x(coords.base + 2.0, 1.0, 0.5), coords.to_x(coords.base + 0.5, 2.0, 0.0),
      coords.to_x(coords.base + 1.0, 0.05, 0.02)};
  for (double off : extra_gamma_offsets) seeds.push_back(coords.to_x(coords.base + off, 0.5, 0.1));
  if (warm) {
    // keep the warm start's distance from the integrability floor
    const double offset = std::max(warm->gamma - 0.5 * warm->c3, 1e-6);
    seeds.push_back(coords.to_x(coords.base + offset, warm->nu1, warm->nu2));
  }
  std::vector<double> start = seeds.front();
  double start_value = inf;
  for (const auto& x : seeds) {
    const double v = f(x);
    if (v < start_value) {
      start_value = v;
      start = x;
    }
  }

  ExponentValue out;
  out.mode = s.mode;
  if (!std::isfinite(start_value)) return out;

  NelderMeadOptions opt;
  opt.initial_step = warm ? 0.2 : 0.5;
  // quadrature jitter in log E is divided by c3
  opt.f_tol = s.mode == Mode::lifted ? 1e-10 * std::max(1.0, 1.0 / s.c3) : 1e-10;
  opt.x_tol = 1e-5;
  // an argmin on the gamma floor is approached along the penalty kink, which
  // occasionally needs a few thousand evaluations
  opt.max_evaluations = 20000;
  const MinimizeResult res = nelder_mead(f, start, opt);
  out.value = res.value;
  out.feasible = std::isfinite(res.value);
  out.converged = res.converged;
  out.argmin = LiftParams{s.mode == Mode::lifted ? s.c3 : 0.0, coords.gamma(res.x), coords.nu1(res.x),
                          coords.nu2(res.x), s.mu};
  if (spec.verify && out.feasible) {
    try {
      exponent_objective(s, out.argmin.gamma, out.argmin.nu1, out.argmin.nu2, spec);
    } catch (const QuadratureDisagreement&) {
      out.quadrature_ok = false;
    }
  }
  return out;
}

}  // namespace detail

/// Objective of the inner minimization at fixed lifting variables.
inline double exponent_objective(ThresholdKind kind, Mode mode, double c3, double beta, double q,
                                 const LiftParams& p, const QuadratureSpec& spec) {
  const detail::ExponentSetup s{kind, mode, c3, beta, q, p.mu};
  detail::check_exponent_args(s);
  return detail::exponent_objective(s, p.gamma, p.nu1, p.nu2, spec);
}

/// Minimized exponent of the given kind at fixed c3 (ignored in limit mode) and mu (weak only).
inline ExponentValue exponent(ThresholdKind kind, Mode mode, double c3, double beta, double q, double mu,
                              const QuadratureSpec& spec, const std::optional<LiftParams>& warm = std::nullopt) {
  return detail::minimize_exponent({kind, mode, c3, beta, q, kind == ThresholdKind::weak ? mu : 0.0}, spec,
                                   warm);
}

inline ExponentValue i_sec(double c3, double beta, double q, const QuadratureSpec& spec) {
  return exponent(ThresholdKind::sectional, Mode::lifted, c3, beta, q, 0.0, spec);
}

inline ExponentValue i_str(double c3, double beta, double q, const QuadratureSpec& spec) {
  return exponent(ThresholdKind::strong, Mode::lifted, c3, beta, q, 0.0, spec);
}

inline ExponentValue i_weak(double c3, double beta, double q, double mu, const QuadratureSpec& spec) {
  return exponent(ThresholdKind::weak, Mode::lifted, c3, beta, q, mu, spec);
}

struct ConditionOptions {
  double c3_min = 1e-3;
  double c3_max = 1e3;
  int c3_scan = 25;
  double mu_min = 1e-3;
  double mu_max = 1e3;
  int mu_scan = 13;
  // Only the sign is wanted: a hinted c3 search stops once the condition is
  // below -accept_margin, and a weak evaluation stops at the first mu whose
  // full c3 search is nonnegative. Values are then bounds, not minima. The
  // early stop below zero is not used inside the weak mu search, where upper
  // bounds would mislead the maximization over mu.
  bool sign_only = false;
  double accept_margin = 1e-2;
};

/// Argmins at the scan points of an earlier evaluation (weak: mu = inf first,
/// then the mu scan), used to run local c3 searches.
struct ConditionHint {
  std::vector<LiftParams> per_mu;
  std::optional<double> worst_mu;  // weak: the maximizing mu, probed first when only the sign is wanted
};

struct ConditionResult {
  double value = std::numeric_limits<double>::infinity();
  double limit_value = std::numeric_limits<double>::infinity();  // c3 -> 0 endpoint
  LiftParams argmin{};
  bool converged = true;
  bool quadrature_ok = true;
  bool exhaustive = true;  // false when c3 was searched locally around a hint
  ConditionHint profile;
};

namespace detail {

struct ConditionContext {
  ThresholdKind kind;
  double alpha;
  double beta;
  double q;
  Mode mode;
  const QuadratureSpec& spec;
  const ConditionOptions& opt;
};

inline void merge_flags(ConditionResult& into, const ExponentValue& e) {
  into.converged = into.converged && e.converged;
  into.quadrature_ok = into.quadrature_ok && e.quadrature_ok;
}

// Condition at a fixed support magnitude: the c3 -> 0 limit value, or the min over
// c3 of -c3/2 + I + I_sph with the c3 -> 0 endpoint included. With `local`
// the c3 search walks downhill from warm->c3 instead of scanning the whole
// range; that can only overestimate the min, so negative values still certify.
inline ConditionResult condition_at_mu(const ConditionContext& ctx, double mu, const std::optional<LiftParams>& warm,
                                       bool local) {
  ConditionResult out;
  const bool early = local && warm && ctx.opt.sign_only;
  const auto settled = [&] { return early && out.value < -ctx.opt.accept_margin; };
  const ExponentValue lim = minimize_exponent({ctx.kind, Mode::limit, 0.0, ctx.beta, ctx.q, mu}, ctx.spec,
                                              warm && warm->c3 == 0.0 ? warm : std::nullopt,
                                              {0.5 * std::sqrt(ctx.alpha)});
  merge_flags(out, lim);
  out.limit_value = lim.value + i_sph_limit(ctx.alpha);
  out.value = out.limit_value;
  out.argmin = lim.argmin;
  if (ctx.mode == Mode::limit) return out;
  if (settled()) {
    out.exhaustive = false;
    return out;
  }

  std::optional<LiftParams> chain = warm && warm->c3 > 0.0 ? warm : std::nullopt;
  const std::vector<double> gamma_hint{0.5 * std::sqrt(ctx.alpha)};
  std::vector<std::pair<double, double>> seen;  // (c3, value)
  const auto lifted = [&](double c3) {
    const ExponentValue e = minimize_exponent({ctx.kind, Mode::lifted, c3, ctx.beta, ctx.q, mu}, ctx.spec,
                                              chain, gamma_hint);
    merge_flags(out, e);
    if (e.feasible) chain = e.argmin;
    const double v = -0.5 * c3 + e.value + i_sph(c3, ctx.alpha).value;
    if (v < out.value) {
      out.value = v;
      out.argmin = e.argmin;
    }
    seen.emplace_back(c3, v);
    return v;
  };

  const double c3_lo = ctx.opt.c3_min, c3_hi = ctx.opt.c3_max;
  std::vector<double> grid;
  std::vector<double> values;
  if (local && warm) {
    out.exhaustive = false;
    const double centre = std::clamp(warm->c3 > 0.0 ? warm->c3 : c3_lo, c3_lo, c3_hi);
    // the warm point first: it often settles the sign on its own
    const double at_centre = lifted(centre);
    if (settled()) return out;
    for (double c : {centre / 2.0, centre, centre * 2.0}) {
      const double cc = std::clamp(c, c3_lo, c3_hi);
      if (!grid.empty() && cc <= grid.back()) continue;
      grid.push_back(cc);
      values.push_back(cc == centre ? at_centre : lifted(cc));
    }
    // walk until the best point has a neighbour on each side or sits on a bound
    for (;;) {
      const auto best = std::min_element(values.begin(), values.end()) - values.begin();
      if (best == 0 && grid.front() > c3_lo) {
        const double c = std::max(grid.front() / 2.0, c3_lo);
        grid.insert(grid.begin(), c);
        values.insert(values.begin(), lifted(c));
      } else if (best + 1 == static_cast<std::ptrdiff_t>(grid.size()) && grid.back() < c3_hi) {
        const double c = std::min(grid.back() * 2.0, c3_hi);
        grid.push_back(c);
        values.push_back(lifted(c));
      } else {
        break;
      }
    }
  } else {
    grid = log_grid(c3_lo, c3_hi, ctx.opt.c3_scan);
    for (double c3 : grid) values.push_back(lifted(c3));
  }
  const auto best = std::min_element(values.begin(), values.end()) - values.begin();
  if (!std::isfinite(values[best])) return out;
  const double lo = grid[best > 0 ? best - 1 : best];
  const double hi = grid[best + 1 < static_cast<std::ptrdiff_t>(grid.size()) ? best + 1 : best];
  if (hi > lo) {
    chain = out.argmin.c3 > 0.0 ? std::optional<LiftParams>(out.argmin) : chain;
    brent_minimize([&](double t) { return lifted(std::exp(t)); }, std::log(lo), std::log(hi), 1e-2);
  }
  return out;
}

}  // namespace detail

/// Condition function; a negative value certifies (alpha, beta) for the kind.
/// Weak: the worst case over a common support magnitude mu, including mu = inf.
/// A hint from an earlier evaluation makes the c3 searches local (see
/// condition_at_mu); the mu search is always global.
inline ConditionResult condition(ThresholdKind kind, double alpha, double beta, double q, Mode mode,
                                 const QuadratureSpec& spec, const ConditionOptions& opt = {},
                                 const ConditionHint* hint = nullptr) {
  check_sphere_args(alpha);
  const detail::ConditionContext ctx{kind, alpha, beta, q, mode, spec, opt};
  const auto hinted = [&](std::size_t i) -> std::optional<LiftParams> {
    if (hint && i < hint->per_mu.size()) return hint->per_mu[i];
    return std::nullopt;
  };
  if (kind != ThresholdKind::weak) {
    const auto warm = hinted(0);
    ConditionResult r = detail::condition_at_mu(ctx, 0.0, warm, warm.has_value());
    r.profile.per_mu = {r.argmin};
    return r;
  }

  ConditionOptions per_mu_opt = opt;
  per_mu_opt.accept_margin = detail::inf;
  const detail::ConditionContext mu_ctx{kind, alpha, beta, q, mode, spec, per_mu_opt};
  ConditionResult worst;
  worst.value = -detail::inf;
  bool have = false;
  bool exhaustive = true;
  bool settled = false;  // sign_only: a full c3 search found a nonnegative mu
  std::vector<LiftParams> profile;
  const auto at_mu = [&](double mu, const std::optional<LiftParams>& warm) {
    ConditionResult r = detail::condition_at_mu(mu_ctx, mu, warm, hint != nullptr && warm.has_value());
    if (opt.sign_only && !r.exhaustive && !(r.value < 0.0)) {
      ConditionResult full = detail::condition_at_mu(mu_ctx, mu, r.argmin, false);
      full.converged = full.converged && r.converged;
      full.quadrature_ok = full.quadrature_ok && r.quadrature_ok;
      r = full;
    }
    if (opt.sign_only && !(r.value < 0.0)) settled = true;
    worst.converged = worst.converged && r.converged;
    worst.quadrature_ok = worst.quadrature_ok && r.quadrature_ok;
    exhaustive = exhaustive && r.exhaustive;
    if (!have || r.value > worst.value) {
      const bool ok_c = worst.converged, ok_q = worst.quadrature_ok;
      worst = r;
      worst.converged = ok_c;
      worst.quadrature_ok = ok_q;
      have = true;
    }
    return r;
  };

  const std::vector<double> grid = log_grid(opt.mu_min, opt.mu_max, opt.mu_scan);
  const auto finish_settled = [&] {
    worst.exhaustive = true;
    if (hint) worst.profile = *hint;
    else worst.profile.per_mu = profile;
    worst.profile.worst_mu = worst.argmin.mu;
    return worst;
  };
  if (opt.sign_only && hint && hint->worst_mu) {
    // the previous worst mu is the likeliest to turn nonnegative
    const double mu = *hint->worst_mu;
    std::optional<LiftParams> warm = hinted(0);
    if (std::isfinite(mu)) {
      const auto nearest = std::min_element(grid.begin(), grid.end(), [&](double a, double b) {
                             return std::abs(std::log(a / mu)) < std::abs(std::log(b / mu));
                           }) - grid.begin();
      warm = hinted(static_cast<std::size_t>(nearest) + 1);
      if (warm) warm->mu = mu;
    }
    at_mu(mu, warm);
    if (settled) return finish_settled();
  }

  // the mu -> inf probe, then a log scan and a Brent refinement of the max
  const ConditionResult at_inf = at_mu(detail::inf, hinted(0));
  profile.push_back(at_inf.argmin);
  if (settled) return finish_settled();
  std::vector<double> values;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    // without a hint, chain from the neighbouring mu
    const auto warm = hint ? hinted(i + 1) : std::optional<LiftParams>(profile.back());
    const ConditionResult r = at_mu(grid[i], warm);
    if (settled) return finish_settled();
    values.push_back(r.value);
    profile.push_back(r.argmin);
  }
  const auto best = std::max_element(values.begin(), values.end()) - values.begin();
  const auto lo_i = best > 0 ? best - 1 : best;
  const auto hi_i = best + 1 < static_cast<std::ptrdiff_t>(grid.size()) ? best + 1 : best;
  if (hi_i > lo_i && values[best] >= at_inf.value - 1e-12) {
    const auto refine = [&](double t) {
      if (settled) return 0.0;  // Brent has no early exit; finish it cheaply
      const double mu = std::exp(t);
      // warm start from the nearest scan point of this evaluation
      const auto nearest = std::min_element(grid.begin(), grid.end(), [&](double a, double b) {
                             return std::abs(std::log(a / mu)) < std::abs(std::log(b / mu));
                           }) - grid.begin();
      std::optional<LiftParams> warm = profile[static_cast<std::size_t>(nearest) + 1];
      warm->mu = mu;
      return -at_mu(mu, warm).value;
    };
    brent_minimize(refine, std::log(grid[lo_i]), std::log(grid[hi_i]), 1e-2);
    if (settled) return finish_settled();
  }
  worst.exhaustive = exhaustive;
  worst.profile.per_mu = std::move(profile);
  worst.profile.worst_mu = worst.argmin.mu;
  return worst;
}

/// The condition at one support magnitude with a full c3 search; used to
/// confirm a nonnegative value found by a local search.
inline ConditionResult condition_at(ThresholdKind kind, double alpha, double beta, double q, Mode mode, double mu,
                                    const QuadratureSpec& spec, const ConditionOptions& opt = {},
                                    const std::optional<LiftParams>& warm = std::nullopt) {
  check_sphere_args(alpha);
  const detail::ConditionContext ctx{kind, alpha, beta, q, mode, spec, opt};
  return detail::condition_at_mu(ctx, kind == ThresholdKind::weak ? mu : 0.0, warm, false);
}

}  // namespace lqlift
