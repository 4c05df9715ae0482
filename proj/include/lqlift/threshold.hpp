#pragma once

// Largest certified beta by bisection on the condition function, and sweeps
// over (q, alpha) grids.

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lqlift/error.hpp"
#include "lqlift/exponents.hpp"
#include "lqlift/parallel.hpp"

namespace lqlift {

/// Per-solve diagnostic flags; printed as a '|' separated list.
struct SolveFlags {
  bool zero_at_lower = false;      // condition(beta_lo) >= 0, beta* reported as 0
  bool bracket_failure = false;    // condition(beta_hi) < 0, beta* capped at beta_hi
  bool nonmonotone = false;        // a nonnegative value below a negative one; re-solved on a grid
  bool not_converged = false;      // some inner simplex hit its evaluation cap
  bool quadrature = false;         // N and 2N quadratures disagreed at an argmin
  bool error = false;              // the solve threw; see message

  std::string str() const {
    std::string s;
    const auto add = [&](bool on, const char* name) {
      if (!on) return;
      if (!s.empty()) s += '|';
      s += name;
    };
    add(zero_at_lower, "zero_at_lower");
    add(bracket_failure, "bracket_failure");
    add(nonmonotone, "nonmonotone");
    add(not_converged, "not_converged");
    add(quadrature, "quadrature");
    add(error, "error");
    return s;
  }
};

struct BetaSolution {
  double beta = 0.0;
  LiftParams argmin{};
  // Only signs are computed, so the residuals are one-sided bounds: the
  // condition is at most residual_below (< 0) at beta_lo and at least
  // residual_above (>= 0) at beta_hi.
  double residual_below = 0.0;
  double residual_above = 0.0;
  double beta_lo = 0.0;
  double beta_hi = 0.0;
  int evaluations = 0;
  SolveFlags flags;
  std::string message;
};

struct SolveOptions {
  double beta_tol = 1e-4;
  int max_iterations = 40;
  double beta_floor = 1e-4;
  double monotone_slack = 1e-7;
  ConditionOptions condition{};
};

inline double beta_ceiling(ThresholdKind kind, double alpha) {
  return kind == ThresholdKind::weak ? alpha : 0.5 * alpha;
}

/// Largest beta with condition < 0, to within beta_tol; the returned beta is
/// itself certified (condition(beta) < 0) unless flagged zero_at_lower.
inline BetaSolution solve_beta(ThresholdKind kind, double alpha, double q, Mode mode, const QuadratureSpec& spec,
                               const SolveOptions& opt = {}) {
  if (!(opt.beta_tol >= 1e-5)) throw InvalidParameter("solve_beta: beta_tol must be >= 1e-5");
  check_sphere_args(alpha);
  BetaSolution out;
  std::map<double, double> seen;
  std::map<double, LiftParams> argmins;
  std::optional<ConditionHint> hint;

  const auto record = [&](const ConditionResult& r) {
    ++out.evaluations;
    out.flags.not_converged = out.flags.not_converged || !r.converged;
    out.flags.quadrature = out.flags.quadrature || !r.quadrature_ok;
  };
  // Local c3 searches certify negatives outright; a nonnegative local value is
  // confirmed by a full c3 search at the worst mu, then by a full evaluation.
  ConditionOptions copt = opt.condition;
  copt.sign_only = true;
  const auto eval = [&](double beta, bool use_hint) {
    ConditionResult r = condition(kind, alpha, beta, q, mode, spec, copt, use_hint && hint ? &*hint : nullptr);
    record(r);
    if (!r.exhaustive && !(r.value < 0.0)) {
      const ConditionResult c =
          condition_at(kind, alpha, beta, q, mode, r.argmin.mu, spec, copt, r.argmin);
      record(c);
      if (c.value < 0.0) {
        r = condition(kind, alpha, beta, q, mode, spec, copt, nullptr);
        record(r);
      } else if (c.value < r.value) {
        r.value = c.value;
        r.argmin = c.argmin;
      }
    }
    hint = r.profile;
    seen[beta] = r.value;
    argmins[beta] = r.argmin;
    return r.value;
  };

  double lo = opt.beta_floor;
  double hi = std::min(beta_ceiling(kind, alpha), kind == ThresholdKind::strong ? 0.5 : 1.0 - 1e-9);
  const double f_lo = eval(lo, false);
  if (!(f_lo < 0.0)) {
    out.flags.zero_at_lower = true;
    out.residual_above = f_lo;
    out.beta_hi = lo;
    out.argmin = argmins[lo];
    return out;
  }
  const double f_hi = eval(hi, true);
  if (f_hi < 0.0) {
    out.flags.bracket_failure = true;
    out.beta = hi;
    out.beta_lo = out.beta_hi = hi;
    out.residual_below = f_lo;
    out.residual_above = f_hi;
    out.message = "condition negative at both bracket ends";
    out.argmin = argmins[hi];
    return out;
  }
  // bisect to half the tolerance so the certified end lies within tol of the crossing
  for (int it = 0; it < opt.max_iterations && hi - lo > 0.5 * opt.beta_tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    (eval(mid, true) < 0.0 ? lo : hi) = mid;
  }

  // negatives are upper bounds and nonnegatives lower bounds, so only a
  // nonnegative value below a negative one proves a decrease
  double lower = -std::numeric_limits<double>::infinity();
  for (const auto& [b, v] : seen) {
    if (v < 0.0 && lower > v + opt.monotone_slack) out.flags.nonmonotone = true;
    if (!(v < 0.0)) lower = std::max(lower, v);
  }
  if (out.flags.nonmonotone) {
    // largest grid beta below which every grid point is certified
    const double step = 1e-3;
    double last_ok = 0.0;
    for (double b = step; b <= beta_ceiling(kind, alpha) + 1e-12; b += step) {
      if (!(eval(b, false) < 0.0)) break;
      last_ok = b;
    }
    out.beta = last_ok;
    out.beta_lo = last_ok;
    out.beta_hi = last_ok + step;
    out.residual_below = last_ok > 0.0 ? seen[last_ok] : 0.0;
    out.residual_above = seen.count(out.beta_hi) ? seen[out.beta_hi] : std::numeric_limits<double>::quiet_NaN();
    out.argmin = last_ok > 0.0 ? argmins[last_ok] : LiftParams{};
    return out;
  }
  out.beta = lo;
  out.beta_lo = lo;
  out.beta_hi = hi;
  out.residual_below = seen[lo];
  out.residual_above = seen[hi];
  out.argmin = argmins[lo];
  return out;
}

enum class ModeSelection { lifted, limit, both };

struct CurveRequest {
  ThresholdKind kind = ThresholdKind::sectional;
  std::vector<double> q_list{1.0};
  std::vector<double> alpha_grid{0.5};
  ModeSelection mode = ModeSelection::both;
  double beta_tol = 1e-4;
  QuadratureSpec spec{};
  ConditionOptions condition{};
  unsigned long long seed = 0;  // recorded for provenance; the sweep itself is deterministic
};

struct CurvePoint {
  double alpha = 0.0;
  double q = 0.0;
  std::optional<BetaSolution> lifted;
  std::optional<BetaSolution> limit;
};

inline void validate(const CurveRequest& req) {
  if (req.alpha_grid.empty() || req.q_list.empty()) throw InvalidParameter("sweep: empty grid");
  for (std::size_t i = 0; i < req.alpha_grid.size(); ++i) {
    check_sphere_args(req.alpha_grid[i]);
    if (i > 0 && !(req.alpha_grid[i] > req.alpha_grid[i - 1]))
      throw InvalidParameter("sweep: alpha grid must be strictly increasing");
  }
  for (double q : req.q_list)
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidParameter("sweep: q must lie in [0, 1]");
  if (!(req.beta_tol >= 1e-5)) throw InvalidParameter("sweep: beta_tol must be >= 1e-5");
}

/// One CurvePoint per (q, alpha), in (q, alpha) lexicographic order of the
/// request lists. A failing point is recorded in its row, never aborting.
inline std::vector<CurvePoint> sweep(const CurveRequest& req, int jobs = 1) {
  validate(req);
  std::vector<CurvePoint> points;
  std::vector<double> qs = req.q_list;
  std::sort(qs.begin(), qs.end());
  for (double q : qs)
    for (double a : req.alpha_grid) points.push_back({a, q, std::nullopt, std::nullopt});

  SolveOptions opt;
  opt.beta_tol = req.beta_tol;
  opt.condition = req.condition;
  // one task per (point, mode) so the pool stays busy
  std::vector<std::pair<std::size_t, Mode>> tasks;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (req.mode != ModeSelection::lifted) tasks.emplace_back(i, Mode::limit);
    if (req.mode != ModeSelection::limit) tasks.emplace_back(i, Mode::lifted);
  }
  std::vector<BetaSolution> results(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t t) {
    const auto [i, mode] = tasks[t];
    try {
      results[t] = solve_beta(req.kind, points[i].alpha, points[i].q, mode, req.spec, opt);
    } catch (const std::exception& e) {
      results[t] = BetaSolution{};
      results[t].flags.error = true;
      results[t].message = e.what();
    }
  });
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    auto& p = points[tasks[t].first];
    (tasks[t].second == Mode::limit ? p.limit : p.lifted) = results[t];
  }
  return points;
}

}  // namespace lqlift
