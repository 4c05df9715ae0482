#pragma once

// Monte Carlo recovery experiments on random Gaussian systems y = A x.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lqlift/error.hpp"
#include "lqlift/exponents.hpp"
#include "lqlift/parallel.hpp"

namespace lqlift {

// ---------------------------------------------------------------------------
// Counter-based generator: every draw is a pure function of (seed, stream, index)
// so results do not depend on evaluation order.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(splitmix64(splitmix64(seed) ^ splitmix64(~stream))) {}

  std::uint64_t bits(std::uint64_t index) const { return splitmix64(key_ ^ splitmix64(index)); }

  /// Uniform on (0, 1), never exactly 0 or 1.
  double uniform(std::uint64_t index) const { return (static_cast<double>(bits(index) >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal via Box-Muller on the pair of uniforms (2i, 2i+1).
  double normal(std::uint64_t index) const {
    const double r = std::sqrt(-2.0 * std::log(uniform(2 * index)));
    return r * std::cos(2.0 * std::numbers::pi * uniform(2 * index + 1));
  }

 private:
  std::uint64_t key_;
};

// ---------------------------------------------------------------------------

enum class Solver { l1_lp, irls_lq, nullspace_probe };

inline const char* to_string(Solver s) {
  switch (s) {
    case Solver::l1_lp: return "l1_lp";
    case Solver::irls_lq: return "irls_lq";
    case Solver::nullspace_probe: return "nullspace_probe";
  }
  return "?";
}

struct ExperimentConfig {
  int n = 200;
  double alpha = 0.5;
  double beta = 0.1;
  double q = 1.0;
  int trials = 200;
  std::uint64_t seed = 0;
  Solver solver = Solver::l1_lp;
  ThresholdKind probe_kind = ThresholdKind::sectional;  // null-space probe only
  int irls_restarts = 3;
  int probes = 100;

  int m() const { return static_cast<int>(std::lround(alpha * n)); }
  int k() const { return static_cast<int>(std::lround(beta * n)); }
};

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.n < 2) throw InvalidParameter("empirical: n must be at least 2");
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0) || !(cfg.beta > 0.0 && cfg.beta < 1.0))
    throw InvalidParameter("empirical: alpha in (0,1], beta in (0,1) required");
  if (!(cfg.q >= 0.0 && cfg.q <= 1.0)) throw InvalidParameter("empirical: q must lie in [0, 1]");
  if (cfg.trials < 1) throw InvalidParameter("empirical: trials must be positive");
  const int m = cfg.m(), k = cfg.k();
  if (!(k >= 1 && m >= 1 && k < m && m < cfg.n))
    throw InvalidParameter("empirical: need 1 <= k < m < n after rounding");
  if (cfg.solver == Solver::irls_lq && !(cfg.q > 0.0 && cfg.q < 1.0))
    throw InvalidParameter("empirical: the irls solver needs 0 < q < 1");
}

struct Instance {
  Eigen::MatrixXd A;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

/// Trial `trial` of the experiment: i.i.d. N(0,1) matrix, k unit-magnitude
/// nonzeros with random signs on the last k coordinates, y = A x.
inline Instance gen_instance(const ExperimentConfig& cfg, std::uint64_t trial = 0) {
  validate(cfg);
  const int m = cfg.m(), n = cfg.n, k = cfg.k();
  const CounterRng matrix_rng(cfg.seed, 2 * trial);
  const CounterRng signal_rng(cfg.seed, 2 * trial + 1);
  Instance inst;
  inst.A.resize(m, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < m; ++i) inst.A(i, j) = matrix_rng.normal(static_cast<std::uint64_t>(j) * m + i);
  inst.x = Eigen::VectorXd::Zero(n);
  for (int i = n - k; i < n; ++i) inst.x(i) = signal_rng.bits(i) & 1 ? 1.0 : -1.0;
  inst.y = inst.A * inst.x;
  return inst;
}

// ---------------------------------------------------------------------------
// l1 minimization as an LP: min 1'(u + v) s.t. A(u - v) = y, u, v >= 0.

struct L1Solution {
  Eigen::VectorXd x;
  double objective = 0.0;
  double duality_gap = 0.0;  // ||x||_1 - y'lambda for a dual-feasible lambda
  int iterations = 0;
};

namespace detail {

// Largest step in (0, 1] keeping v + t dv >= 0.
inline double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double t = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) t = std::min(t, -v(i) / dv(i));
  return t;
}

// Gap of the LP certified by scaling lambda into the dual box |A'lambda| <= 1.
inline double certified_gap(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& lambda) {
  const double scale = std::max(1.0, (A.transpose() * lambda).cwiseAbs().maxCoeff());
  return x.lpNorm<1>() - y.dot(lambda) / scale;
}

}  // namespace detail

/// Mehrotra predictor-corrector on the split LP, then a support polish.
inline L1Solution solve_l1(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double gap_tol = 1e-10,
                           int max_iterations = 100) {
  const Eigen::Index m = A.rows(), n = A.cols();
  if (y.size() != m) throw InvalidParameter("solve_l1: dimension mismatch");
  L1Solution out;
  out.x = Eigen::VectorXd::Zero(n);
  if (y.lpNorm<Eigen::Infinity>() == 0.0) return out;

  // primal (u, v), dual lambda with slacks s = 1 - A'lambda, t = 1 + A'lambda
  const Eigen::LLT<Eigen::MatrixXd> gram(A * A.transpose());
  if (gram.info() != Eigen::Success) throw NumericalFailure("solve_l1: A has dependent rows");
  const Eigen::VectorXd x0 = A.transpose() * gram.solve(y);
  const double shift = std::max(1.0, x0.cwiseAbs().maxCoeff());
  Eigen::VectorXd u = x0.cwiseMax(0.0).array() + shift;
  Eigen::VectorXd v = (-x0).cwiseMax(0.0).array() + shift;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd s = Eigen::VectorXd::Ones(n), t = Eigen::VectorXd::Ones(n);

  const double scale = 1.0 + y.lpNorm<Eigen::Infinity>();
  for (out.iterations = 0; out.iterations < max_iterations; ++out.iterations) {
    const Eigen::VectorXd rp = y - A * (u - v);
    const Eigen::VectorXd At_l = A.transpose() * lambda;
    const Eigen::VectorXd rs = Eigen::VectorXd::Ones(n) - At_l - s;  // dual residual for u
    const Eigen::VectorXd rt = Eigen::VectorXd::Ones(n) + At_l - t;  // dual residual for v
    const double mu = (u.dot(s) + v.dot(t)) / (2.0 * n);
    const double dual_res = std::max(rs.lpNorm<Eigen::Infinity>(), rt.lpNorm<Eigen::Infinity>());
    if (rp.lpNorm<Eigen::Infinity>() < 1e-9 * scale && dual_res < 1e-9 && 2.0 * n * mu < gap_tol * (1.0 + (u + v).sum()))
      break;

    // Eliminating (du, dv, ds, dt) leaves (A D A') dlambda = rhs with D = U/S + V/T.
    const Eigen::ArrayXd du_s = u.array() / s.array(), dv_t = v.array() / t.array();
    const Eigen::VectorXd d = (du_s + dv_t).matrix();
    Eigen::MatrixXd M = A * d.asDiagonal() * A.transpose();
    M.diagonal().array() += 1e-14 * M.diagonal().maxCoeff();
    const Eigen::LLT<Eigen::MatrixXd> chol(M);
    if (chol.info() != Eigen::Success) throw NumericalFailure("solve_l1: normal equations lost definiteness");

    const auto direction = [&](const Eigen::ArrayXd& cu, const Eigen::ArrayXd& cv) {
      // complementarity targets: u s = cu, v t = cv
      const Eigen::ArrayXd gu = (cu - u.array() * s.array() - u.array() * rs.array()) / s.array();
      const Eigen::ArrayXd gv = (cv - v.array() * t.array() - v.array() * rt.array()) / t.array();
      const Eigen::VectorXd dl = chol.solve(rp - A * (gu - gv).matrix());
      const Eigen::ArrayXd Adl = (A.transpose() * dl).array();
      const Eigen::VectorXd dU = (gu + du_s * Adl).matrix();
      const Eigen::VectorXd dV = (gv - dv_t * Adl).matrix();
      const Eigen::VectorXd dS = (rs.array() - Adl).matrix();
      const Eigen::VectorXd dT = (rt.array() + Adl).matrix();
      return std::tuple{dU, dV, dl, dS, dT};
    };

    const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(n);
    auto [au, av, al, as, at] = direction(zero, zero);
    const double ap = std::min(detail::max_step(u, au), detail::max_step(v, av));
    const double ad = std::min(detail::max_step(s, as), detail::max_step(t, at));
    const double mu_aff =
        ((u + ap * au).dot(s + ad * as) + (v + ap * av).dot(t + ad * at)) / (2.0 * n);
    const double sigma = std::pow(mu_aff / mu, 3);
    const Eigen::ArrayXd cu = sigma * mu - au.array() * as.array();
    const Eigen::ArrayXd cv = sigma * mu - av.array() * at.array();
    auto [du, dv, dl, ds, dt] = direction(cu, cv);
    const double step_p = std::min(1.0, 0.995 * std::min(detail::max_step(u, du), detail::max_step(v, dv)));
    const double step_d = std::min(1.0, 0.995 * std::min(detail::max_step(s, ds), detail::max_step(t, dt)));
    u += step_p * du;
    v += step_p * dv;
    lambda += step_d * dl;
    s += step_d * ds;
    t += step_d * dt;
  }

  out.x = u - v;
  // polish: re-solve on the detected support when it is small enough to be determined
  const double cut = 1e-8 * out.x.cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(out.x(i)) > cut) support.push_back(i);
  if (!support.empty() && static_cast<Eigen::Index>(support.size()) <= m) {
    Eigen::MatrixXd As(m, static_cast<Eigen::Index>(support.size()));
    for (std::size_t j = 0; j < support.size(); ++j) As.col(static_cast<Eigen::Index>(j)) = A.col(support[j]);
    const Eigen::VectorXd xs = As.colPivHouseholderQr().solve(y);
    Eigen::VectorXd polished = Eigen::VectorXd::Zero(n);
    for (std::size_t j = 0; j < support.size(); ++j) polished(support[j]) = xs(static_cast<Eigen::Index>(j));
    const bool consistent = (A * polished - y).norm() <= 1e-10 * (1.0 + y.norm());
    if (consistent && polished.lpNorm<1>() <= out.x.lpNorm<1>() + 1e-9) out.x = polished;
  }
  out.objective = out.x.lpNorm<1>();
  out.duality_gap = detail::certified_gap(A, y, out.x, lambda);
  return out;
}

// ---------------------------------------------------------------------------
// Iteratively reweighted least squares on sum (x_i^2 + eps)^{q/2}.

struct IrlsOptions {
  int restarts = 3;
  double eps_start = 1.0;
  double eps_min = 1e-12;
  int max_iterations = 1000;
  std::uint64_t seed = 0;
  std::optional<Eigen::VectorXd> initial;  // used by the first restart; starts at eps_min
};

namespace detail {

inline Eigen::VectorXd weighted_min_norm(const Eigen::MatrixXd& A, const Eigen::VectorXd& y,
                                         const Eigen::VectorXd& w) {
  const Eigen::MatrixXd AW = A * w.asDiagonal();
  Eigen::MatrixXd M = AW * A.transpose();
  M.diagonal().array() += 1e-15 * std::max(M.diagonal().maxCoeff(), 1e-300);
  return w.asDiagonal() * (A.transpose() * M.ldlt().solve(y));
}

inline Eigen::VectorXd project_feasible(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, Eigen::VectorXd x) {
  const Eigen::VectorXd r = y - A * x;
  x += A.transpose() * (A * A.transpose()).ldlt().solve(r);
  return x;
}

inline double lq_mass(const Eigen::VectorXd& x, double q) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += x(i) == 0.0 ? 0.0 : std::pow(std::abs(x(i)), q);
  return s;
}

}  // namespace detail

/// Heuristic local lq solver: best of `restarts` IRLS runs by sum |x_i|^q.
/// The first restart starts from the minimum l2-norm solution (or `initial`),
/// the others from random weights.
inline Eigen::VectorXd solve_irls_lq(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double q,
                                     const IrlsOptions& opt = {}) {
  if (!(q > 0.0 && q < 1.0)) throw InvalidParameter("solve_irls_lq: need 0 < q < 1");
  const Eigen::Index n = A.cols();
  const CounterRng rng(opt.seed, 0x1415);
  Eigen::VectorXd best;
  double best_mass = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, opt.restarts); ++r) {
    Eigen::VectorXd x;
    double eps = opt.eps_start;
    if (r == 0 && opt.initial) {
      x = *opt.initial;
      eps = opt.eps_min;
    } else {
      Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
      if (r > 0)
        for (Eigen::Index i = 0; i < n; ++i) w(i) = rng.uniform(static_cast<std::uint64_t>(r) * n + i);
      x = detail::weighted_min_norm(A, y, w);
    }
    for (int it = 0; it < opt.max_iterations; ++it) {
      const Eigen::VectorXd w = (x.array().square() + eps).pow(1.0 - 0.5 * q).matrix();
      const Eigen::VectorXd next = detail::weighted_min_norm(A, y, w);
      const double change = (next - x).norm();
      x = next;
      if (change < std::sqrt(eps) / 100.0) {
        if (eps <= opt.eps_min) break;
        eps = std::max(eps / 10.0, opt.eps_min);
      }
    }
    x = detail::project_feasible(A, y, x);
    const double mass = detail::lq_mass(x, q);
    if (mass < best_mass) {
      best_mass = mass;
      best = x;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Null-space probe of the sufficient recovery condition.

/// Orthonormal basis (n x (n - m)) of the null space of a full-row-rank A.
inline Eigen::MatrixXd null_space_basis(const Eigen::MatrixXd& A) {
  const Eigen::Index m = A.rows(), n = A.cols();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(A.transpose());
  const Eigen::MatrixXd R = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  const double tiny = 1e-10 * R.diagonal().cwiseAbs().maxCoeff();
  if ((R.diagonal().cwiseAbs().array() <= tiny).any()) throw NumericalFailure("null_space_basis: A is rank deficient");
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  return Q.rightCols(n - m);
}

namespace detail {

// Margin of the recovery condition at w; violated when <= 0.
inline double condition_margin(ThresholdKind kind, const Eigen::VectorXd& w, const Eigen::VectorXd& x, int k,
                               double q) {
  const Eigen::Index n = w.size();
  const auto mass = [q](double v) { return v == 0.0 ? 0.0 : q == 0.0 ? 1.0 : std::pow(std::abs(v), q); };
  double off = 0.0, on = 0.0;
  switch (kind) {
    case ThresholdKind::sectional:
      for (Eigen::Index i = 0; i < n; ++i) (i < n - k ? off : on) += mass(w(i));
      return off - on;
    case ThresholdKind::strong: {
      std::vector<double> v(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = mass(w(i));
      std::nth_element(v.begin(), v.begin() + k, v.end(), std::greater<>());
      for (std::size_t i = 0; i < v.size(); ++i) (static_cast<int>(i) < k ? on : off) += v[i];
      return off - on;
    }
    case ThresholdKind::weak:
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i < n - k) off += mass(w(i));
        else on += mass(x(i) + w(i)) - mass(x(i));
      }
      return off + on;
  }
  return 0.0;
}

}  // namespace detail

/// Fraction of `probes` random-start local searches that find a null-space
/// vector violating the condition. A violation disproves the sufficient
/// condition; finding none is evidence only.
inline double nullspace_probe(const Eigen::MatrixXd& A, const Eigen::VectorXd& x, ThresholdKind kind, double q,
                              int k, int probes, std::uint64_t seed = 0) {
  if (k == 0 && kind != ThresholdKind::weak) return 0.0;
  const Eigen::MatrixXd B = null_space_basis(A);
  const Eigen::Index d = B.cols();
  const CounterRng rng(seed, 0x9e37);
  std::uint64_t draw = 0;
  const auto gaussian = [&] {
    Eigen::VectorXd z(d);
    for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.normal(draw++);
    return z;
  };
  // the weak condition is not scale invariant: search over a few radii
  const std::vector<double> radii = kind == ThresholdKind::weak ? log_grid(1e-2, 1e2, 9) : std::vector<double>{1.0};
  const auto margin = [&](const Eigen::VectorXd& c) {
    const Eigen::VectorXd u = B * c.normalized();
    double best = std::numeric_limits<double>::infinity();
    for (double r : radii) best = std::min(best, detail::condition_margin(kind, r * u, x, k, q));
    return best;
  };

  int violations = 0;
  for (int p = 0; p < probes; ++p) {
    Eigen::VectorXd c = gaussian().normalized();
    double f = margin(c);
    if (d == 1) {
      violations += std::min(f, margin(-c)) <= 0.0;
      continue;
    }
    for (double step = 0.5; step > 1e-4 && f > 0.0;) {
      bool improved = false;
      for (int tries = 0; tries < 20 && !improved; ++tries) {
        const Eigen::VectorXd trial = (c + step * gaussian().normalized()).normalized();
        const double g = margin(trial);
        if (g < f) {
          c = trial;
          f = g;
          improved = true;
        }
      }
      if (!improved) step *= 0.5;
    }
    violations += f <= 0.0;
  }
  return static_cast<double>(violations) / probes;
}

// ---------------------------------------------------------------------------

struct TrialOutcome {
  bool recovered = false;
  double residual = 0.0;
  bool condition_violated = false;
  bool discarded = false;
  std::string message;
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Wilson score interval for `successes` out of `trials` at normal quantile z.
inline Interval wilson_interval(int successes, int trials, double z = 1.959963984540054) {
  if (trials <= 0) return {};
  const double nn = trials, p = successes / nn, z2 = z * z;
  const double center = (p + z2 / (2.0 * nn)) / (1.0 + z2 / nn);
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / (1.0 + z2 / nn);
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

inline bool is_recovered(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth, double* residual = nullptr) {
  const double r = (estimate - truth).norm();
  if (residual) *residual = r;
  return r <= 1e-6 * std::max(1.0, truth.norm());
}

inline TrialOutcome run_trial(const ExperimentConfig& cfg, std::uint64_t trial) {
  const Instance inst = gen_instance(cfg, trial);
  TrialOutcome out;
  try {
    switch (cfg.solver) {
      case Solver::l1_lp: {
        out.recovered = is_recovered(solve_l1(inst.A, inst.y).x, inst.x, &out.residual);
        break;
      }
      case Solver::irls_lq: {
        IrlsOptions opt;
        opt.restarts = cfg.irls_restarts;
        opt.seed = splitmix64(cfg.seed ^ splitmix64(trial));
        out.recovered = is_recovered(solve_irls_lq(inst.A, inst.y, cfg.q, opt), inst.x, &out.residual);
        break;
      }
      case Solver::nullspace_probe: {
        const double frac = nullspace_probe(inst.A, inst.x, cfg.probe_kind, cfg.q, cfg.k(), cfg.probes,
                                            splitmix64(cfg.seed ^ splitmix64(trial)));
        out.condition_violated = frac > 0.0;
        out.recovered = !out.condition_violated;
        break;
      }
    }
  } catch (const NumericalFailure& e) {
    out.discarded = true;
    out.message = e.what();
  }
  return out;
}

struct ExperimentSummary {
  int trials = 0;      // counted (non-discarded) trials
  int successes = 0;
  int discarded = 0;
  double rate = 0.0;
  Interval ci{};
  std::vector<TrialOutcome> outcomes;
};

/// Runs all trials; each trial's randomness depends only on (seed, trial index).
inline ExperimentSummary run_experiment(const ExperimentConfig& cfg, int jobs = 1) {
  validate(cfg);
  ExperimentSummary out;
  out.outcomes.resize(static_cast<std::size_t>(cfg.trials));
  parallel_for(out.outcomes.size(), jobs, [&](std::size_t t) { out.outcomes[t] = run_trial(cfg, t); });
  for (const auto& o : out.outcomes) {
    if (o.discarded) {
      ++out.discarded;
      continue;
    }
    ++out.trials;
    out.successes += o.recovered;
  }
  out.rate = out.trials > 0 ? static_cast<double>(out.successes) / out.trials : 0.0;
  out.ci = wilson_interval(out.successes, out.trials);
  return out;
}

/// Beta at which the success rate crosses 1/2, by linear interpolation
/// between the first adjacent pair that straddles it; empty if none does.
inline std::optional<double> half_success_crossing(const std::vector<double>& betas, const std::vector<double>& rates) {
  for (std::size_t i = 0; i + 1 < betas.size(); ++i) {
    if (rates[i] >= 0.5 && rates[i + 1] < 0.5) {
      const double t = (rates[i] - 0.5) / (rates[i] - rates[i + 1]);
      return betas[i] + t * (betas[i + 1] - betas[i]);
    }
  }
  return std::nullopt;
}

}  // namespace lqlift
