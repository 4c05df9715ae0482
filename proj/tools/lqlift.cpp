// lqlift: threshold curves, q -> 0 closed forms, Monte Carlo validation and selftest.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lqlift/lqlift.hpp"

namespace {

using lqlift::Cell;
using nlohmann::ordered_json;

constexpr int exit_usage = 2;
constexpr int exit_failure = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double parse_real(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw UsageError("not a number: '" + s + "'");
  return v;
}

/// `start:stop:step` (inclusive, step > 0) or a comma list.
std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(parse_real(p));
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0])
      throw UsageError("grid must be start:stop:step with step > 0: '" + text + "'");
    const auto count = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
    for (long i = 0; i <= count; ++i) {
      // round to 12 decimals so 0.1:0.9:0.1 gives 0.3, not 0.30000000000000004
      const double v = parts[0] + static_cast<double>(i) * parts[2];
      out.push_back(std::round(v * 1e12) / 1e12);
    }
    return out;
  }
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');) out.push_back(parse_real(p));
  if (out.empty()) throw UsageError("empty list");
  return out;
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("range must be lo:hi: '" + text + "'");
  const double lo = parse_real(text.substr(0, colon)), hi = parse_real(text.substr(colon + 1));
  if (!(lo > 0.0 && hi > lo)) throw UsageError("range needs 0 < lo < hi: '" + text + "'");
  return {lo, hi};
}

lqlift::ThresholdKind parse_kind(const std::string& s) {
  if (s == "sectional") return lqlift::ThresholdKind::sectional;
  if (s == "strong") return lqlift::ThresholdKind::strong;
  if (s == "weak") return lqlift::ThresholdKind::weak;
  throw UsageError("unknown kind '" + s + "'");
}

lqlift::ModeSelection parse_mode(const std::string& s) {
  if (s == "lifted") return lqlift::ModeSelection::lifted;
  if (s == "limit") return lqlift::ModeSelection::limit;
  if (s == "both") return lqlift::ModeSelection::both;
  throw UsageError("unknown mode '" + s + "'");
}

struct Options {
  std::string kind = "sectional";
  std::string q = "1";
  std::string alpha = "0.1:0.9:0.1";
  std::string beta;
  std::string mode = "both";
  std::string solver = "l1_lp";
  double beta_tol = 1e-4;
  int quad_nodes = 256;
  std::string c3_range;
  long long seed = 0;
  int trials = 200;
  int n = 200;
  int jobs = lqlift::default_jobs();
  std::string out = ".";
  bool fast = false;
  bool inject_erf_fault = false;
};

long long effective_seed(const Options& o) {
  if (const char* env = std::getenv("LQLIFT_SEED"); env && *env) {
    try {
      return std::stoll(env);
    } catch (const std::exception&) {
      throw UsageError("LQLIFT_SEED is not an integer");
    }
  }
  return o.seed;
}

lqlift::QuadratureSpec quad_spec(const Options& o) {
  if (o.quad_nodes < 16) throw UsageError("--quad-nodes must be at least 16");
  lqlift::QuadratureSpec spec;
  spec.node_count = o.quad_nodes;
  return spec;
}

lqlift::ConditionOptions condition_options(const Options& o) {
  lqlift::ConditionOptions c;
  if (!o.c3_range.empty()) std::tie(c.c3_min, c.c3_max) = parse_range(o.c3_range);
  if (o.fast) {
    c.c3_scan = 13;
    c.mu_scan = 7;
  }
  return c;
}

std::filesystem::path prepare_out(const Options& o) {
  std::filesystem::path dir(o.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Cell opt_cell(const std::optional<double>& v) { return v ? Cell{*v} : Cell{}; }

std::string joined_flags(const lqlift::CurvePoint& p) {
  std::string s;
  const auto add = [&](const std::optional<lqlift::BetaSolution>& sol, const char* tag) {
    if (!sol) return;
    const std::string f = sol->flags.str();
    if (f.empty()) return;
    if (!s.empty()) s += '|';
    s += tag;
    s += ':';
    s += f;
  };
  add(p.lifted, "lifted");
  add(p.limit, "limit");
  return s;
}

int run_curve(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  lqlift::CurveRequest req;
  req.kind = parse_kind(o.kind);
  req.q_list = parse_grid(o.q);
  req.alpha_grid = parse_grid(o.alpha);
  req.mode = parse_mode(o.mode);
  req.beta_tol = o.beta_tol;
  req.spec = quad_spec(o);
  req.condition = condition_options(o);
  req.seed = static_cast<unsigned long long>(effective_seed(o));
  try {
    lqlift::validate(req);
  } catch (const lqlift::InvalidParameter& e) {
    throw UsageError(e.what());
  }
  const auto dir = prepare_out(o);

  const auto points = lqlift::sweep(req, o.jobs);

  lqlift::Manifest manifest{"curve", ordered_json{{"kind", o.kind},
                                                  {"q", req.q_list},
                                                  {"alpha", req.alpha_grid},
                                                  {"mode", o.mode},
                                                  {"beta_tol", req.beta_tol},
                                                  {"quad_nodes", req.spec.node_count},
                                                  {"c3_range", {req.condition.c3_min, req.condition.c3_max}},
                                                  {"fast", o.fast},
                                                  {"seed", effective_seed(o)}}};
  lqlift::Table table({"alpha", "q", "beta_lifted", "beta_limit", "c3_star", "gamma_star", "nu_star", "mu_star",
                       "flags"});
  // bracket residuals have no CSV column; they ride along in the JSON twin
  auto residuals = ordered_json::array();
  const auto residual_json = [](const std::optional<lqlift::BetaSolution>& s) -> ordered_json {
    if (!s || s->flags.error) return nullptr;
    return {{"beta_lo", s->beta_lo}, {"beta_hi", s->beta_hi}, {"below", s->residual_below}, {"above", s->residual_above}};
  };
  bool any_ok = false;
  for (const auto& p : points) {
    residuals.push_back({{"lifted", residual_json(p.lifted)}, {"limit", residual_json(p.limit)}});
    const auto& diag = p.lifted ? p.lifted : p.limit;
    const auto beta_of = [](const std::optional<lqlift::BetaSolution>& s) -> std::optional<double> {
      if (!s || s->flags.error) return std::nullopt;
      return s->beta;
    };
    any_ok = any_ok || beta_of(p.lifted) || beta_of(p.limit);
    table.add_row({p.alpha, p.q, opt_cell(beta_of(p.lifted)), opt_cell(beta_of(p.limit)),
                   opt_cell(diag ? std::optional(diag->argmin.c3) : std::nullopt),
                   opt_cell(diag ? std::optional(diag->argmin.gamma) : std::nullopt),
                   opt_cell(diag ? std::optional(diag->argmin.nu1) : std::nullopt),
                   opt_cell(diag ? std::optional(diag->argmin.mu) : std::nullopt), joined_flags(p)});
  }
  const std::string stem = (dir / ("curve_" + o.kind + "_" + o.mode)).string();
  lqlift::write_table(stem, manifest, table, ordered_json{{"residuals", residuals}});
  lqlift::write_timing(stem, seconds_since(t0));
  std::cout << "wrote " << stem << ".csv (" << points.size() << " rows)\n";
  return any_ok ? 0 : exit_failure;
}

int run_q0(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto alphas = parse_grid(o.alpha);
  double c3_max = 1e4;
  if (!o.c3_range.empty()) c3_max = parse_range(o.c3_range).second;
  std::vector<std::string> kinds;
  if (o.kind == "sectional" || o.kind == "strong") kinds = {o.kind};
  else if (o.kind == "both") kinds = {"sectional", "strong"};
  else throw UsageError("q0 supports --kind sectional, strong or both");
  for (double a : alphas)
    if (!(a > 0.0 && a <= 1.0)) throw UsageError("alpha must lie in (0, 1]");
  const auto dir = prepare_out(o);

  for (const auto& kind_name : kinds) {
    const auto kind = parse_kind(kind_name);
    std::vector<lqlift::Q0Threshold> rows(alphas.size());
    lqlift::parallel_for(alphas.size(), o.jobs,
                         [&](std::size_t i) { rows[i] = lqlift::q0_threshold(alphas[i], kind, c3_max); });
    lqlift::Manifest manifest{"q0", ordered_json{{"kind", kind_name}, {"alpha", alphas}, {"c3_max", c3_max}}};
    lqlift::Table table({"alpha", "c3_max", "beta_star", "margin", "crossing", "c3_star", "b_star", "nu_g_star"});
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      const auto& r = rows[i];
      table.add_row({alphas[i], c3_max, r.beta, r.residual, r.supremum, r.argmax.c3, r.argmax.b, r.argmax.nu_g});
    }
    const std::string stem = (dir / ("q0_" + kind_name)).string();
    lqlift::write_table(stem, manifest, table);
    lqlift::write_timing(stem, seconds_since(t0));
    std::cout << "wrote " << stem << ".csv (" << alphas.size() << " rows)\n";
  }
  return 0;
}

lqlift::Solver parse_solver(const std::string& s) {
  if (s == "l1_lp") return lqlift::Solver::l1_lp;
  if (s == "irls_lq") return lqlift::Solver::irls_lq;
  if (s == "nullspace_probe") return lqlift::Solver::nullspace_probe;
  throw UsageError("unknown solver '" + s + "'");
}

int run_empirical(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto alphas = parse_grid(o.alpha);
  const auto qs = parse_grid(o.q);
  const auto solver = parse_solver(o.solver);
  const auto kind = parse_kind(o.kind);
  const auto mode = parse_mode(o.mode);
  const auto spec = quad_spec(o);
  const auto seed = static_cast<std::uint64_t>(effective_seed(o));
  if (o.trials < 1 || o.n < 2) throw UsageError("--trials and --n must be positive");
  const auto dir = prepare_out(o);

  lqlift::SolveOptions sopt;
  sopt.beta_tol = o.beta_tol;
  sopt.condition = condition_options(o);
  lqlift::Table table({"alpha", "q", "n", "m", "k", "beta", "trials", "successes", "discarded", "rate", "ci_lo",
                       "ci_hi", "seed", "bound_limit", "bound_lifted", "solver"});
  for (double q : qs)
    for (double alpha : alphas) {
      std::optional<double> limit, lifted;
      if (mode != lqlift::ModeSelection::lifted)
        limit = lqlift::solve_beta(kind, alpha, q, lqlift::Mode::limit, spec, sopt).beta;
      if (mode != lqlift::ModeSelection::limit)
        lifted = lqlift::solve_beta(kind, alpha, q, lqlift::Mode::lifted, spec, sopt).beta;
      std::vector<double> betas;
      if (!o.beta.empty()) {
        betas = parse_grid(o.beta);
      } else {
        // 11 points across +-25% of the computed bound
        const double centre = limit ? *limit : *lifted;
        for (int i = 0; i <= 10; ++i) betas.push_back(centre * (0.75 + 0.05 * i));
      }
      for (std::size_t b = 0; b < betas.size(); ++b) {
        lqlift::ExperimentConfig cfg;
        cfg.n = o.n;
        cfg.alpha = alpha;
        cfg.beta = betas[b];
        cfg.q = q;
        cfg.trials = o.trials;
        cfg.solver = solver;
        cfg.probe_kind = kind;
        // one stream per output row
        cfg.seed = lqlift::splitmix64(seed ^ lqlift::splitmix64(table.rows().size()));
        try {
          lqlift::validate(cfg);
        } catch (const lqlift::InvalidParameter& e) {
          throw UsageError(e.what());
        }
        const auto s = lqlift::run_experiment(cfg, o.jobs);
        table.add_row({alpha, q, static_cast<long long>(cfg.n), static_cast<long long>(cfg.m()),
                       static_cast<long long>(cfg.k()), cfg.beta, static_cast<long long>(s.trials),
                       static_cast<long long>(s.successes), static_cast<long long>(s.discarded), s.rate, s.ci.lo,
                       s.ci.hi, std::to_string(cfg.seed), opt_cell(limit), opt_cell(lifted),
                       solver == lqlift::Solver::irls_lq ? std::string("irls_lq (heuristic local solver)")
                                                         : std::string(lqlift::to_string(solver))});
      }
    }
  lqlift::Manifest manifest{"empirical", ordered_json{{"kind", o.kind},
                                                      {"q", qs},
                                                      {"alpha", alphas},
                                                      {"beta", o.beta},
                                                      {"mode", o.mode},
                                                      {"solver", o.solver},
                                                      {"n", o.n},
                                                      {"trials", o.trials},
                                                      {"beta_tol", o.beta_tol},
                                                      {"quad_nodes", o.quad_nodes},
                                                      {"fast", o.fast},
                                                      {"seed", effective_seed(o)}}};
  const std::string stem = (dir / ("empirical_" + o.kind + "_" + o.solver)).string();
  lqlift::write_table(stem, manifest, table);
  lqlift::write_timing(stem, seconds_since(t0));
  std::cout << "wrote " << stem << ".csv (" << table.rows().size() << " rows)\n";
  return 0;
}

int run_selftest(const Options& o) {
  lqlift::ErfCoefficients k = lqlift::cody_coefficients;
  if (o.inject_erf_fault) k.a[0] *= 1.001;
  const auto results = lqlift::run_selftest(o.fast, k);
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%-26s %s  %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.detail.c_str());
    ok = ok && r.passed;
  }
  return ok ? 0 : exit_failure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lqlift: lifted lq recovery thresholds"};
  app.require_subcommand(1);
  Options o;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--beta-tol", o.beta_tol, "bisection tolerance on beta")->capture_default_str();
    sub->add_option("--quad-nodes", o.quad_nodes, "quadrature node count N")->capture_default_str();
    sub->add_option("--c3-range", o.c3_range, "lo:hi search range for c3");
    sub->add_option("--seed", o.seed, "seed (LQLIFT_SEED overrides)")->capture_default_str();
    sub->add_option("--jobs", o.jobs, "worker threads")->capture_default_str();
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_flag("--fast", o.fast, "coarser scans");
  };

  auto* curve = app.add_subcommand("curve", "threshold curves beta*(alpha)");
  curve->add_option("--kind", o.kind, "sectional|strong|weak")->capture_default_str();
  curve->add_option("--q", o.q, "q list or grid")->capture_default_str();
  curve->add_option("--alpha", o.alpha, "alpha list or start:stop:step")->capture_default_str();
  curve->add_option("--mode", o.mode, "lifted|limit|both")->capture_default_str();
  common(curve);

  auto* q0 = app.add_subcommand("q0", "closed-form q -> 0 thresholds");
  q0->add_option("--kind", o.kind, "sectional|strong|both")->capture_default_str();
  q0->add_option("--alpha", o.alpha, "alpha list or start:stop:step")->capture_default_str();
  common(q0);

  auto* emp = app.add_subcommand("empirical", "Monte Carlo recovery rates");
  emp->add_option("--kind", o.kind, "threshold kind for the overlaid bound")->capture_default_str();
  emp->add_option("--q", o.q, "q list")->capture_default_str();
  emp->add_option("--alpha", o.alpha, "alpha list or grid")->capture_default_str();
  emp->add_option("--beta", o.beta, "beta list or grid (default: 11 points around the bound)");
  emp->add_option("--mode", o.mode, "which bounds to overlay: lifted|limit|both")->capture_default_str();
  emp->add_option("--solver", o.solver, "l1_lp|irls_lq|nullspace_probe")->capture_default_str();
  emp->add_option("--trials", o.trials, "trials per beta")->capture_default_str();
  emp->add_option("--n", o.n, "signal dimension")->capture_default_str();
  common(emp);

  auto* self = app.add_subcommand("selftest", "oracle cross-checks");
  self->add_flag("--fast", o.fast, "skip the threshold solves");
  self->add_flag("--inject-erf-fault", o.inject_erf_fault, "corrupt one erf coefficient")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_usage;
  }
  if (o.jobs < 1) {
    std::cerr << "--jobs must be positive\n";
    return exit_usage;
  }

  try {
    if (curve->parsed()) return run_curve(o);
    if (q0->parsed()) return run_q0(o);
    if (emp->parsed()) return run_empirical(o);
    return run_selftest(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_failure;
  }
}
