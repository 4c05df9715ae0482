#pragma once

// Gauss rules on reference domains.

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>

namespace lqlift {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<double> log_scaled_weights;  // log(w e^{x^2}), Hermite rules only
};

namespace detail {

inline QuadratureRule build_gauss_legendre(int n) {
  QuadratureRule r{std::vector<double>(n), std::vector<double>(n), {}};
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      dp = n * (z * p1 - p2) / (z * z - 1.0);
      const double step = p1 / dp;
      z -= step;
      if (std::abs(step) < 1e-16) break;
    }
    r.nodes[i] = -z;
    r.nodes[n - 1 - i] = z;
    r.weights[i] = r.weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return r;
}

// Nodes start from the eigenvalues of the Jacobi matrix and are polished by
// Newton steps on the orthonormal recurrence, rescaled to stay in range.
inline QuadratureRule build_gauss_hermite(int n) {
  const double pim4 = 0.7511255444649425;  // pi^(-1/4)
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);

  QuadratureRule r{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = eig.eigenvalues()[n - 1 - i];
    double log_dp = 0.0;
    for (int it = 0; it < 50; ++it) {
      double p1 = pim4, p2 = 0.0, log_scale = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
        if (std::abs(p1) > 1e150) {
          p1 *= 1e-150;
          p2 *= 1e-150;
          log_scale += 150.0 * std::log(10.0);
        }
      }
      const double dp = std::sqrt(2.0 * n) * p2;
      log_dp = std::log(std::abs(dp)) + log_scale;
      const double step = p1 / dp;
      z -= step;
      if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    if (n % 2 == 1 && i == n / 2) z = 0.0;
    const double log_w = std::log(2.0) - 2.0 * log_dp;
    r.nodes[i] = z;
    r.nodes[n - 1 - i] = -z;
    r.weights[i] = r.weights[n - 1 - i] = std::exp(log_w);
    r.log_scaled_weights[i] = r.log_scaled_weights[n - 1 - i] = log_w + z * z;
  }
  return r;
}

template <class Build>
const QuadratureRule& cached_rule(std::map<int, std::unique_ptr<QuadratureRule>>& cache,
                                  std::mutex& mu, int n, Build build) {
  std::lock_guard lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<QuadratureRule>(build(n));
  return *slot;
}

}  // namespace detail

/// n-point Gauss-Legendre rule on [-1, 1]. Computed once per n, shared read-only.
inline const QuadratureRule& gauss_legendre(int n) {
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  static std::mutex mu;
  return detail::cached_rule(cache, mu, n, detail::build_gauss_legendre);
}

/// n-point Gauss-Hermite rule for the weight e^{-x^2} on the real line.
inline const QuadratureRule& gauss_hermite(int n) {
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  static std::mutex mu;
  return detail::cached_rule(cache, mu, n, detail::build_gauss_hermite);
}

}  // namespace lqlift
