#pragma once

#include <array>
#include <cmath>
#include <functional>

#include <Eigen/Core>

namespace latsched::quad {

inline constexpr int kGaussPoints = 15;

struct GaussRule {
  std::array<double, kGaussPoints> nodes{};  // on [-1, 1]
  std::array<double, kGaussPoints> weights{};
};

/// 15-point Gauss–Legendre rule, computed once by Newton iteration on P₁₅.
inline const GaussRule& gauss_legendre_15() {
  static const GaussRule rule = [] {
    GaussRule r;
    constexpr int n = kGaussPoints;
    for (int i = 0; i < n; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = pk;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      r.nodes[i] = x;
      r.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
  }();
  return rule;
}

/// Adaptive Gauss–Legendre: a panel is accepted when its 15-point estimate
/// agrees with the sum over its two halves to `abs_tol`; otherwise both
/// halves are refined with half the tolerance each.
template <class F>
double integrate_adaptive(F&& f, double a, double b, double abs_tol = 1e-8,
                          int max_depth = 30) {
  const auto& rule = gauss_legendre_15();
  auto panel = [&](double lo, double hi) {
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    double acc = 0.0;
    for (int i = 0; i < kGaussPoints; ++i) {
      acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
    }
    return acc * half;
  };
  std::function<double(double, double, double, double, int)> rec =
      [&](double lo, double hi, double whole, double tol, int depth) {
        const double mid = 0.5 * (lo + hi);
        const double left = panel(lo, mid);
        const double right = panel(mid, hi);
        if (depth >= max_depth || std::abs(left + right - whole) <= tol) {
          return left + right;
        }
        return rec(lo, mid, left, 0.5 * tol, depth + 1) +
               rec(mid, hi, right, 0.5 * tol, depth + 1);
      };
  if (b <= a) return 0.0;
  return rec(a, b, panel(a, b), abs_tol, 0);
}

/// Matrix-valued variant; convergence is judged on the largest entry-wise
/// discrepancy.
template <class F>
Eigen::MatrixXd integrate_adaptive_matrix(F&& f, double a, double b,
                                          double abs_tol = 1e-8,
                                          int max_depth = 30) {
  const auto& rule = gauss_legendre_15();
  auto panel = [&](double lo, double hi) {
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    Eigen::MatrixXd acc = rule.weights[0] * f(mid + half * rule.nodes[0]);
    for (int i = 1; i < kGaussPoints; ++i) {
      acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
    }
    return Eigen::MatrixXd(acc * half);
  };
  std::function<Eigen::MatrixXd(double, double, const Eigen::MatrixXd&, double,
                                int)>
      rec = [&](double lo, double hi, const Eigen::MatrixXd& whole, double tol,
                int depth) -> Eigen::MatrixXd {
    const double mid = 0.5 * (lo + hi);
    Eigen::MatrixXd left = panel(lo, mid);
    Eigen::MatrixXd right = panel(mid, hi);
    Eigen::MatrixXd sum = left + right;
    if (depth >= max_depth || (sum - whole).cwiseAbs().maxCoeff() <= tol) {
      return sum;
    }
    return rec(lo, mid, left, 0.5 * tol, depth + 1) +
           rec(mid, hi, right, 0.5 * tol, depth + 1);
  };
  const Eigen::MatrixXd first = panel(a, b);
  if (b <= a) return Eigen::MatrixXd::Zero(first.rows(), first.cols());
  return rec(a, b, first, abs_tol, 0);
}

}  // namespace latsched::quad
