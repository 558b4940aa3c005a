#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "latsched/belief.hpp"
#include "latsched/linsys.hpp"
#include "latsched/schedset.hpp"

namespace support {

using latsched::Matrix;
using latsched::ModeIndex;
using latsched::Vector;

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

inline Vector vec(std::initializer_list<double> vals) {
  Vector v(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double x : vals) v(i++) = x;
  return v;
}

inline latsched::SystemModel double_integrator(double w0 = 1.0) {
  latsched::SystemModel m;
  m.A = mat({{0, 1}, {0, 0}});
  m.B = mat({{0}, {1}});
  m.C = mat({{1, 0}});
  m.W0 = w0 * Matrix::Identity(2, 2);
  return m;
}

/// Two-mode double integrator of the paper's first example.
inline latsched::ModeFamily example_family(double w0 = 1.0) {
  latsched::PerceptionMode fast{0.01, mat({{0.5}}), mat({{-1.5, -3}}), 1.0, 0.5};
  latsched::PerceptionMode slow{0.1, mat({{0.01}}), mat({{-1.5, -3}}), 1.0, 0.5};
  return {double_integrator(w0), {fast, slow}};
}

inline Matrix example_M0() { return mat({{3.53, -1.10}, {-1.10, 1.36}}); }

inline latsched::CostConfig example_cost(double T_f) {
  latsched::CostConfig c;
  c.lambda_x = 1.0;
  c.lambda_r = 0.05;
  c.T_f = T_f;
  c.Q = mat({{2, 0}, {0, 1}});
  c.Q_f = c.Q;
  return c;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c,
                            double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

inline Matrix random_spd(std::mt19937_64& rng, Eigen::Index n, double floor = 0.1) {
  Matrix g = random_matrix(rng, n, n);
  return g * g.transpose() + floor * Matrix::Identity(n, n);
}

/// Random model whose A has spectrum in the left half plane.
inline latsched::SystemModel random_stable_model(std::mt19937_64& rng,
                                                 Eigen::Index n) {
  latsched::SystemModel m;
  Matrix a = random_matrix(rng, n, n);
  Eigen::EigenSolver<Matrix> es(a);
  const double shift = es.eigenvalues().real().maxCoeff();
  m.A = a - (shift + 0.5) * Matrix::Identity(n, n);
  m.B = random_matrix(rng, n, 1);
  m.C = random_matrix(rng, 1, n);
  Matrix g = random_matrix(rng, n, n, 0.5);
  m.W0 = g * g.transpose();
  return m;
}

/// exp(M) by Taylor series; only used on matrices of small norm.
inline Matrix taylor_exp(const Matrix& m, int terms = 30) {
  Matrix sum = Matrix::Identity(m.rows(), m.cols());
  Matrix term = sum;
  for (int k = 1; k < terms; ++k) {
    term = term * m / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

struct QuadratureDiscretization {
  Matrix Ad, Bd, Wd;
};

/// A_d, B_d, W_d from their integral definitions by composite Simpson with
/// `steps` panels; exp(As) advanced by a Taylor-series step.
inline QuadratureDiscretization quadrature_discretization(
    const latsched::SystemModel& m, double delta, long steps) {
  const auto n = m.A.rows();
  const double h = delta / static_cast<double>(steps);
  const Matrix step = taylor_exp(m.A * (h / 2.0), 12);
  Matrix e = Matrix::Identity(n, n);
  Matrix intB = Matrix::Zero(n, n);
  Matrix intW = Matrix::Zero(n, n);
  auto add = [&](const Matrix& ex, double w) {
    intB += w * ex;
    intW += w * ex * m.W0 * ex.transpose();
  };
  add(e, 1.0);
  for (long k = 0; k < steps; ++k) {
    e = step * e;
    add(e, 4.0);
    e = step * e;
    add(e, k + 1 == steps ? 1.0 : 2.0);
  }
  const double f = h / 6.0;
  return {e, intB * f * m.B, intW * f};
}

/// Every decision tree: at each epoch any set may be chosen, and that
/// set's switching law at the current mean picks the piece. Leaves are
/// priced from scratch with evaluate_cost on the concatenated schedule.
/// Among minimizers the first in lexicographic order of set choices wins.
struct BruteForce {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<ModeIndex> schedule;
  std::vector<std::size_t> sets;
  std::size_t leaves = 0;
};

inline BruteForce brute_force_plan(const latsched::GaussianBelief& b0,
                                   std::span<const latsched::EllipsoidSet> sets,
                                   const latsched::ModeFamily& family,
                                   const latsched::CostConfig& cfg) {
  BruteForce best;
  const double end = cfg.T_f * (1.0 - latsched::kHorizonSlack);
  std::vector<ModeIndex> sched;
  std::vector<std::size_t> ids;
  std::function<void(const latsched::GaussianBelief&, double)> rec =
      [&](const latsched::GaussianBelief& b, double t) {
        for (std::size_t s = 0; s < sets.size(); ++s) {
          const auto& gamma = latsched::switching_law(b.mean, sets[s]);
          latsched::GaussianBelief cur = b;
          double tt = t;
          for (ModeIndex i : gamma.modes) {
            tt += family.mode(i).delta;
            if (tt >= end) break;
            cur = latsched::step_belief(cur, family, i);
          }
          const std::size_t mark = sched.size();
          sched.insert(sched.end(), gamma.modes.begin(), gamma.modes.end());
          ids.push_back(s);
          if (tt < end) {
            rec(cur, tt);
          } else {
            ++best.leaves;
            const double c = latsched::evaluate_cost(sched, b0, family, cfg).total;
            if (c < best.cost) {
              best.cost = c;
              best.schedule = sched;
              best.sets = ids;
            }
          }
          sched.resize(mark);
          ids.pop_back();
        }
      };
  rec(b0, 0.0);
  return best;
}

}  // namespace support
