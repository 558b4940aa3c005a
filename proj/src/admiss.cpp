#include "latsched/admiss.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace latsched {
namespace {

constexpr double kNullityTol = 1e-8;

bool rejected_by_others(const Vector& x, std::span<const std::size_t> subset,
                        std::span<const Matrix> Ms) {
  for (std::size_t j = 0; j < Ms.size(); ++j) {
    if (std::find(subset.begin(), subset.end(), j) != subset.end()) continue;
    if (strictly_inside(x, Ms[j])) return true;
  }
  return false;
}

void check_subset(std::span<const std::size_t> subset,
                  std::span<const Matrix> Ms) {
  for (auto i : subset) {
    if (i >= Ms.size()) {
      throw Error(ErrorKind::kInvalidArgument, "subset index out of range");
    }
  }
}

/// Lexicographic order on matrix entries; used to make pair solving
/// independent of member labelling.
bool entries_less(const Matrix& a, const Matrix& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                      b.data() + b.size());
}

void push_pair(std::vector<CriticalPoint>& out, const Vector& x,
               const Matrix& M0, CriticalKind kind,
               std::span<const std::size_t> subset) {
  for (double sign : {1.0, -1.0}) {
    CriticalPoint cp;
    cp.x = sign * x;
    cp.value = cp.x.dot(M0 * cp.x);
    cp.kind = kind;
    cp.source_subset.assign(subset.begin(), subset.end());
    out.push_back(std::move(cp));
  }
}

void for_each_subset(std::size_t total, std::size_t k,
                     const std::function<bool(const std::vector<std::size_t>&)>& fn) {
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  if (k == 0 || k > total) return;
  while (true) {
    if (!fn(idx)) return;
    std::size_t pos = k;
    while (pos > 0) {
      --pos;
      if (idx[pos] < total - k + pos) break;
      if (pos == 0) return;
    }
    if (idx[pos] >= total - k + pos) return;
    ++idx[pos];
    for (std::size_t j = pos + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base);
  double f = inv;
  double r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

}  // namespace

bool strictly_inside(const Vector& x, const Matrix& M) {
  return x.dot(M * x) < 1.0 - 1e-10;
}

std::vector<Matrix> member_matrices(const EllipsoidSet& set) {
  std::vector<Matrix> Ms;
  Ms.reserve(set.size());
  for (const auto& m : set.members) Ms.push_back(m.M);
  return Ms;
}

std::vector<CriticalPoint> regular_solutions(std::span<const std::size_t> subset,
                                             const Matrix& M0,
                                             std::span<const Matrix> Ms) {
  check_subset(subset, Ms);
  const auto n = M0.rows();
  if (subset.empty() || static_cast<Eigen::Index>(subset.size()) >= n) {
    throw Error(ErrorKind::kInvalidArgument,
                "regular_solutions: requires 1 <= |subset| < n");
  }
  if (subset.size() > 1) {
    throw Error(ErrorKind::kUnsupported,
                "regular_solutions: |subset| >= 2 needs polynomial "
                "continuation (n >= 3); use the sampled method");
  }
  const Matrix& M = Ms[subset[0]];

  // det(M0 + λM) = 0  <=>  M0 g = μ M g with λ = -μ; μ > 0 for PD pencils.
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(M0, M);
  if (ges.info() != Eigen::Success) {
    throw Error(ErrorKind::kSingular, "regular_solutions: degenerate M_gamma");
  }
  const Vector& mu = ges.eigenvalues();
  const Matrix& vecs = ges.eigenvectors();
  const double scale_m0 = M0.norm();
  const double scale_m = M.norm();

  std::vector<CriticalPoint> out;
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i + 1;
    while (j < n && mu(j) - mu(i) <= kNullityTol * std::abs(mu(i))) ++j;
    const double value = mu(i);
    const double lambda = -value;
    const Matrix G = M0 + lambda * M;
    const double ref = std::max(G.norm(), scale_m0 + std::abs(lambda) * scale_m);
    Eigen::JacobiSVD<Matrix> svd(G);
    const Vector& sv = svd.singularValues();
    int kernel = 0;
    for (Eigen::Index s = 0; s < sv.size(); ++s) {
      if (sv(s) < kNullityTol * ref) ++kernel;
    }
    kernel = std::max(kernel, 1);
    if (kernel > 1 && kernel < n) {
      throw Error(ErrorKind::kNullity,
                  "regular_solutions: G(lambda) has nullity " +
                      std::to_string(kernel) + " (degenerate pencil)");
    }
    if (value > 0.0) {
      const Vector g = vecs.col(i);
      const Vector x = g * std::sqrt(value / g.dot(M0 * g));
      if (!rejected_by_others(x, subset, Ms)) {
        const auto before = out.size();
        push_pair(out, x, M0, CriticalKind::kRegular, subset);
        for (auto k = before; k < out.size(); ++k) {
          out[k].lambdas = {lambda};
          out[k].kernel_dim = kernel;
        }
      }
    }
    i = j;
  }
  return out;
}

std::vector<CriticalPoint> isolated_solutions(std::span<const std::size_t> subset,
                                              const Matrix& M0,
                                              std::span<const Matrix> Ms) {
  check_subset(subset, Ms);
  const auto n = M0.rows();
  if (static_cast<Eigen::Index>(subset.size()) != n) {
    throw Error(ErrorKind::kInvalidArgument,
                "isolated_solutions: requires |subset| == n");
  }
  std::vector<CriticalPoint> out;
  if (n == 1) {
    const double m = Ms[subset[0]](0, 0);
    Vector x(1);
    x(0) = 1.0 / std::sqrt(m);
    if (!rejected_by_others(x, subset, Ms)) {
      push_pair(out, x, M0, CriticalKind::kIsolated, subset);
    }
    return out;
  }
  if (n != 2) {
    throw Error(ErrorKind::kUnsupported,
                "isolated_solutions: closed form only for n <= 2");
  }

  const Matrix* a = &Ms[subset[0]];
  const Matrix* b = &Ms[subset[1]];
  if (entries_less(*b, *a)) std::swap(a, b);
  const Matrix diff = *a - *b;
  const double scale = std::max(a->cwiseAbs().maxCoeff(), b->cwiseAbs().maxCoeff());
  if (diff.cwiseAbs().maxCoeff() <= 1e-14 * scale) {
    throw Error(ErrorKind::kInvalidArgument,
                "isolated_solutions: coincident constraints");
  }

  // xᵀ(M_a - M_b)x = 0 is homogeneous: solve for directions first.
  Eigen::SelfAdjointEigenSolver<Matrix> es(diff);
  const double e1 = es.eigenvalues()(0);
  const double e2 = es.eigenvalues()(1);
  const Vector v1 = es.eigenvectors().col(0);
  const Vector v2 = es.eigenvectors().col(1);
  const double tol = 1e-13 * std::max(std::abs(e1), std::abs(e2));

  std::vector<Vector> dirs;
  if (e1 > tol || e2 < -tol) return out;
  if (std::abs(e1) <= tol) {
    dirs.push_back(v1);
  } else if (std::abs(e2) <= tol) {
    dirs.push_back(v2);
  } else {
    dirs.push_back(std::sqrt(e2) * v1 + std::sqrt(-e1) * v2);
    dirs.push_back(std::sqrt(e2) * v1 - std::sqrt(-e1) * v2);
  }
  for (const auto& d : dirs) {
    const Vector x = d / std::sqrt(d.dot(*a * d));
    if (!rejected_by_others(x, subset, Ms)) {
      push_pair(out, x, M0, CriticalKind::kIsolated, subset);
    }
  }
  return out;
}

std::vector<NonRegularSuspect> nonregular_scan(std::span<const Matrix> subset_Ms,
                                               std::span<const Vector> candidates,
                                               const Matrix& M0, double tol) {
  std::vector<NonRegularSuspect> out;
  const std::size_t k = subset_Ms.size();
  if (k <= 1) return out;  // a single nonzero gradient is never dependent
  const auto n = static_cast<std::size_t>(M0.rows());
  if (k >= n) {
    throw Error(ErrorKind::kInvalidArgument,
                "nonregular_scan: requires |subset| < n");
  }
  for (const auto& x : candidates) {
    Matrix W(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    double res2 = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const Vector mx = subset_Ms[c] * x;
      W.col(static_cast<Eigen::Index>(c)) = mx;
      const double h = x.dot(mx) - 1.0;
      res2 += h * h;
    }
    // Minors keeping k of the n rows.
    for_each_subset(n, k, [&](const std::vector<std::size_t>& rows) {
      Matrix sub(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
      for (std::size_t r = 0; r < k; ++r) {
        sub.row(static_cast<Eigen::Index>(r)) =
            W.row(static_cast<Eigen::Index>(rows[r]));
      }
      const double d = sub.determinant();
      res2 += d * d;
      return true;
    });
    const double res = std::sqrt(res2);
    if (res < tol) out.push_back({x, res, x.dot(M0 * x)});
  }
  return out;
}

OracleResult sampling_oracle(const Matrix& M0, std::span<const Matrix> Ms,
                             std::size_t num_directions, bool refine) {
  if (num_directions == 0 || Ms.empty()) {
    throw Error(ErrorKind::kInvalidArgument,
                "sampling_oracle: needs members and >= 1 direction");
  }
  const auto n = M0.rows();
  auto ratio = [&](const Vector& d, double* qmin_out) {
    double qmin = std::numeric_limits<double>::infinity();
    for (const auto& M : Ms) qmin = std::min(qmin, d.dot(M * d));
    if (qmin_out) *qmin_out = qmin;
    return d.dot(M0 * d) / qmin;
  };

  OracleResult best;
  best.R = std::numeric_limits<double>::infinity();
  auto consider = [&](const Vector& d) {
    double qmin = 0.0;
    const double r = ratio(d, &qmin);
    if (r < best.R) {
      best.R = r;
      best.x = d / std::sqrt(qmin);
    }
  };

  if (n == 1) {
    consider(Vector::Ones(1));
    return best;
  }

  if (n == 2) {
    // Quadratic forms are even, so half a turn covers every direction.
    struct Quad { double a, b, c; };
    std::vector<Quad> qs;
    qs.reserve(Ms.size());
    for (const auto& M : Ms) qs.push_back({M(0, 0), M(0, 1) + M(1, 0), M(1, 1)});
    const Quad q0{M0(0, 0), M0(0, 1) + M0(1, 0), M0(1, 1)};
    auto eval = [&](double theta) {
      const double c = std::cos(theta);
      const double s = std::sin(theta);
      double qmin = std::numeric_limits<double>::infinity();
      for (const auto& q : qs) qmin = std::min(qmin, q.a * c * c + q.b * c * s + q.c * s * s);
      return (q0.a * c * c + q0.b * c * s + q0.c * s * s) / qmin;
    };
    const double step = M_PI / static_cast<double>(num_directions);
    double best_theta = 0.0;
    double best_r = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < num_directions; ++i) {
      const double theta = (static_cast<double>(i) + 0.5) * step;
      const double r = eval(theta);
      if (r < best_r) {
        best_r = r;
        best_theta = theta;
      }
    }
    if (refine) {
      constexpr double kInvPhi = 0.6180339887498949;
      double lo = best_theta - step;
      double hi = best_theta + step;
      double x1 = hi - kInvPhi * (hi - lo);
      double x2 = lo + kInvPhi * (hi - lo);
      double f1 = eval(x1);
      double f2 = eval(x2);
      for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        if (f1 < f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - kInvPhi * (hi - lo);
          f1 = eval(x1);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + kInvPhi * (hi - lo);
          f2 = eval(x2);
        }
      }
      const double theta = f1 < f2 ? x1 : x2;
      if (std::min(f1, f2) < best_r) best_theta = theta;
    }
    Vector d(2);
    d << std::cos(best_theta), std::sin(best_theta);
    consider(d);
    return best;
  }

  // n >= 3: Halton points pushed through Box–Muller give quasi-random
  // Gaussian vectors, normalized onto the sphere.
  static constexpr std::array<std::uint64_t, 16> kPrimes = {
      2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  const auto pairs = static_cast<std::size_t>((n + 1) / 2);
  if (2 * pairs > kPrimes.size()) {
    throw Error(ErrorKind::kUnsupported, "sampling_oracle: n too large");
  }
  Vector d(n);
  for (std::size_t i = 0; i < num_directions; ++i) {
    for (std::size_t p = 0; p < pairs; ++p) {
      const double u1 = radical_inverse(i + 1, kPrimes[2 * p]);
      const double u2 = radical_inverse(i + 1, kPrimes[2 * p + 1]);
      const double rad = std::sqrt(-2.0 * std::log(u1));
      const auto r0 = static_cast<Eigen::Index>(2 * p);
      d(r0) = rad * std::cos(2.0 * M_PI * u2);
      if (r0 + 1 < n) d(r0 + 1) = rad * std::sin(2.0 * M_PI * u2);
    }
    const double norm = d.norm();
    if (norm > 0.0) consider(d / norm);
  }
  return best;
}

double sampling_oracle(const EllipsoidSet& set, std::size_t num_directions,
                       bool refine) {
  const auto Ms = member_matrices(set);
  return sampling_oracle(set.M0, Ms, num_directions, refine).R;
}

AdmissibilityReport check_admissibility(const EllipsoidSet& set,
                                        const CheckOptions& options) {
  if (set.members.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "check_admissibility: empty set");
  }
  const auto n = set.M0.rows();
  const auto Ms = member_matrices(set);
  for (const auto& M : Ms) {
    if (M.rows() != n || !M.allFinite() ||
        Eigen::LLT<Matrix>(M).info() != Eigen::Success) {
      throw Error(ErrorKind::kSingular, "check_admissibility: degenerate M_gamma");
    }
  }

  AdmissibilityReport report;
  bool exact = false;
  switch (options.mode) {
    case CheckOptions::Mode::kExact:
      if (n > 2) {
        throw Error(ErrorKind::kUnsupported,
                    "check_admissibility: exact method requires n <= 2");
      }
      exact = true;
      break;
    case CheckOptions::Mode::kSampled:
      break;
    case CheckOptions::Mode::kAuto:
      exact = n <= 2;
      if (!exact) {
        report.warnings.push_back(
            "exact checking is limited to n <= 2; R is approximate (boundary "
            "sampling, upper bound on the true minimum)");
      }
      break;
  }

  if (!exact) {
    auto res = sampling_oracle(set.M0, Ms, options.num_directions);
    CriticalPoint cp;
    cp.x = res.x;
    cp.value = res.R;
    cp.kind = CriticalKind::kSampled;
    report.critical_points.push_back(std::move(cp));
    report.R = res.R;
    report.method = CheckMethod::kSampled;
    report.admissible = report.R > 1.0;
    report.margin = report.R - 1.0;
    return report;
  }

  report.method = CheckMethod::kExact;
  double R = std::numeric_limits<double>::infinity();
  const std::size_t kmax = std::min<std::size_t>(static_cast<std::size_t>(n), Ms.size());
  for (std::size_t k = 1; k <= kmax && !report.early_exit; ++k) {
    for_each_subset(Ms.size(), k, [&](const std::vector<std::size_t>& subset) {
      std::vector<CriticalPoint> pts;
      if (static_cast<Eigen::Index>(k) == n) {
        try {
          pts = isolated_solutions(subset, set.M0, Ms);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kInvalidArgument) throw;
          // Coincident ellipses: their boundary is covered by the singletons.
          report.warnings.push_back(std::string("skipped pair: ") + e.what());
        }
      } else {
        pts = regular_solutions(subset, set.M0, Ms);
      }
      for (auto& p : pts) {
        R = std::min(R, p.value);
        report.critical_points.push_back(std::move(p));
      }
      if (options.verdict_only && R <= 1.0) {
        report.early_exit = true;
        return false;
      }
      return true;
    });
  }
  if (!std::isfinite(R)) {
    report.warnings.push_back("no surviving critical point");
  }
  report.R = R;
  report.admissible = R > 1.0;
  report.margin = R - 1.0;
  return report;
}

AdmissibilityChecker default_checker(std::size_t num_directions) {
  return [num_directions](const EllipsoidSet& set) {
    CheckOptions opts;
    opts.verdict_only = true;
    opts.num_directions = num_directions;
    return check_admissibility(set, opts).R;
  };
}

const char* to_string(CriticalKind kind) {
  switch (kind) {
    case CriticalKind::kIsolated: return "isolated";
    case CriticalKind::kRegular: return "regular";
    case CriticalKind::kSampled: return "sampled";
    case CriticalKind::kNonRegular: return "nonregular";
  }
  return "unknown";
}

const char* to_string(CheckMethod method) {
  return method == CheckMethod::kExact ? "exact" : "sampled";
}

}  // namespace latsched
