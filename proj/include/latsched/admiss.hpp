#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "latsched/schedset.hpp"
#include "latsched/types.hpp"

namespace latsched {

enum class CriticalKind { kIsolated, kRegular, kSampled, kNonRegular };

/// Candidate minimizer of xᵀM0x over the boundary of a union of ellipsoids.
struct CriticalPoint {
  Vector x;
  double value = 0.0;  ///< xᵀM0x
  CriticalKind kind = CriticalKind::kRegular;
  std::vector<std::size_t> source_subset;  ///< member indices Γ'
  std::vector<double> lambdas;             ///< multipliers (regular points)
  /// Kernel dimension of G(λ). Greater than one only for a single member
  /// proportional to M0, where the whole ellipse boundary is critical.
  int kernel_dim = 1;
};

enum class CheckMethod { kExact, kSampled };

struct AdmissibilityReport {
  double R = 0.0;
  bool admissible = false;  ///< R > 1
  std::vector<CriticalPoint> critical_points;
  CheckMethod method = CheckMethod::kExact;
  double margin = 0.0;  ///< R - 1
  bool early_exit = false;
  std::vector<std::string> warnings;
};

struct CheckOptions {
  enum class Mode { kAuto, kExact, kSampled };
  Mode mode = Mode::kAuto;
  /// Stop as soon as a surviving critical value ≤ 1 proves inadmissibility.
  bool verdict_only = false;
  std::size_t num_directions = 1'000'000;  ///< for the sampled method
};

/// Global minimum R of xᵀM0x over ∂(∪_γ S_γ); the set is admissible iff
/// R > 1. Exact for n ≤ 2; larger n falls back to boundary sampling (with a
/// warning) unless the exact method is forced, which throws.
[[nodiscard]] AdmissibilityReport check_admissibility(
    const EllipsoidSet& set, const CheckOptions& options = {});

/// Lagrange critical points on ∩_{γ∈Γ'} ∂S_γ for |Γ'| < n, after dropping
/// points strictly inside a member outside Γ'. Implemented for |Γ'| = 1
/// (any n) through the pencil M0 + λM_γ.
[[nodiscard]] std::vector<CriticalPoint> regular_solutions(
    std::span<const std::size_t> subset, const Matrix& M0,
    std::span<const Matrix> Ms);

/// Points of ∩_{γ∈Γ'} ∂S_γ for |Γ'| = n, solved in closed form for n ≤ 2,
/// after the same rejection.
[[nodiscard]] std::vector<CriticalPoint> isolated_solutions(
    std::span<const std::size_t> subset, const Matrix& M0,
    std::span<const Matrix> Ms);

struct NonRegularSuspect {
  Vector x;
  double residual = 0.0;
  double value = 0.0;  ///< xᵀM0x
};

/// Evaluates the non-regularity residual (constraint violations plus all
/// |Γ'|×|Γ'| minors of W(x) = [M_γ x]_{γ∈Γ'}) at the candidate points and
/// returns those below `tol`.
[[nodiscard]] std::vector<NonRegularSuspect> nonregular_scan(
    std::span<const Matrix> subset_Ms, std::span<const Vector> candidates,
    const Matrix& M0, double tol = 1e-6);

struct OracleResult {
  double R = 0.0;
  Vector x;  ///< boundary point attaining R
};

/// Independent estimate R̂ ≥ R from quasi-uniform directions d: the union
/// boundary along d sits at radius max_γ 1/√(dᵀM_γd). For n = 2 the best
/// sample is polished by golden-section search on its neighbouring bracket.
[[nodiscard]] OracleResult sampling_oracle(const Matrix& M0,
                                           std::span<const Matrix> Ms,
                                           std::size_t num_directions,
                                           bool refine = true);
[[nodiscard]] double sampling_oracle(const EllipsoidSet& set,
                                     std::size_t num_directions,
                                     bool refine = true);

/// Strictly-inside test used for rejection: xᵀMx < 1 - 1e-10.
[[nodiscard]] bool strictly_inside(const Vector& x, const Matrix& M);

[[nodiscard]] std::vector<Matrix> member_matrices(const EllipsoidSet& set);

/// Checker for build_schedule_set backed by check_admissibility in
/// verdict-only mode.
[[nodiscard]] AdmissibilityChecker default_checker(
    std::size_t num_directions = 200'000);

[[nodiscard]] const char* to_string(CriticalKind kind);
[[nodiscard]] const char* to_string(CheckMethod method);

}  // namespace latsched
