#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "latsched/belief.hpp"
#include "latsched/linsys.hpp"
#include "latsched/types.hpp"

namespace latsched {

/// A finite mode sequence γ (1-based indices) and its Σ Δ^{γ_k}.
struct Schedule {
  std::vector<ModeIndex> modes;
  double total_latency = 0.0;

  [[nodiscard]] std::size_t size() const { return modes.size(); }
  friend bool operator==(const Schedule& a, const Schedule& b) {
    return a.modes == b.modes;
  }
};

[[nodiscard]] Schedule make_schedule(std::vector<ModeIndex> modes,
                                     const ModeFamily& family);

struct SetMember {
  Schedule schedule;
  Matrix M;  ///< (Λ^γ)ᵀ M0 Λ^γ
};

/// A set of schedules Γ with the ellipsoids S_γ = {x : xᵀM_γx ≤ 1}.
struct EllipsoidSet {
  Matrix M0;
  std::vector<SetMember> members;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  std::optional<double> R;  ///< admissibility value when known

  [[nodiscard]] std::size_t size() const { return members.size(); }
  [[nodiscard]] Eigen::Index states() const { return M0.rows(); }
  /// Smallest total latency among members.
  [[nodiscard]] double min_latency() const;
};

/// (Λ^γ)ᵀ M0 Λ^γ for a chain of discretized modes (first mode acts first).
[[nodiscard]] Matrix ellipsoid_matrix(std::span<const DiscretizedMode> chain,
                                      const Matrix& M0);
[[nodiscard]] Matrix ellipsoid_matrix(std::span<const ModeIndex> gamma,
                                      const ModeFamily& family,
                                      const Matrix& M0);

/// Builds a set from explicit schedules; duplicates are rejected.
[[nodiscard]] EllipsoidSet make_ellipsoid_set(
    const ModeFamily& family, const Matrix& M0,
    const std::vector<std::vector<ModeIndex>>& schedules);

/// Index of argmin_γ xᵀM_γx. Values within a relative 1e-12 of the minimum
/// count as ties, resolved by lower total latency, then lexicographic
/// mode order.
[[nodiscard]] std::size_t switching_index(const Vector& x,
                                          const EllipsoidSet& set);
[[nodiscard]] const Schedule& switching_law(const Vector& x,
                                            const EllipsoidSet& set);

/// Minkowski gauge of {x : xᵀMx ≤ 1}.
[[nodiscard]] double gauge(const Vector& x, const Matrix& M);

struct PolicyState {
  std::optional<Schedule> active_schedule;
  std::size_t cursor = 0;
  std::optional<std::size_t> active_set_id;
};

/// Picks which admissible set re-arms the policy once a schedule is spent.
using SetSelector = std::function<std::size_t(
    const GaussianBelief& belief, std::span<const EllipsoidSet> sets)>;

/// Cycles through the sets in order, one per call.
class RoundRobinSelector {
 public:
  std::size_t operator()(const GaussianBelief&,
                         std::span<const EllipsoidSet> sets) {
    return next_++ % sets.size();
  }

 private:
  std::size_t next_ = 0;
};

struct Sp2Step {
  ModeIndex mode = 1;
  PolicyState state;
};

/// One sampling instant of the stability-preserving scheduling policy:
/// consume the active schedule, or select a set and re-arm with the
/// switching law evaluated at belief.mean.
[[nodiscard]] Sp2Step sp2_step(const PolicyState& state,
                               const GaussianBelief& belief,
                               std::span<const EllipsoidSet> sets,
                               const SetSelector& selector);
[[nodiscard]] Sp2Step sp2_step(const PolicyState& state, const Vector& x_mean,
                               std::span<const EllipsoidSet> sets,
                               const SetSelector& selector);

/// Returns R for a candidate set (admissible iff R > 1). May stop early
/// and return any value ≤ 1 once inadmissibility is certain.
using AdmissibilityChecker = std::function<double(const EllipsoidSet&)>;

struct BuildOptions {
  int ell = 20;
  std::uint64_t seed = 0;
  std::size_t max_iters = 1000;
};

/// Randomized construction of an admissible set: each iteration draws a
/// length ℓ' uniformly from {1..ℓ} and a not-yet-included sequence of that
/// length uniformly, until the checker reports R > 1. ℓ grows by one once
/// every sequence of length ≤ ℓ has been drawn.
[[nodiscard]] EllipsoidSet build_schedule_set(const BuildOptions& options,
                                              const ModeFamily& family,
                                              const Matrix& M0,
                                              const AdmissibilityChecker& checker);

}  // namespace latsched
