#pragma once

#include <span>

#include "latsched/linsys.hpp"
#include "latsched/types.hpp"

namespace latsched {

/// Distribution of the state at a sampling instant: x ~ N(mean, cov), plus
/// the covariance of the one-step predictor error x̂[k|k-1] - x[k].
struct GaussianBelief {
  Vector mean;
  Matrix cov;
  Matrix pred_cov;

  /// Predictor seeded as x̂[0|-1] = x̄₀, P̂[0] = P₀.
  static GaussianBelief initial(const Vector& x0, const Matrix& P0) {
    return {x0, P0, P0};
  }
};

/// One-step predictor x̂[k|k-1] with its error covariance P̂[k].
struct PredictorEstimate {
  Vector x_hat;
  Matrix P_hat;
};

struct CostConfig {
  double lambda_x = 1.0;
  double lambda_r = 0.0;
  double T_f = 1.0;
  Matrix Q;
  Matrix Q_f;

  void validate(Eigen::Index n) const;
};

/// All state terms already carry their λ_x (and 1/T_f) weights, so
/// total = state_running + state_terminal + attention_penalty.
struct CostBreakdown {
  double state_running = 0.0;
  double state_terminal = 0.0;
  double attention_penalty = 0.0;
  double total = 0.0;
  int attention_count = 0;

  CostBreakdown& operator+=(const CostBreakdown& other);
};

/// How the second moment accounts for the feedback acting on x̂ = x + x̃.
/// kExact keeps Cov(x[k], x̃[k]) = -P̂[k], which holds for the optimal
/// predictor. kUncorrelated drops that cross term (W_Λ = B_d L P̂ Lᵀ B_dᵀ +
/// W_d alone) and is kept for comparison only; it underestimates P(t).
enum class CovarianceClosure { kExact, kUncorrelated };

struct Moments {
  Vector mean;
  Matrix cov;
};

/// Kalman one-step predictor update with measurement z[k] and control u[k].
[[nodiscard]] PredictorEstimate kalman_predict(const PredictorEstimate& est,
                                               const DiscretizedMode& dm,
                                               const PerceptionMode& mode,
                                               const Vector& measurement,
                                               const Vector& control,
                                               const Matrix& C);

/// Riccati part of the predictor: P̂[k+1] = (A_d - HC)P̂A_dᵀ + W_d.
[[nodiscard]] Matrix predictor_covariance_step(const Matrix& P_hat,
                                               const DiscretizedMode& dm,
                                               const Matrix& sigma,
                                               const Matrix& C);

/// Moments of x(τ_k + s) given the belief at τ_k, where `partial` is the
/// discretization over [0, s] and `gain` the active feedback gain.
[[nodiscard]] Moments propagate_moments(
    const GaussianBelief& belief, const DiscretizedMode& partial,
    const Matrix& gain, CovarianceClosure closure = CovarianceClosure::kExact);

/// Same, for mode i of the family at offset 0 ≤ t_offset ≤ Δ^i.
[[nodiscard]] Moments propagate_moments(
    const GaussianBelief& belief, const ModeFamily& family, ModeIndex i,
    double t_offset, CovarianceClosure closure = CovarianceClosure::kExact);

/// Belief at the next sampling instant after a full interval of mode i.
[[nodiscard]] GaussianBelief step_belief(
    const GaussianBelief& belief, const ModeFamily& family, ModeIndex i,
    CovarianceClosure closure = CovarianceClosure::kExact);

/// Integrals over one interval [0, t] of mode i that turn the running cost
/// into a quadratic form in the belief:
///   ∫ x̄ᵀQx̄ + tr(QP) = x̄ᵀK_λx̄ + tr(K_λ(P - P̂)) + tr(K_a P̂) + c_w   (exact)
///   ∫ x̄ᵀQx̄ + tr(QP) = x̄ᵀK_λx̄ + tr(K_λ P) + tr(K_b P̂) + c_w          (uncorrelated)
/// with K_λ = ∫ΛᵀQΛ, K_a = ∫A_dᵀQA_d, K_b = ∫(B_dL)ᵀQ(B_dL), c_w = ∫tr(QW_d).
struct RunningCostKernel {
  Matrix K_lambda;
  Matrix K_a;
  Matrix K_b;
  double c_w = 0.0;

  [[nodiscard]] double apply(const GaussianBelief& b,
                             CovarianceClosure closure) const;
};

/// Computed by adaptive Gauss–Legendre quadrature and memoized on the
/// numeric content of (A, B, W0, L, Q, t).
[[nodiscard]] RunningCostKernel running_cost_kernel(const ModeFamily& family,
                                                    ModeIndex i, double length,
                                                    const Matrix& Q);

struct SegmentResult {
  CostBreakdown cost;
  GaussianBelief end;
  double end_time = 0.0;
  bool reached_horizon = false;
};

/// Runs the mode sequence `piece` from time `t_start`, stopping at T_f.
/// Accumulates running cost and the penalty of every sampling instant in
/// [t_start, T_f); adds the terminal term when T_f is reached and
/// `add_terminal` is set.
[[nodiscard]] SegmentResult advance(
    const GaussianBelief& start, double t_start,
    std::span<const ModeIndex> piece, const ModeFamily& family,
    const CostConfig& cfg, bool add_terminal = true,
    CovarianceClosure closure = CovarianceClosure::kExact);

/// Expected cost of a schedule over [0, T_f]. The schedule must cover the
/// horizon. Sampling instants are counted in [0, T_f): an instant that
/// lands on T_f (within 1e-9·T_f) is not charged.
[[nodiscard]] CostBreakdown evaluate_cost(
    std::span<const ModeIndex> schedule, const GaussianBelief& belief0,
    const ModeFamily& family, const CostConfig& cfg,
    CovarianceClosure closure = CovarianceClosure::kExact);

/// Relative slack used when comparing sampling instants against T_f.
inline constexpr double kHorizonSlack = 1e-9;

}  // namespace latsched
