#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "latsched/types.hpp"

namespace latsched {

/// Continuous-time plant dx = (Ax + Bu)dt + dw, z = Cx + n, with w a Wiener
/// process of intensity W0.
struct SystemModel {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix W0;

  [[nodiscard]] Eigen::Index states() const { return A.rows(); }
  [[nodiscard]] Eigen::Index inputs() const { return B.cols(); }
  [[nodiscard]] Eigen::Index outputs() const { return C.rows(); }

  /// Throws Error on inconsistent dimensions, non-finite entries or a W0
  /// that is not symmetric PSD.
  void validate() const;
};

/// One latency/noise option of the perception pipeline.
struct PerceptionMode {
  double delta = 0.0;  ///< latency, also the sampling interval [s]
  Matrix sigma;        ///< measurement noise covariance (n_z × n_z)
  Matrix gain;         ///< feedback gain L (n_u × n)
  double penalty = 1.0;
  double cpu_fraction = 0.5;

  void validate(const SystemModel& model) const;
};

/// Exact zero-order-hold discretization of a mode over an interval τ.
struct DiscretizedMode {
  Matrix Ad;      ///< exp(Aτ)
  Matrix Bd;      ///< ∫₀^τ exp(As) ds B
  Matrix Wd;      ///< ∫₀^τ exp(As) W0 exp(As)ᵀ ds
  Matrix lambda;  ///< Ad + Bd L
  ModeIndex mode_index = 1;
};

/// Discretizes `model` under feedback `gain` over an interval of length
/// `tau` ≥ 0. A_d and B_d come from exp([[A,B],[0,0]]τ); W_d from the Van
/// Loan block exp([[-A,W0],[0,Aᵀ]]τ).
[[nodiscard]] DiscretizedMode discretize_interval(const SystemModel& model,
                                                  const Matrix& gain,
                                                  double tau,
                                                  ModeIndex index = 1);

/// Full-latency discretization of a perception mode.
[[nodiscard]] DiscretizedMode discretize(const SystemModel& model,
                                         const PerceptionMode& mode,
                                         ModeIndex index = 1);

/// Λ_{last}···Λ_{first}: the first element of the sequence acts first.
[[nodiscard]] Matrix chain_matrix(std::span<const DiscretizedMode> modes);

/// A validated plant together with its D perception modes and their cached
/// discretizations. Copies share the (thread-safe) partial-interval cache.
class ModeFamily {
 public:
  ModeFamily(SystemModel model, std::vector<PerceptionMode> modes);

  [[nodiscard]] const SystemModel& model() const { return model_; }
  [[nodiscard]] int size() const { return static_cast<int>(modes_.size()); }
  [[nodiscard]] Eigen::Index states() const { return model_.states(); }

  [[nodiscard]] const PerceptionMode& mode(ModeIndex i) const;
  [[nodiscard]] const DiscretizedMode& discretized(ModeIndex i) const;
  [[nodiscard]] const std::vector<PerceptionMode>& modes() const {
    return modes_;
  }

  /// Discretization of mode i over [0, t], 0 ≤ t ≤ Δ^i.
  [[nodiscard]] DiscretizedMode at_offset(ModeIndex i, double t) const;

  /// Λ^γ for a schedule given as 1-based mode indices.
  [[nodiscard]] Matrix chain(std::span<const ModeIndex> schedule) const;

  /// Σ Δ^{γ_k}.
  [[nodiscard]] double latency(std::span<const ModeIndex> schedule) const;

  void check_index(ModeIndex i) const;

 private:
  struct OffsetCache;

  SystemModel model_;
  std::vector<PerceptionMode> modes_;
  std::vector<DiscretizedMode> full_;
  std::shared_ptr<OffsetCache> cache_;
};

}  // namespace latsched
