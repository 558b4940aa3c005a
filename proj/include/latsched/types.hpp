#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace latsched {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Mode indices are 1-based throughout the public API (1..D).
using ModeIndex = int;

enum class ErrorKind {
  kInvalidArgument,
  kDimensionMismatch,
  kNonFinite,
  kSingular,
  kNullity,
  kUnsupported,
  kMaxIterations,
  kHorizon,
  kDivergence,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

namespace detail {

[[nodiscard]] inline bool all_finite(const Matrix& m) {
  return m.allFinite();
}

/// (M + Mᵀ)/2
[[nodiscard]] inline Matrix symmetrized(const Matrix& m) {
  return 0.5 * (m + m.transpose());
}

}  // namespace detail
}  // namespace latsched
