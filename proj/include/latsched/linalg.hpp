#pragma once

#include "latsched/types.hpp"

namespace latsched {

/// Matrix exponential by scaling and squaring with the order-13 diagonal
/// Padé approximant (Higham 2005). The order is fixed; only the number of
/// squarings adapts to ‖M‖₁.
[[nodiscard]] Matrix expm(const Matrix& m);

[[nodiscard]] bool is_symmetric(const Matrix& m, double rel_tol = 1e-10);

/// Smallest eigenvalue of the symmetric part of `m`.
[[nodiscard]] double min_sym_eigenvalue(const Matrix& m);

/// Symmetric PSD square root S with S·S = m; negative eigenvalues from
/// round-off are clamped to zero.
[[nodiscard]] Matrix psd_sqrt(const Matrix& m);

}  // namespace latsched
