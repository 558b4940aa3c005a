#include "latsched/belief.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "latsched/linalg.hpp"
#include "latsched/quadrature.hpp"

namespace latsched {
namespace {

void check_psd(const Matrix& m, Eigen::Index n, const char* name) {
  if (m.rows() != n || m.cols() != n) {
    throw Error(ErrorKind::kDimensionMismatch,
                std::string(name) + " must be n x n");
  }
  if (!m.allFinite() || !is_symmetric(m) ||
      min_sym_eigenvalue(m) < -1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    throw Error(ErrorKind::kInvalidArgument,
                std::string(name) + " not symmetric PSD");
  }
}

/// Predictor gain H = A_d P̂ Cᵀ (C P̂ Cᵀ + Σ)⁻¹. When P̂Cᵀ vanishes the
/// measurement carries no information and H = 0 regardless of Σ.
Matrix predictor_gain(const Matrix& P_hat, const DiscretizedMode& dm,
                      const Matrix& sigma, const Matrix& C) {
  const Matrix pct = P_hat * C.transpose();
  if (pct.cwiseAbs().maxCoeff() == 0.0) {
    return Matrix::Zero(dm.Ad.rows(), C.rows());
  }
  const Matrix innov = detail::symmetrized(C * pct + sigma);
  Eigen::JacobiSVD<Matrix> svd(innov);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0) || smax / smin >= 1e12) {
    throw Error(ErrorKind::kSingular,
                "kalman_predict: singular innovation covariance");
  }
  return (dm.Ad * pct) * innov.inverse();
}

}  // namespace

void CostConfig::validate(Eigen::Index n) const {
  if (!(lambda_x >= 0.0) || !(lambda_r >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "cost weights must be >= 0");
  }
  if (!(T_f > 0.0) || !std::isfinite(T_f)) {
    throw Error(ErrorKind::kInvalidArgument, "T_f must be positive");
  }
  check_psd(Q, n, "Q");
  check_psd(Q_f, n, "Q_f");
}

CostBreakdown& CostBreakdown::operator+=(const CostBreakdown& other) {
  state_running += other.state_running;
  state_terminal += other.state_terminal;
  attention_penalty += other.attention_penalty;
  total += other.total;
  attention_count += other.attention_count;
  return *this;
}

PredictorEstimate kalman_predict(const PredictorEstimate& est,
                                 const DiscretizedMode& dm,
                                 const PerceptionMode& mode,
                                 const Vector& measurement,
                                 const Vector& control, const Matrix& C) {
  if (!measurement.allFinite()) {
    throw Error(ErrorKind::kNonFinite, "kalman_predict: non-finite measurement");
  }
  if (measurement.size() != C.rows() || control.size() != dm.Bd.cols() ||
      est.x_hat.size() != dm.Ad.rows()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "kalman_predict: inconsistent dimensions");
  }
  const Matrix H = predictor_gain(est.P_hat, dm, mode.sigma, C);
  PredictorEstimate out;
  out.x_hat = dm.Ad * est.x_hat + dm.Bd * control +
              H * (measurement - C * est.x_hat);
  out.P_hat = detail::symmetrized((dm.Ad - H * C) * est.P_hat *
                                      dm.Ad.transpose() +
                                  dm.Wd);
  return out;
}

Matrix predictor_covariance_step(const Matrix& P_hat, const DiscretizedMode& dm,
                                 const Matrix& sigma, const Matrix& C) {
  const Matrix H = predictor_gain(P_hat, dm, sigma, C);
  return detail::symmetrized((dm.Ad - H * C) * P_hat * dm.Ad.transpose() +
                             dm.Wd);
}

Moments propagate_moments(const GaussianBelief& belief,
                          const DiscretizedMode& partial, const Matrix& gain,
                          CovarianceClosure closure) {
  const Matrix& lam = partial.lambda;
  Moments out;
  out.mean = lam * belief.mean;
  if (closure == CovarianceClosure::kExact) {
    // x = x̂ - x̃ with Cov(x̂, x̃) = 0: x̂ follows Λ, x̃ drifts with A_d.
    out.cov = lam * (belief.cov - belief.pred_cov) * lam.transpose() +
              partial.Ad * belief.pred_cov * partial.Ad.transpose() +
              partial.Wd;
  } else {
    const Matrix k = partial.Bd * gain;
    out.cov = lam * belief.cov * lam.transpose() +
              k * belief.pred_cov * k.transpose() + partial.Wd;
  }
  out.cov = detail::symmetrized(out.cov);
  return out;
}

Moments propagate_moments(const GaussianBelief& belief,
                          const ModeFamily& family, ModeIndex i,
                          double t_offset, CovarianceClosure closure) {
  const auto& mode = family.mode(i);
  if (!(t_offset >= 0.0) || t_offset > mode.delta * (1.0 + 1e-12)) {
    throw Error(ErrorKind::kInvalidArgument,
                "propagate_moments: t_offset outside [0, delta]");
  }
  return propagate_moments(belief, family.at_offset(i, std::min(t_offset, mode.delta)),
                           mode.gain, closure);
}

GaussianBelief step_belief(const GaussianBelief& belief,
                           const ModeFamily& family, ModeIndex i,
                           CovarianceClosure closure) {
  const auto& dm = family.discretized(i);
  const auto& mode = family.mode(i);
  auto m = propagate_moments(belief, dm, mode.gain, closure);
  return {std::move(m.mean), std::move(m.cov),
          predictor_covariance_step(belief.pred_cov, dm, mode.sigma,
                                    family.model().C)};
}

double RunningCostKernel::apply(const GaussianBelief& b,
                               CovarianceClosure closure) const {
  double v = b.mean.dot(K_lambda * b.mean) + c_w;
  if (closure == CovarianceClosure::kExact) {
    v += (K_lambda * (b.cov - b.pred_cov)).trace() + (K_a * b.pred_cov).trace();
  } else {
    v += (K_lambda * b.cov).trace() + (K_b * b.pred_cov).trace();
  }
  return v;
}

RunningCostKernel running_cost_kernel(const ModeFamily& family, ModeIndex i,
                                      double length, const Matrix& Q) {
  const auto& model = family.model();
  const auto& mode = family.mode(i);
  std::vector<double> key;
  for (const Matrix* m : {&model.A, &model.B, &model.W0, &mode.gain, &Q}) {
    key.insert(key.end(), m->data(), m->data() + m->size());
  }
  key.push_back(length);

  static std::mutex mu;
  static std::map<std::vector<double>, RunningCostKernel> cache;
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }

  const Eigen::Index n = model.states();
  auto integrand = [&](double s) {
    const auto dm = discretize_interval(model, mode.gain, s, i);
    const Matrix bl = dm.Bd * mode.gain;
    Matrix packed = Matrix::Zero(n, 3 * n + 1);
    packed.leftCols(n) = dm.lambda.transpose() * Q * dm.lambda;
    packed.middleCols(n, n) = dm.Ad.transpose() * Q * dm.Ad;
    packed.middleCols(2 * n, n) = bl.transpose() * Q * bl;
    packed(0, 3 * n) = (Q * dm.Wd).trace();
    return packed;
  };
  const Matrix packed = quad::integrate_adaptive_matrix(integrand, 0.0, length, 1e-12);
  RunningCostKernel k;
  k.K_lambda = detail::symmetrized(packed.leftCols(n));
  k.K_a = detail::symmetrized(packed.middleCols(n, n));
  k.K_b = detail::symmetrized(packed.middleCols(2 * n, n));
  k.c_w = packed(0, 3 * n);

  std::lock_guard lock(mu);
  if (cache.size() >= 4096) cache.clear();
  cache.emplace(std::move(key), k);
  return k;
}

SegmentResult advance(const GaussianBelief& start, double t_start,
                      std::span<const ModeIndex> piece,
                      const ModeFamily& family, const CostConfig& cfg,
                      bool add_terminal, CovarianceClosure closure) {
  const double slack = kHorizonSlack * cfg.T_f;
  const double run_weight = cfg.lambda_x / cfg.T_f;
  SegmentResult out;
  out.end = start;
  double t = t_start;

  for (ModeIndex i : piece) {
    if (t >= cfg.T_f - slack) break;
    const auto& mode = family.mode(i);
    out.cost.attention_count += 1;
    out.cost.attention_penalty += cfg.lambda_r / cfg.T_f * mode.penalty;

    const double remaining = cfg.T_f - t;
    const bool truncated = mode.delta > remaining + slack;
    const double length = truncated ? remaining : mode.delta;

    if (run_weight != 0.0) {
      out.cost.state_running +=
          run_weight * running_cost_kernel(family, i, length, cfg.Q)
                           .apply(out.end, closure);
    }

    if (truncated) {
      auto m = propagate_moments(out.end, family.at_offset(i, length),
                                 mode.gain, closure);
      out.end.mean = std::move(m.mean);
      out.end.cov = std::move(m.cov);
      t = cfg.T_f;
      break;
    }
    out.end = step_belief(out.end, family, i, closure);
    t += mode.delta;
  }

  out.end_time = t;
  out.reached_horizon = t >= cfg.T_f - slack;
  if (out.reached_horizon && add_terminal) {
    const auto& x = out.end.mean;
    out.cost.state_terminal =
        cfg.lambda_x * (x.dot(cfg.Q_f * x) + (cfg.Q_f * out.end.cov).trace());
  }
  out.cost.total = out.cost.state_running + out.cost.state_terminal +
                   out.cost.attention_penalty;
  return out;
}

CostBreakdown evaluate_cost(std::span<const ModeIndex> schedule,
                            const GaussianBelief& belief0,
                            const ModeFamily& family, const CostConfig& cfg,
                            CovarianceClosure closure) {
  cfg.validate(family.states());
  if (family.latency(schedule) < cfg.T_f * (1.0 - kHorizonSlack)) {
    throw Error(ErrorKind::kHorizon,
                "evaluate_cost: schedule does not cover [0, T_f]");
  }
  return advance(belief0, 0.0, schedule, family, cfg, true, closure).cost;
}

}  // namespace latsched
