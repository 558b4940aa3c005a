#include "latsched/linsys.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <utility>

#include "latsched/linalg.hpp"

namespace latsched {
namespace {

void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) throw Error(kind, msg);
}

void require_psd(const Matrix& m, const std::string& name) {
  require(is_symmetric(m), ErrorKind::kInvalidArgument,
          name + " not symmetric");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  require(min_sym_eigenvalue(m) >= -1e-12 * scale,
          ErrorKind::kInvalidArgument, name + " not PSD");
}

}  // namespace

void SystemModel::validate() const {
  const auto n = A.rows();
  require(n >= 1 && A.cols() == n, ErrorKind::kDimensionMismatch,
          "A must be square with n >= 1");
  require(B.rows() == n && B.cols() >= 1, ErrorKind::kDimensionMismatch,
          "B must have n rows");
  require(C.cols() == n && C.rows() >= 1, ErrorKind::kDimensionMismatch,
          "C must have n columns");
  require(W0.rows() == n && W0.cols() == n, ErrorKind::kDimensionMismatch,
          "W0 must be n x n");
  require(A.allFinite() && B.allFinite() && C.allFinite() && W0.allFinite(),
          ErrorKind::kNonFinite, "system matrices contain non-finite entries");
  require_psd(W0, "W0");
}

void PerceptionMode::validate(const SystemModel& model) const {
  require(std::isfinite(delta) && delta > 0.0, ErrorKind::kInvalidArgument,
          "delta must be positive");
  require(sigma.rows() == model.outputs() && sigma.cols() == model.outputs(),
          ErrorKind::kDimensionMismatch, "sigma must be n_z x n_z");
  require(gain.rows() == model.inputs() && gain.cols() == model.states(),
          ErrorKind::kDimensionMismatch, "gain must be n_u x n");
  require(sigma.allFinite() && gain.allFinite(), ErrorKind::kNonFinite,
          "mode matrices contain non-finite entries");
  require_psd(sigma, "sigma");
  require(std::isfinite(penalty) && penalty > 0.0,
          ErrorKind::kInvalidArgument, "penalty must be positive");
  require(cpu_fraction > 0.0 && cpu_fraction < 1.0,
          ErrorKind::kInvalidArgument, "cpu_fraction must lie in (0,1)");
}

DiscretizedMode discretize_interval(const SystemModel& model,
                                    const Matrix& gain, double tau,
                                    ModeIndex index) {
  const auto n = model.states();
  const auto nu = model.inputs();
  require(model.A.rows() == n && model.A.cols() == n &&
              model.B.rows() == n && model.W0.rows() == n &&
              model.W0.cols() == n,
          ErrorKind::kDimensionMismatch, "discretize: inconsistent model");
  require(gain.rows() == nu && gain.cols() == n,
          ErrorKind::kDimensionMismatch, "discretize: gain must be n_u x n");
  require(std::isfinite(tau) && tau >= 0.0, ErrorKind::kInvalidArgument,
          "discretize: interval must be finite and non-negative");
  require(model.A.allFinite() && model.B.allFinite() &&
              model.W0.allFinite() && gain.allFinite(),
          ErrorKind::kNonFinite, "discretize: non-finite entries");

  DiscretizedMode out;
  out.mode_index = index;
  if (tau == 0.0) {
    out.Ad = Matrix::Identity(n, n);
    out.Bd = Matrix::Zero(n, nu);
    out.Wd = Matrix::Zero(n, n);
    out.lambda = out.Ad;
    return out;
  }

  // [A B; 0 0]τ  ->  [A_d B_d; 0 I]
  Matrix ab = Matrix::Zero(n + nu, n + nu);
  ab.topLeftCorner(n, n) = model.A * tau;
  ab.topRightCorner(n, nu) = model.B * tau;
  const Matrix phi = expm(ab);
  out.Ad = phi.topLeftCorner(n, n);
  out.Bd = phi.topRightCorner(n, nu);

  // [-A W0; 0 Aᵀ]τ  ->  [· F12; 0 F22], W_d = F22ᵀ F12
  Matrix vl = Matrix::Zero(2 * n, 2 * n);
  vl.topLeftCorner(n, n) = -model.A * tau;
  vl.topRightCorner(n, n) = model.W0 * tau;
  vl.bottomRightCorner(n, n) = model.A.transpose() * tau;
  const Matrix f = expm(vl);
  out.Wd = detail::symmetrized(f.bottomRightCorner(n, n).transpose() *
                               f.topRightCorner(n, n));

  out.lambda = out.Ad + out.Bd * gain;
  return out;
}

DiscretizedMode discretize(const SystemModel& model, const PerceptionMode& mode,
                           ModeIndex index) {
  require(mode.delta > 0.0, ErrorKind::kInvalidArgument,
          "discretize: delta must be positive");
  return discretize_interval(model, mode.gain, mode.delta, index);
}

Matrix chain_matrix(std::span<const DiscretizedMode> modes) {
  require(!modes.empty(), ErrorKind::kInvalidArgument,
          "chain_matrix: empty sequence");
  Matrix out = modes.front().lambda;
  for (std::size_t i = 1; i < modes.size(); ++i) {
    require(modes[i].lambda.rows() == out.rows() &&
                modes[i].lambda.cols() == out.cols(),
            ErrorKind::kDimensionMismatch, "chain_matrix: inconsistent sizes");
    out = modes[i].lambda * out;
  }
  return out;
}

struct ModeFamily::OffsetCache {
  static constexpr std::size_t kMaxEntries = 1 << 16;

  std::mutex mutex;
  std::map<std::pair<ModeIndex, double>, DiscretizedMode> entries;
};

ModeFamily::ModeFamily(SystemModel model, std::vector<PerceptionMode> modes)
    : model_(std::move(model)),
      modes_(std::move(modes)),
      cache_(std::make_shared<OffsetCache>()) {
  model_.validate();
  require(!modes_.empty(), ErrorKind::kInvalidArgument,
          "at least one perception mode is required");
  full_.reserve(modes_.size());
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    try {
      modes_[i].validate(model_);
    } catch (const Error& e) {
      throw Error(e.kind(),
                  "modes[" + std::to_string(i) + "]: " + std::string(e.what()));
    }
    full_.push_back(
        discretize(model_, modes_[i], static_cast<ModeIndex>(i + 1)));
  }
}

void ModeFamily::check_index(ModeIndex i) const {
  require(i >= 1 && i <= size(), ErrorKind::kInvalidArgument,
          "mode index " + std::to_string(i) + " outside 1.." +
              std::to_string(size()));
}

const PerceptionMode& ModeFamily::mode(ModeIndex i) const {
  check_index(i);
  return modes_[static_cast<std::size_t>(i - 1)];
}

const DiscretizedMode& ModeFamily::discretized(ModeIndex i) const {
  check_index(i);
  return full_[static_cast<std::size_t>(i - 1)];
}

DiscretizedMode ModeFamily::at_offset(ModeIndex i, double t) const {
  const auto& m = mode(i);
  require(t >= 0.0 && t <= m.delta * (1.0 + 1e-12),
          ErrorKind::kInvalidArgument, "offset outside [0, delta]");
  if (t >= m.delta) return discretized(i);

  const auto key = std::make_pair(i, t);
  {
    std::lock_guard lock(cache_->mutex);
    if (auto it = cache_->entries.find(key); it != cache_->entries.end()) {
      return it->second;
    }
  }
  DiscretizedMode value = discretize_interval(model_, m.gain, t, i);
  std::lock_guard lock(cache_->mutex);
  if (cache_->entries.size() >= OffsetCache::kMaxEntries) {
    cache_->entries.clear();
  }
  cache_->entries.emplace(key, value);
  return value;
}

Matrix ModeFamily::chain(std::span<const ModeIndex> schedule) const {
  require(!schedule.empty(), ErrorKind::kInvalidArgument,
          "chain: empty schedule");
  Matrix out = discretized(schedule.front()).lambda;
  for (std::size_t k = 1; k < schedule.size(); ++k) {
    out = discretized(schedule[k]).lambda * out;
  }
  return out;
}

double ModeFamily::latency(std::span<const ModeIndex> schedule) const {
  double total = 0.0;
  for (auto i : schedule) total += mode(i).delta;
  return total;
}

}  // namespace latsched
