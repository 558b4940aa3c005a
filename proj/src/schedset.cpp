#include "latsched/schedset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <boost/random/uniform_int_distribution.hpp>

#include "latsched/linalg.hpp"
#include "latsched/random.hpp"

namespace latsched {
namespace {

void require_pd(const Matrix& M0) {
  if (M0.rows() != M0.cols() || M0.rows() == 0 || !M0.allFinite() ||
      !is_symmetric(M0)) {
    throw Error(ErrorKind::kInvalidArgument, "M0 must be symmetric");
  }
  if (Eigen::LLT<Matrix>(M0).info() != Eigen::Success) {
    throw Error(ErrorKind::kInvalidArgument, "M0 must be positive definite");
  }
}

Matrix congruence(const Matrix& chain, const Matrix& M0) {
  if (chain.rows() != M0.rows() || chain.cols() != M0.cols()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "ellipsoid_matrix: chain and M0 sizes differ");
  }
  if (!chain.allFinite() || !(std::abs(chain.determinant()) > 1e-12)) {
    throw Error(ErrorKind::kSingular, "ellipsoid_matrix: singular chain matrix");
  }
  Matrix M = detail::symmetrized(chain.transpose() * M0 * chain);
  if (!M.allFinite() || Eigen::LLT<Matrix>(M).info() != Eigen::Success) {
    throw Error(ErrorKind::kSingular,
                "ellipsoid_matrix: M_gamma not positive definite");
  }
  return M;
}

/// min(D^len, cap) without overflow.
std::uint64_t sequence_count(int D, int len) {
  constexpr std::uint64_t kCap = std::uint64_t{1} << 62;
  std::uint64_t c = 1;
  for (int i = 0; i < len; ++i) {
    if (c > kCap / static_cast<std::uint64_t>(D)) return kCap;
    c *= static_cast<std::uint64_t>(D);
  }
  return c;
}

}  // namespace

Schedule make_schedule(std::vector<ModeIndex> modes, const ModeFamily& family) {
  if (modes.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "schedule must be non-empty");
  }
  Schedule s;
  s.total_latency = family.latency(modes);
  s.modes = std::move(modes);
  return s;
}

double EllipsoidSet::min_latency() const {
  double c = std::numeric_limits<double>::infinity();
  for (const auto& m : members) c = std::min(c, m.schedule.total_latency);
  return c;
}

Matrix ellipsoid_matrix(std::span<const DiscretizedMode> chain,
                        const Matrix& M0) {
  require_pd(M0);
  return congruence(chain_matrix(chain), M0);
}

Matrix ellipsoid_matrix(std::span<const ModeIndex> gamma,
                        const ModeFamily& family, const Matrix& M0) {
  require_pd(M0);
  return congruence(family.chain(gamma), M0);
}

EllipsoidSet make_ellipsoid_set(
    const ModeFamily& family, const Matrix& M0,
    const std::vector<std::vector<ModeIndex>>& schedules) {
  require_pd(M0);
  if (M0.rows() != family.states()) {
    throw Error(ErrorKind::kDimensionMismatch, "M0 must be n x n");
  }
  EllipsoidSet set;
  set.M0 = M0;
  std::set<std::vector<ModeIndex>> seen;
  for (const auto& modes : schedules) {
    if (!seen.insert(modes).second) {
      throw Error(ErrorKind::kInvalidArgument, "duplicate schedule in set");
    }
    auto schedule = make_schedule(modes, family);
    Matrix M = ellipsoid_matrix(schedule.modes, family, M0);
    set.members.push_back({std::move(schedule), std::move(M)});
  }
  return set;
}

std::size_t switching_index(const Vector& x, const EllipsoidSet& set) {
  if (set.members.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "switching_law: empty set");
  }
  if (!x.allFinite()) {
    throw Error(ErrorKind::kNonFinite, "switching_law: non-finite state");
  }
  std::vector<double> values;
  values.reserve(set.size());
  for (const auto& m : set.members) values.push_back(x.dot(m.M * x));
  const double vmin = *std::min_element(values.begin(), values.end());
  const double tie = vmin + 1e-12 * std::abs(vmin) +
                     std::numeric_limits<double>::min();

  std::size_t best = set.size();
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (values[i] > tie) continue;
    if (best == set.size()) {
      best = i;
      continue;
    }
    const auto& a = set.members[i].schedule;
    const auto& b = set.members[best].schedule;
    if (a.total_latency < b.total_latency ||
        (a.total_latency == b.total_latency && a.modes < b.modes)) {
      best = i;
    }
  }
  return best;
}

const Schedule& switching_law(const Vector& x, const EllipsoidSet& set) {
  return set.members[switching_index(x, set)].schedule;
}

double gauge(const Vector& x, const Matrix& M) {
  return std::sqrt(std::max(0.0, x.dot(M * x)));
}

Sp2Step sp2_step(const PolicyState& state, const GaussianBelief& belief,
                 std::span<const EllipsoidSet> sets,
                 const SetSelector& selector) {
  Sp2Step out;
  out.state = state;
  if (state.active_schedule && state.cursor < state.active_schedule->size()) {
    out.mode = state.active_schedule->modes[state.cursor];
    out.state.cursor += 1;
    return out;
  }
  if (sets.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "sp2_step: no schedule sets");
  }
  const std::size_t id = selector(belief, sets);
  if (id >= sets.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "sp2_step: selector returned out-of-range set id");
  }
  out.state.active_set_id = id;
  out.state.active_schedule = switching_law(belief.mean, sets[id]);
  out.state.cursor = 1;
  out.mode = out.state.active_schedule->modes.front();
  return out;
}

Sp2Step sp2_step(const PolicyState& state, const Vector& x_mean,
                 std::span<const EllipsoidSet> sets,
                 const SetSelector& selector) {
  const auto n = x_mean.size();
  return sp2_step(state,
                  GaussianBelief{x_mean, Matrix::Zero(n, n), Matrix::Zero(n, n)},
                  sets, selector);
}

EllipsoidSet build_schedule_set(const BuildOptions& options,
                                const ModeFamily& family, const Matrix& M0,
                                const AdmissibilityChecker& checker) {
  if (options.ell < 1) {
    throw Error(ErrorKind::kInvalidArgument, "build_schedule_set: ell >= 1");
  }
  require_pd(M0);
  const int D = family.size();
  int ell = options.ell;
  Rng rng(derive_seed(options.seed, 0));

  EllipsoidSet set;
  set.M0 = M0;
  set.seed = options.seed;
  // Sequences already drawn, including ones discarded for a singular chain.
  std::set<std::vector<ModeIndex>> drawn;
  std::map<int, std::uint64_t> drawn_per_length;
  auto exhausted = [&](int len) {
    return drawn_per_length[len] >= sequence_count(D, len);
  };

  for (std::size_t iter = 1; iter <= options.max_iters; ++iter) {
    bool all_done = true;
    for (int len = 1; len <= ell && all_done; ++len) {
      all_done = exhausted(len);
    }
    if (all_done) ++ell;

    int len = 0;
    do {
      len = boost::random::uniform_int_distribution<int>(1, ell)(rng);
    } while (exhausted(len));

    boost::random::uniform_int_distribution<int> pick_mode(1, D);
    std::vector<ModeIndex> modes(static_cast<std::size_t>(len));
    do {
      for (auto& m : modes) m = pick_mode(rng);
    } while (drawn.count(modes) != 0);
    drawn.insert(modes);
    drawn_per_length[len] += 1;

    Matrix M;
    try {
      M = ellipsoid_matrix(modes, family, M0);
    } catch (const Error&) {
      continue;  // singular or overflowing chain: never a useful member
    }
    set.members.push_back({make_schedule(std::move(modes), family), std::move(M)});

    const double R = checker(set);
    if (R > 1.0) {
      set.iterations = iter;
      set.R = R;
      return set;
    }
  }
  throw Error(ErrorKind::kMaxIterations,
              "build_schedule_set: no admissible set within " +
                  std::to_string(options.max_iters) +
                  " iterations (the mode family may not be stabilizing)");
}

}  // namespace latsched
