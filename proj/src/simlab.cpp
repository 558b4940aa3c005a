#include "latsched/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>

#include <boost/random/normal_distribution.hpp>

#include "latsched/linalg.hpp"
#include "latsched/random.hpp"

namespace latsched {
namespace {

class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : rng_(seed) {}

  Vector draw(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal_(rng_);
    return v;
  }

 private:
  Rng rng_;
  boost::random::normal_distribution<double> normal_;
};

/// Chooses p_k at each sampling instant.
class ModeChooser {
 public:
  ModeChooser(const ModeFamily& family, const Policy& policy,
              const CostConfig& cost)
      : policy_(policy) {
    if (const auto* sp2 = std::get_if<Sp2Policy>(&policy)) {
      if (sp2->sets.empty()) {
        throw Error(ErrorKind::kInvalidArgument, "Sp2Policy: no schedule sets");
      }
      if (sp2->selector == Sp2Policy::Selector::kBalanced) {
        selector_ = balanced_sp2_selector(family, cost, sp2->horizon);
      } else {
        selector_ = RoundRobinSelector{};
      }
    } else {
      const auto& pattern = std::get<StaticPolicy>(policy).pattern;
      if (pattern.empty()) {
        throw Error(ErrorKind::kInvalidArgument, "StaticPolicy: empty pattern");
      }
      for (auto i : pattern) family.check_index(i);
    }
  }

  ModeIndex next(const PredictorEstimate& est) {
    if (const auto* st = std::get_if<StaticPolicy>(&policy_)) {
      return st->pattern[k_++ % st->pattern.size()];
    }
    const auto& sp2 = std::get<Sp2Policy>(policy_);
    auto step = sp2_step(state_, GaussianBelief{est.x_hat, est.P_hat, est.P_hat},
                         sp2.sets, selector_);
    state_ = std::move(step.state);
    return step.mode;
  }

 private:
  const Policy& policy_;
  SetSelector selector_;
  PolicyState state_;
  std::size_t k_ = 0;
};

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Matrix inverse_latency_noise(double b, double delta, Eigen::Index outputs) {
  if (!(delta > 0.0) || !(b >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument,
                "inverse_latency_noise: needs b >= 0 and delta > 0");
  }
  return (b / delta) * Matrix::Identity(outputs, outputs);
}

SamplePathResult simulate_path(const ModeFamily& family, const Policy& policy,
                               const CostConfig& cost, const SimConfig& cfg,
                               std::size_t path) {
  const auto& model = family.model();
  const Eigen::Index n = model.states();
  cost.validate(n);
  double min_delta = std::numeric_limits<double>::infinity();
  for (const auto& m : family.modes()) min_delta = std::min(min_delta, m.delta);
  if (!(cfg.h > 0.0) || cfg.h > min_delta / 10.0 * (1.0 + 1e-12)) {
    throw Error(ErrorKind::kInvalidArgument,
                "simulate_path: step h must satisfy 0 < h <= min delta / 10");
  }
  if (cfg.x0.size() != n || cfg.P0.rows() != n || cfg.P0.cols() != n) {
    throw Error(ErrorKind::kDimensionMismatch, "simulate_path: x0/P0 size");
  }

  const double T = cost.T_f;
  const double h = cfg.h;
  const auto steps = static_cast<long long>(std::llround(T / h));
  const double slack = kHorizonSlack * T;
  const Matrix w_sqrt = psd_sqrt(model.W0) * std::sqrt(h);

  GaussianSource noise(derive_seed(cfg.seed, path));
  ModeChooser chooser(family, policy, cost);

  SamplePathResult out;
  out.path = path;
  Vector x = cfg.x0 + psd_sqrt(cfg.P0) * noise.draw(n);
  PredictorEstimate est{cfg.x0, cfg.P0};
  Vector u = Vector::Zero(model.inputs());

  // Predictor discretization over the snapped interval actually simulated.
  std::map<std::pair<ModeIndex, long long>, DiscretizedMode> interval_cache;
  auto interval = [&](ModeIndex i, long long len) -> const DiscretizedMode& {
    auto key = std::make_pair(i, len);
    auto it = interval_cache.find(key);
    if (it == interval_cache.end()) {
      it = interval_cache
               .emplace(key, discretize_interval(model, family.mode(i).gain,
                                                 static_cast<double>(len) * h, i))
               .first;
    }
    return it->second;
  };

  double tau = 0.0;  // next sampling instant, unsnapped
  long long next_step = 0;
  long long last_step = 0;
  ModeIndex last_mode = 0;
  Vector last_z;
  Vector last_u;
  double cpu = 0.0;

  auto running = [&](const Vector& v) { return v.dot(cost.Q * v); };
  double integral = 0.0;
  double q_prev = running(x);

  for (long long j = 0; j <= steps; ++j) {
    while (j == next_step && tau < T - slack) {
      if (last_mode != 0) {
        est = kalman_predict(est, interval(last_mode, j - last_step),
                             family.mode(last_mode), last_z, last_u, model.C);
      }
      const ModeIndex p = chooser.next(est);
      const auto& mode = family.mode(p);
      out.attention += 1;
      out.breakdown.attention_penalty += cost.lambda_r / T * mode.penalty;
      cpu += mode.cpu_fraction * mode.delta;
      out.schedule.push_back(p);

      const Vector z = model.C * x + psd_sqrt(mode.sigma) * noise.draw(model.outputs());
      u = mode.gain * est.x_hat;
      last_mode = p;
      last_step = j;
      last_z = z;
      last_u = u;
      tau += mode.delta;
      next_step = std::llround(tau / h);
      // A latency below h/2 could snap onto the same step twice; the
      // h <= min Δ / 10 precondition rules that out.
    }
    if (cfg.trajectory_stride != 0 &&
        j % static_cast<long long>(cfg.trajectory_stride) == 0) {
      out.trajectory.push_back({static_cast<double>(j) * h, x});
    }
    if (j == steps) break;

    x += (model.A * x + model.B * u) * h + w_sqrt * noise.draw(n);
    if (!x.allFinite() || x.norm() > 1e150) {
      throw Error(ErrorKind::kDivergence,
                  "simulate_path: state diverged at step " + std::to_string(j + 1) +
                      " of path " + std::to_string(path));
    }
    const double q = running(x);
    integral += 0.5 * h * (q_prev + q);
    q_prev = q;
  }

  out.x_final = x;
  out.breakdown.attention_count = out.attention;
  out.breakdown.state_running = cost.lambda_x / T * integral;
  out.breakdown.state_terminal = cost.lambda_x * x.dot(cost.Q_f * x);
  out.breakdown.total = out.breakdown.state_running +
                        out.breakdown.state_terminal +
                        out.breakdown.attention_penalty;
  out.cost = out.breakdown.total;
  out.cpu_load = cpu / T;
  return out;
}

Histogram make_histogram(const std::vector<double>& values,
                         const HistogramOptions& options) {
  Histogram hist;
  if (options.bins == 0) {
    throw Error(ErrorKind::kInvalidArgument, "histogram: bins must be >= 1");
  }
  double lo = options.lo.value_or(
      values.empty() ? 0.0 : *std::min_element(values.begin(), values.end()));
  double hi = options.hi.value_or(
      values.empty() ? 1.0 : *std::max_element(values.begin(), values.end()));
  if (!(hi > lo)) hi = lo + 1.0;
  const std::size_t bins = options.bins;
  hist.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) {
    hist.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  }
  hist.counts.assign(bins, 0);
  for (double v : values) {
    if (v < lo || v > hi) continue;
    auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
    hist.counts[std::min(b, bins - 1)] += 1;
  }
  return hist;
}

MonteCarloSummary monte_carlo(const ModeFamily& family, const Policy& policy,
                              const CostConfig& cost, const SimConfig& cfg,
                              const HistogramOptions& hist) {
  if (cfg.num_paths < 2) {
    throw Error(ErrorKind::kInvalidArgument, "monte_carlo: needs >= 2 paths");
  }
  MonteCarloSummary summary;
  summary.paths = cfg.num_paths;
  summary.records.resize(cfg.num_paths);

  std::size_t workers = cfg.workers;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, cfg.num_paths);

  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mu;
  auto work = [&] {
    for (std::size_t i = next++; i < cfg.num_paths; i = next++) {
      try {
        summary.records[i] = simulate_path(family, policy, cost, cfg, i);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kDivergence) {
          std::lock_guard lock(fatal_mu);
          if (!fatal) fatal = std::current_exception();
          next = cfg.num_paths;
          return;
        }
        auto& r = summary.records[i];
        r.path = i;
        r.diverged = true;
        r.cost = std::numeric_limits<double>::quiet_NaN();
        r.error = e.what();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  std::vector<double> costs;
  double att = 0.0;
  double cpu = 0.0;
  for (const auto& r : summary.records) {
    if (r.diverged) {
      ++summary.diverged;
      continue;
    }
    costs.push_back(r.cost);
    att += r.attention;
    cpu += r.cpu_load;
  }
  const auto ok = static_cast<double>(costs.size());
  if (!costs.empty()) {
    double sum = 0.0;
    for (double c : costs) sum += c;
    summary.mean_cost = sum / ok;
    double ss = 0.0;
    for (double c : costs) ss += (c - summary.mean_cost) * (c - summary.mean_cost);
    summary.std_cost = costs.size() > 1 ? std::sqrt(ss / (ok - 1.0)) : 0.0;
    summary.stderr_cost = summary.std_cost / std::sqrt(ok);
    summary.mean_attention = att / ok;
    summary.mean_cpu_load = cpu / ok;
  }
  summary.histogram = make_histogram(costs, hist);
  return summary;
}

void write_paths_csv(std::ostream& os, const MonteCarloSummary& summary) {
  os << "path,cost,attention,cpu_load\n";
  for (const auto& r : summary.records) {
    os << r.path << ',' << format_double(r.cost) << ',' << r.attention << ','
       << format_double(r.cpu_load) << '\n';
  }
}

void write_histogram_csv(std::ostream& os, const Histogram& histogram) {
  os << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < histogram.counts.size(); ++b) {
    os << format_double(histogram.edges[b]) << ','
       << format_double(histogram.edges[b + 1]) << ',' << histogram.counts[b]
       << '\n';
  }
}

}  // namespace latsched
