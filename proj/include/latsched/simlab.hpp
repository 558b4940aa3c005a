#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "latsched/belief.hpp"
#include "latsched/planner.hpp"
#include "latsched/schedset.hpp"

namespace latsched {

/// Plays a fixed mode pattern over and over.
struct StaticPolicy {
  std::vector<ModeIndex> pattern;
};

/// SP² over the given admissible sets.
struct Sp2Policy {
  enum class Selector { kRoundRobin, kBalanced };
  std::vector<EllipsoidSet> sets;
  Selector selector = Selector::kBalanced;
  HorizonConfig horizon;
};

using Policy = std::variant<StaticPolicy, Sp2Policy>;

struct SimConfig {
  double h = 1e-3;  ///< Euler–Maruyama step
  std::uint64_t seed = 0;
  std::size_t num_paths = 100;
  Vector x0;  ///< initial mean
  Matrix P0;  ///< initial covariance
  std::size_t workers = 0;  ///< 0: hardware concurrency
  std::size_t trajectory_stride = 0;  ///< keep every k-th grid point; 0: none
};

struct TrajectoryPoint {
  double t = 0.0;
  Vector x;
};

struct SamplePathResult {
  std::size_t path = 0;
  double cost = 0.0;
  CostBreakdown breakdown;
  int attention = 0;
  double cpu_load = 0.0;
  std::vector<ModeIndex> schedule;  ///< modes emitted at instants in [0, T_f)
  std::vector<TrajectoryPoint> trajectory;
  Vector x_final;  ///< state at T_f
  bool diverged = false;
  std::string error;
};

/// One closed-loop sample path over [0, cost.T_f] with the stream derived
/// from (cfg.seed, path). Throws Error(kDivergence) naming the grid step
/// when the state stops being finite.
[[nodiscard]] SamplePathResult simulate_path(const ModeFamily& family,
                                             const Policy& policy,
                                             const CostConfig& cost,
                                             const SimConfig& cfg,
                                             std::size_t path = 0);

struct Histogram {
  std::vector<double> edges;  ///< bins + 1 edges
  std::vector<std::size_t> counts;
};

struct HistogramOptions {
  std::size_t bins = 20;
  std::optional<double> lo;  ///< defaults to the smallest cost
  std::optional<double> hi;  ///< defaults to the largest cost
};

struct MonteCarloSummary {
  double mean_cost = 0.0;
  double std_cost = 0.0;  ///< sample standard deviation
  double stderr_cost = 0.0;
  double mean_attention = 0.0;
  double mean_cpu_load = 0.0;
  std::size_t paths = 0;
  std::size_t diverged = 0;
  Histogram histogram;
  std::vector<SamplePathResult> records;  ///< ordered by path index
};

/// Independent paths on a worker pool. Diverged paths are recorded and left
/// out of the statistics.
[[nodiscard]] MonteCarloSummary monte_carlo(const ModeFamily& family,
                                            const Policy& policy,
                                            const CostConfig& cost,
                                            const SimConfig& cfg,
                                            const HistogramOptions& hist = {});

[[nodiscard]] Histogram make_histogram(const std::vector<double>& values,
                                       const HistogramOptions& options);

/// Columns: path,cost,attention,cpu_load
void write_paths_csv(std::ostream& os, const MonteCarloSummary& summary);
/// Columns: bin_lo,bin_hi,count
void write_histogram_csv(std::ostream& os, const Histogram& histogram);

/// Measurement covariance (b/Δ)·I of a perception method whose noise
/// shrinks with the time it is given.
[[nodiscard]] Matrix inverse_latency_noise(double b, double delta,
                                           Eigen::Index outputs);

}  // namespace latsched
