#include "latsched/planner.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace latsched {
namespace {

struct Branch {
  CostBreakdown cost;
  std::vector<ModeIndex> modes;
  std::vector<std::size_t> sets;
};

class Search {
 public:
  Search(std::span<const EllipsoidSet> sets, const ModeFamily& family,
         const CostConfig& cfg, const PlanOptions& options, int max_depth)
      : sets_(sets), family_(family), cfg_(cfg), options_(options),
        max_depth_(max_depth) {}

  std::optional<Branch> node(double tau, const GaussianBelief& belief,
                             double partial, int depth) {
    if (depth > max_depth_) {
      throw Error(ErrorKind::kHorizon,
                  "dynprog: recursion depth " + std::to_string(depth) +
                      " exceeds bound; schedule set corrupted?");
    }
    ++nodes_;
    std::optional<Branch> best;
    for (std::size_t s = 0; s < sets_.size(); ++s) {
      const auto& gamma = switching_law(belief.mean, sets_[s]);
      auto seg = advance(belief, tau, gamma.modes, family_, cfg_, true,
                         options_.closure);
      const double reached = partial + seg.cost.total;
      // Costs are non-negative, so the partial sum bounds every completion.
      // The slack keeps pruning strictly conservative under rounding.
      if (options_.prune && reached > incumbent_ * (1.0 + 1e-9) + 1e-300) {
        continue;
      }
      Branch b;
      b.cost = seg.cost;
      b.modes = gamma.modes;
      b.sets = {s};
      if (!seg.reached_horizon) {
        auto tail = node(seg.end_time, seg.end, reached, depth + 1);
        if (!tail) continue;
        b.cost += tail->cost;
        b.modes.insert(b.modes.end(), tail->modes.begin(), tail->modes.end());
        b.sets.insert(b.sets.end(), tail->sets.begin(), tail->sets.end());
      } else if (partial + b.cost.total < incumbent_) {
        incumbent_ = partial + b.cost.total;
      }
      if (!best || b.cost.total < best->cost.total) best = std::move(b);
    }
    return best;
  }

  [[nodiscard]] std::size_t nodes() const { return nodes_; }

 private:
  std::span<const EllipsoidSet> sets_;
  const ModeFamily& family_;
  const CostConfig& cfg_;
  PlanOptions options_;
  int max_depth_;
  std::size_t nodes_ = 0;
  double incumbent_ = std::numeric_limits<double>::infinity();
};

}  // namespace

double dynprog_node_bound(double tau, double T_f, std::size_t m, double c) {
  const auto levels = static_cast<int>(std::floor((T_f - tau) / c));
  double total = 0.0;
  double term = 1.0;
  for (int j = 0; j <= levels; ++j) {
    total += term;
    term *= static_cast<double>(m);
  }
  return total;
}

PlanResult dynprog(double tau, const GaussianBelief& belief,
                   std::span<const EllipsoidSet> sets, const ModeFamily& family,
                   const CostConfig& cfg, const PlanOptions& options) {
  cfg.validate(family.states());
  if (sets.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "dynprog: no schedule sets");
  }
  if (!(tau >= 0.0) || !(tau < cfg.T_f)) {
    throw Error(ErrorKind::kInvalidArgument, "dynprog: requires 0 <= tau < T_f");
  }
  double c = std::numeric_limits<double>::infinity();
  for (const auto& s : sets) {
    if (s.members.empty()) {
      throw Error(ErrorKind::kInvalidArgument, "dynprog: empty schedule set");
    }
    c = std::min(c, s.min_latency());
  }
  const int max_depth = static_cast<int>(std::ceil((cfg.T_f - tau) / c)) + 1;

  Search search(sets, family, cfg, options, max_depth);
  auto best = search.node(tau, belief, 0.0, 0);
  if (!best) {
    throw Error(ErrorKind::kInvalidArgument, "dynprog: no feasible branch");
  }
  PlanResult out;
  out.schedule = make_schedule(std::move(best->modes), family);
  out.cost = best->cost;
  out.chosen_set = best->sets.front();
  out.set_sequence = std::move(best->sets);
  out.nodes = search.nodes();
  return out;
}

SetSelector balanced_sp2_selector(const ModeFamily& family,
                                  const CostConfig& cfg,
                                  const HorizonConfig& horizon) {
  if (!(horizon.T_lookahead > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument,
                "balanced_sp2_selector: T_lookahead must be positive");
  }
  CostConfig window = cfg;
  window.T_f = horizon.T_lookahead;
  return [&family, window, plan = horizon.plan](
             const GaussianBelief& belief, std::span<const EllipsoidSet> sets) {
    return dynprog(0.0, belief, sets, family, window, plan).chosen_set;
  };
}

}  // namespace latsched
