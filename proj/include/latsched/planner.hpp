#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "latsched/belief.hpp"
#include "latsched/schedset.hpp"

namespace latsched {

struct PlanResult {
  Schedule schedule;  ///< concatenation of the chosen pieces
  CostBreakdown cost;
  std::size_t chosen_set = 0;  ///< set chosen at the first epoch
  std::vector<std::size_t> set_sequence;  ///< set chosen at every epoch
  std::size_t nodes = 0;  ///< recursion nodes expanded
};

struct PlanOptions {
  bool prune = true;
  CovarianceClosure closure = CovarianceClosure::kExact;
};

/// Optimal choice of one set per decision epoch over [tau, cfg.T_f], where
/// each epoch plays the piece picked by the switching law of that set at
/// the current mean. Ties keep the earlier-enumerated set.
[[nodiscard]] PlanResult dynprog(double tau, const GaussianBelief& belief,
                                 std::span<const EllipsoidSet> sets,
                                 const ModeFamily& family,
                                 const CostConfig& cfg,
                                 const PlanOptions& options = {});

/// Worst-case number of nodes: Σ_{j=0}^{⌊(T_f-τ)/c⌋} m^j.
[[nodiscard]] double dynprog_node_bound(double tau, double T_f,
                                        std::size_t m, double c);

struct HorizonConfig {
  double T_lookahead = 2.0;
  PlanOptions plan;
};

/// Moving-horizon selector: runs dynprog with T_f := T_lookahead from the
/// predictor belief handed over by the policy and returns the first set.
/// `family` is captured by reference and must outlive the selector.
[[nodiscard]] SetSelector balanced_sp2_selector(const ModeFamily& family,
                                                const CostConfig& cfg,
                                                const HorizonConfig& horizon);

}  // namespace latsched
