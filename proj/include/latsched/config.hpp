#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "latsched/belief.hpp"
#include "latsched/linsys.hpp"
#include "latsched/schedset.hpp"

namespace latsched {

/// Policy block of an experiment file.
struct PolicyConfig {
  std::string type = "balanced";  ///< balanced | round_robin | static
  std::vector<ModeIndex> pattern;  ///< static pattern
  int m = 5;                      ///< number of schedule sets
  int ell = 20;                   ///< initial maximum schedule length
  double lookahead = 2.0;         ///< balanced SP² window
  Matrix M0;
  std::size_t max_iters = 1000;
  std::size_t check_directions = 200000;  ///< sampled checks (n > 2)
};

struct SimSettings {
  double h = 1e-3;
  std::size_t paths = 100;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
};

struct ExperimentConfig {
  SystemModel model;
  std::vector<PerceptionMode> modes;
  CostConfig cost;
  PolicyConfig policy;
  SimSettings sim;
  Vector x0;
  Matrix P0;

  [[nodiscard]] ModeFamily family() const { return {model, modes}; }
};

/// Parse failures and precondition violations, with a JSON path in the
/// message (for example "modes[1].sigma not PSD").
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kInvalidArgument, what) {}
};

/// Loads and validates an experiment file. A named profile, when given,
/// is merged over the document from its "profiles" object.
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path,
                                           const std::string& profile = "");
[[nodiscard]] ExperimentConfig parse_config(const std::string& json_text,
                                            const std::string& profile = "");

/// Schedule-set files: JSON with format tag, provenance (seed, iterations,
/// R), M0, and per member the 1-based mode sequence and its M_γ.
void save_schedule_set(const std::filesystem::path& path,
                       const EllipsoidSet& set);
[[nodiscard]] std::string schedule_set_to_json(const EllipsoidSet& set);

/// Reloads a set and recomputes every M_γ from `family`; a stored matrix
/// that differs by more than `tol` (relative) is an error.
[[nodiscard]] EllipsoidSet load_schedule_set(const std::filesystem::path& path,
                                             const ModeFamily& family,
                                             double tol = 1e-12);
[[nodiscard]] EllipsoidSet schedule_set_from_json(const std::string& json_text,
                                                  const ModeFamily& family,
                                                  double tol = 1e-12);

/// All *.json files of a directory in lexicographic order, or the single
/// file when `path` is a file.
[[nodiscard]] std::vector<EllipsoidSet> load_schedule_sets(
    const std::filesystem::path& path, const ModeFamily& family);

}  // namespace latsched
