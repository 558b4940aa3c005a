// latsched: check, build and simulate schedule sets from a JSON experiment.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "latsched/admiss.hpp"
#include "latsched/config.hpp"
#include "latsched/planner.hpp"
#include "latsched/random.hpp"
#include "latsched/simlab.hpp"

namespace fs = std::filesystem;
using namespace latsched;

namespace {

enum Exit : int {
  kOk = 0,
  kNotAdmissible = 1,
  kBadInput = 2,
  kNoAdmissibleSet = 3,
  kDiverged = 4,
};

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string modes_str(const std::vector<ModeIndex>& modes) {
  std::string s = "{";
  for (std::size_t i = 0; i < modes.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(modes[i]);
  }
  return s + "}";
}

Vector parse_vector(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
  Vector v(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) v(static_cast<Eigen::Index>(i)) = vals[i];
  return v;
}

void print_report(const AdmissibilityReport& r, const std::string& label) {
  std::cout << label << "R=" << fmt(r.R) << ' '
            << (r.admissible ? "admissible" : "not admissible")
            << " margin=" << fmt(r.margin) << " method=" << to_string(r.method)
            << '\n';
  // Smallest surviving value per subset.
  std::vector<std::pair<std::vector<std::size_t>, double>> minima;
  for (const auto& cp : r.critical_points) {
    auto it = std::find_if(minima.begin(), minima.end(), [&](const auto& m) {
      return m.first == cp.source_subset;
    });
    if (it == minima.end()) {
      minima.emplace_back(cp.source_subset, cp.value);
    } else {
      it->second = std::min(it->second, cp.value);
    }
  }
  for (const auto& [subset, value] : minima) {
    std::cout << "  subset {";
    for (std::size_t i = 0; i < subset.size(); ++i) {
      std::cout << (i ? "," : "") << subset[i] + 1;
    }
    std::cout << "} min=" << fmt(value, 9) << '\n';
  }
  for (const auto& w : r.warnings) std::cout << "  warning: " << w << '\n';
}

struct Common {
  std::string config;
  std::string profile;
  std::optional<std::uint64_t> seed;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latency-aware perception scheduling toolkit"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "experiment JSON")->required();
    sub->add_option("--profile", common.profile, "profile from the config (desk|paper)");
    sub->add_option("--seed", common.seed, "override the config seed");
  };

  std::string sets_path;
  std::string out_path;
  std::optional<int> m_opt;
  std::optional<int> ell_opt;
  std::optional<std::size_t> paths_opt;
  std::optional<std::string> policy_opt;
  std::string x0_text;
  std::string p0_diag_text;
  bool trust_sets = false;
  bool no_prune = false;

  auto* check = app.add_subcommand("check", "admissibility report of a schedule set");
  add_common(check);
  check->add_option("--sets", sets_path, "schedule-set file or directory")->required();

  auto* build = app.add_subcommand("build-sets", "construct admissible schedule sets");
  add_common(build);
  build->add_option("--out", out_path, "output directory")->required();
  build->add_option("--m", m_opt, "number of sets");
  build->add_option("--ell", ell_opt, "initial maximum schedule length");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo campaign");
  add_common(sim);
  sim->add_option("--sets", sets_path, "schedule-set directory (SP² policies)");
  sim->add_option("--out", out_path, "per-path CSV")->required();
  sim->add_option("--paths", paths_opt, "number of sample paths");
  sim->add_option("--policy", policy_opt, "balanced|round_robin|static");
  sim->add_flag("--trust-sets", trust_sets, "skip re-verifying admissibility");

  auto* plan = app.add_subcommand("plan", "optimal schedule over the horizon");
  add_common(plan);
  plan->add_option("--sets", sets_path, "schedule-set directory")->required();
  plan->add_option("--x0", x0_text, "initial mean, comma separated");
  plan->add_option("--P0", p0_diag_text, "initial covariance diagonal, comma separated");
  plan->add_flag("--no-prune", no_prune, "disable branch-and-bound");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kBadInput;
  }

  try {
    ExperimentConfig cfg = load_config(common.config, common.profile);
    if (common.seed) cfg.sim.seed = *common.seed;
    const ModeFamily family = cfg.family();
    const std::uint64_t seed = cfg.sim.seed;

    if (*check) {
      const auto sets = load_schedule_sets(sets_path, family);
      bool all = true;
      for (std::size_t i = 0; i < sets.size(); ++i) {
        CheckOptions opts;
        opts.num_directions = cfg.policy.check_directions;
        const auto report = check_admissibility(sets[i], opts);
        print_report(report, sets.size() > 1 ? "set " + std::to_string(i + 1) + ": " : "");
        all = all && report.admissible;
      }
      return all ? kOk : kNotAdmissible;
    }

    if (*build) {
      const int m = m_opt.value_or(cfg.policy.m);
      const int ell = ell_opt.value_or(cfg.policy.ell);
      if (m < 1 || ell < 1) throw ConfigError("--m and --ell must be >= 1");
      std::cout << "seed=" << seed << '\n';
      fs::create_directories(out_path);
      const auto checker = default_checker(cfg.policy.check_directions);
      for (int k = 0; k < m; ++k) {
        BuildOptions opts;
        opts.ell = ell;
        opts.seed = derive_seed(seed, static_cast<std::uint64_t>(k));
        opts.max_iters = cfg.policy.max_iters;
        EllipsoidSet set;
        try {
          set = build_schedule_set(opts, family, cfg.policy.M0, checker);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kMaxIterations) throw;
          std::cerr << "set " << k + 1 << ": " << e.what() << '\n';
          return kNoAdmissibleSet;
        }
        CheckOptions copts;
        copts.num_directions = cfg.policy.check_directions;
        set.R = check_admissibility(set, copts).R;
        const fs::path file = fs::path(out_path) / ("set_" + std::to_string(k + 1) + ".json");
        save_schedule_set(file, set);
        (void)load_schedule_set(file, family);  // round-trip check
        std::cout << file.string() << ": |Gamma|=" << set.size()
                  << " iterations=" << set.iterations << " R=" << fmt(*set.R) << '\n';
      }
      return kOk;
    }

    if (*sim) {
      const std::string type = policy_opt.value_or(cfg.policy.type);
      Policy policy;
      if (type == "static") {
        if (cfg.policy.pattern.empty()) throw ConfigError("policy.pattern is required for a static policy");
        policy = StaticPolicy{cfg.policy.pattern};
      } else if (type == "balanced" || type == "round_robin") {
        if (sets_path.empty()) throw ConfigError("--sets is required for SP² policies");
        Sp2Policy sp2;
        sp2.sets = load_schedule_sets(sets_path, family);
        if (!trust_sets) {
          for (std::size_t i = 0; i < sp2.sets.size(); ++i) {
            CheckOptions opts;
            opts.verdict_only = true;
            opts.num_directions = cfg.policy.check_directions;
            if (!check_admissibility(sp2.sets[i], opts).admissible) {
              std::cerr << "set " << i + 1 << " is not admissible\n";
              return kNotAdmissible;
            }
          }
        }
        sp2.selector = type == "balanced" ? Sp2Policy::Selector::kBalanced
                                          : Sp2Policy::Selector::kRoundRobin;
        sp2.horizon.T_lookahead = cfg.policy.lookahead;
        policy = std::move(sp2);
      } else {
        throw ConfigError("--policy must be balanced, round_robin or static");
      }
      SimConfig sc;
      sc.h = cfg.sim.h;
      sc.seed = seed;
      sc.num_paths = paths_opt.value_or(cfg.sim.paths);
      sc.workers = cfg.sim.workers;
      sc.x0 = cfg.x0;
      sc.P0 = cfg.P0;
      std::cout << "seed=" << seed << " policy=" << type << " paths=" << sc.num_paths
                << " h=" << cfg.sim.h << " T_f=" << cfg.cost.T_f << '\n';
      const auto summary = monte_carlo(family, policy, cfg.cost, sc);

      const fs::path out(out_path);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      {
        std::ofstream csv(out);
        if (!csv) throw ConfigError(out.string() + ": cannot write");
        write_paths_csv(csv, summary);
      }
      fs::path hist_path = out;
      hist_path.replace_extension(".hist.csv");
      {
        std::ofstream h(hist_path);
        write_histogram_csv(h, summary.histogram);
      }
      fs::path sum_path = out;
      sum_path.replace_extension(".summary.txt");
      std::ostringstream s;
      s << "policy " << type << "\nseed " << seed << "\npaths " << summary.paths
        << "\ndiverged " << summary.diverged << "\nmean_cost " << fmt(summary.mean_cost, 9)
        << "\nstd_cost " << fmt(summary.std_cost, 9) << "\nstderr_cost "
        << fmt(summary.stderr_cost, 9) << "\nmean_attention "
        << fmt(summary.mean_attention, 6) << "\nmean_cpu_load "
        << fmt(summary.mean_cpu_load, 6) << '\n';
      std::ofstream(sum_path) << s.str();
      std::cout << s.str();
      if (static_cast<double>(summary.diverged) > 0.01 * static_cast<double>(summary.paths)) {
        std::cerr << summary.diverged << " of " << summary.paths << " paths diverged\n";
        return kDiverged;
      }
      return kOk;
    }

    if (*plan) {
      const auto sets = load_schedule_sets(sets_path, family);
      for (std::size_t i = 0; i < sets.size(); ++i) {
        CheckOptions opts;
        opts.verdict_only = true;
        opts.num_directions = cfg.policy.check_directions;
        if (!check_admissibility(sets[i], opts).admissible) {
          std::cerr << "set " << i + 1 << " is not admissible\n";
          return kNotAdmissible;
        }
      }
      Vector x0 = x0_text.empty() ? cfg.x0 : parse_vector(x0_text);
      Matrix P0 = cfg.P0;
      if (!p0_diag_text.empty()) P0 = parse_vector(p0_diag_text).asDiagonal();
      if (x0.size() != family.states() || P0.rows() != family.states()) {
        throw ConfigError("--x0/--P0 must have n entries");
      }
      PlanOptions popts;
      popts.prune = !no_prune;
      const auto result = dynprog(0.0, GaussianBelief::initial(x0, P0), sets,
                                  family, cfg.cost, popts);
      std::cout << "schedule=" << modes_str(result.schedule.modes) << '\n'
                << "J*=" << fmt(result.cost.total, 9)
                << " (running " << fmt(result.cost.state_running, 9)
                << ", terminal " << fmt(result.cost.state_terminal, 9)
                << ", attention " << fmt(result.cost.attention_penalty, 9)
                << ", alpha " << result.cost.attention_count << ")\n"
                << "chosen_set=" << result.chosen_set + 1 << "\nset_sequence=";
      for (std::size_t i = 0; i < result.set_sequence.size(); ++i) {
        std::cout << (i ? "," : "") << result.set_sequence[i] + 1;
      }
      std::cout << "\nnodes=" << result.nodes << '\n';
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::kDivergence ? kDiverged : kBadInput;
  }
  return kOk;
}
