// One PASS/FAIL line per acceptance criterion. Exit status 0 iff all pass.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>
#include <boost/math/distributions/chi_squared.hpp>

#include "latsched/admiss.hpp"
#include "latsched/config.hpp"
#include "latsched/linalg.hpp"
#include "latsched/planner.hpp"
#include "latsched/random.hpp"
#include "latsched/simlab.hpp"
#include "support.hpp"

using namespace latsched;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<EllipsoidSet> build_sets(const ExperimentConfig& cfg, const ModeFamily& family,
                                     int m, int ell) {
  std::vector<EllipsoidSet> sets;
  const auto checker = default_checker(cfg.policy.check_directions);
  for (int k = 0; k < m; ++k) {
    BuildOptions o;
    o.ell = ell;
    o.seed = derive_seed(cfg.sim.seed, static_cast<std::uint64_t>(k));
    o.max_iters = cfg.policy.max_iters;
    sets.push_back(build_schedule_set(o, family, cfg.policy.M0, checker));
  }
  return sets;
}

SimConfig sim_config(const ExperimentConfig& cfg) {
  SimConfig s;
  s.h = cfg.sim.h;
  s.seed = cfg.sim.seed;
  s.num_paths = cfg.sim.paths;
  s.workers = cfg.sim.workers;
  s.x0 = cfg.x0;
  s.P0 = cfg.P0;
  return s;
}

// 1. Exact R against a 10^6-direction sampling oracle on random 2-D instances.
Outcome admissibility_oracle(const fs::path&) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  int verdict_mismatch = 0;
  int compared = 0;
  for (int inst = 0; inst < 100; ++inst) {
    SystemModel model;
    model.A = support::random_matrix(rng, 2, 2);
    model.B = support::random_matrix(rng, 2, 1);
    model.C = support::random_matrix(rng, 1, 2);
    model.W0 = Matrix::Identity(2, 2);
    std::vector<PerceptionMode> modes;
    for (int d = 0; d < 2; ++d) {
      modes.push_back({0.05 + 0.45 * unit(rng), Matrix::Identity(1, 1),
                       support::random_matrix(rng, 1, 2), 1.0, 0.5});
    }
    const ModeFamily family(model, modes);
    const Matrix M0 = support::random_spd(rng, 2);
    const int size = 1 + static_cast<int>(rng() % 6);
    std::set<std::vector<ModeIndex>> seen;
    EllipsoidSet set;
    set.M0 = M0;
    while (static_cast<int>(set.size()) < size) {
      std::vector<ModeIndex> g(1 + rng() % 4);
      for (auto& i : g) i = 1 + static_cast<int>(rng() % 2);
      if (!seen.insert(g).second) continue;
      try {
        Matrix M = ellipsoid_matrix(g, family, M0);
        set.members.push_back({make_schedule(g, family), std::move(M)});
      } catch (const Error&) {
      }
    }
    const double R = check_admissibility(set).R;
    const auto Ms = member_matrices(set);
    const double oracle = sampling_oracle(M0, Ms, 1'000'000, false).R;
    worst = std::max(worst, std::abs(R - oracle) / std::max(1.0, R));
    if (std::abs(R - 1.0) > 1e-3) {
      ++compared;
      if ((R > 1.0) != (oracle > 1.0)) ++verdict_mismatch;
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && verdict_mismatch == 0 && secs < 60.0,
          fmt("max |R-oracle|/max(1,R)=%.2e verdict mismatches=%d/%d time=%.1fs",
              worst, verdict_mismatch, compared, secs)};
}

// 2. Algorithm 2 on the double integrator with the fixed seed.
Outcome magnitude_check(const fs::path& configs) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = load_config(configs / "double_integrator.json");
  const auto family = cfg.family();
  const auto set = build_sets(cfg, family, 1, cfg.policy.ell).front();
  const double R = check_admissibility(set).R;
  int covering = 0;
  for (const auto& m : set.members) {
    // S0 ⊂ S_γ  <=>  M_γ ≤ M0  <=>  λmax(M0⁻¹ M_γ) ≤ 1
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(m.M, cfg.policy.M0);
    if (ges.eigenvalues().maxCoeff() <= 1.0) ++covering;
  }
  const double secs = seconds_since(t0);
  return {R > 1.0 && R < 2.0 && covering == 0 && secs < 30.0,
          fmt("seed=%llu R=%.6f |Gamma|=%zu iterations=%zu members covering S0 alone=%d "
              "time=%.1fs",
              static_cast<unsigned long long>(cfg.sim.seed), R, set.size(), set.iterations,
              covering, secs)};
}

// 3. Noise-free mean recursion under round-robin SP².
Outcome sp2_stability(const fs::path& configs) {
  const auto cfg = load_config(configs / "double_integrator.json");
  const auto family = cfg.family();
  const auto sets = build_sets(cfg, family, 3, cfg.policy.ell);
  const Matrix M0 = cfg.policy.M0;
  const Matrix inv_sqrt = psd_sqrt(M0).inverse();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  int violations = 0;
  int unconverged = 0;
  std::size_t max_boundaries = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double a = angle(rng);
    Vector x = inv_sqrt * support::vec({std::cos(a), std::sin(a)});
    double g_prev = gauge(x, M0);
    std::size_t k = 0;
    for (; x.norm() >= 1e-6 && k < 100000; ++k) {
      const auto& gamma = switching_law(x, sets[k % sets.size()]);
      for (ModeIndex i : gamma.modes) x = family.discretized(i).lambda * x;
      const double g = gauge(x, M0);
      if (!(g < g_prev)) ++violations;
      g_prev = g;
    }
    if (x.norm() >= 1e-6) ++unconverged;
    max_boundaries = std::max(max_boundaries, k);
  }
  return {violations == 0 && unconverged == 0,
          fmt("R=[%.4f %.4f %.4f] gauge violations=%d unconverged=%d max boundaries=%zu",
              *sets[0].R, *sets[1].R, *sets[2].R, violations, unconverged, max_boundaries)};
}

/// Modes emitted at instants in [0, T_f); anything later never runs.
std::vector<ModeIndex> played(const std::vector<ModeIndex>& s, const ModeFamily& family,
                              double T_f) {
  std::vector<ModeIndex> out;
  double t = 0.0;
  for (ModeIndex i : s) {
    if (t >= T_f * (1 - kHorizonSlack)) break;
    out.push_back(i);
    t += family.mode(i).delta;
  }
  return out;
}

// 4. dynprog against exhaustive enumeration.
Outcome dynprog_exactness(const fs::path&) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto family = support::example_family();
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> horizon(0.12, 0.5);
  std::normal_distribution<double> normal;
  int schedule_mismatch = 0;
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t m = 1 + inst % 3;
    std::vector<EllipsoidSet> sets;
    for (std::size_t s = 0; s < m; ++s) {
      std::set<std::vector<ModeIndex>> seen;
      const std::size_t members = 1 + rng() % 4;
      while (seen.size() < members) {
        std::vector<ModeIndex> g(1 + rng() % 4);
        for (auto& i : g) i = 1 + static_cast<int>(rng() % 2);
        g[rng() % g.size()] = 2;  // every piece lasts >= 0.1: at most 5 epochs
        seen.insert(g);
      }
      sets.push_back(make_ellipsoid_set(family, support::example_M0(),
                                        {seen.begin(), seen.end()}));
    }
    const auto cost = support::example_cost(horizon(rng));
    const Matrix P = support::random_spd(rng, 2, 0.05);
    const GaussianBelief b0{support::vec({2 * normal(rng), 2 * normal(rng)}), P, 0.5 * P};
    const auto bf = support::brute_force_plan(b0, sets, family, cost);
    for (bool prune : {true, false}) {
      const auto dp = dynprog(0.0, b0, sets, family, cost, {prune});
      if (played(dp.schedule.modes, family, cost.T_f) !=
          played(bf.schedule, family, cost.T_f)) {
        ++schedule_mismatch;
      }
      worst = std::max(worst, std::abs(dp.cost.total - bf.cost) / std::max(1.0, bf.cost));
    }
  }
  const double secs = seconds_since(t0);
  return {schedule_mismatch == 0 && worst <= 1e-10 && secs < 120.0,
          fmt("played-schedule mismatches=%d max cost diff=%.2e time=%.1fs", schedule_mismatch,
              worst, secs)};
}

// 5. Terminal covariance (chi-square) and analytic vs Monte Carlo cost.
Outcome moment_consistency(const fs::path& configs) {
  const auto cfg = load_config(configs / "double_integrator.json");
  const auto family = cfg.family();
  const Eigen::Index n = family.states();

  auto cost = cfg.cost;
  cost.T_f = 1.0;
  auto sim = sim_config(cfg);
  sim.num_paths = 10000;
  const StaticPolicy slow{{2}};
  const auto mc = monte_carlo(family, slow, cost, sim);
  auto belief = GaussianBelief::initial(cfg.x0, cfg.P0);
  for (int k = 0; k < 10; ++k) belief = step_belief(belief, family, 2);
  Vector mean = Vector::Zero(n);
  for (const auto& r : mc.records) mean += r.x_final;
  mean /= static_cast<double>(mc.records.size());
  Matrix S = Matrix::Zero(n, n);
  for (const auto& r : mc.records) S += (r.x_final - mean) * (r.x_final - mean).transpose();
  S /= static_cast<double>(mc.records.size());
  // Likelihood-ratio statistic for H0: Cov = P(T); χ² with n(n+1)/2 dof.
  const Matrix ratio = belief.cov.ldlt().solve(S);
  const double N = static_cast<double>(mc.records.size());
  const double lr = N * (ratio.trace() - std::log(ratio.determinant()) - static_cast<double>(n));
  const boost::math::chi_squared chi(static_cast<double>(n * (n + 1) / 2));
  const double band = boost::math::quantile(chi, 0.99);

  auto sim_cost = sim_config(cfg);
  sim_cost.num_paths = 400;
  const auto mc_cost = monte_carlo(family, slow, cfg.cost, sim_cost);
  std::vector<ModeIndex> sched;
  while (family.latency(sched) < cfg.cost.T_f * (1 - 1e-9)) sched.push_back(2);
  const double exact =
      evaluate_cost(sched, GaussianBelief::initial(cfg.x0, cfg.P0), family, cfg.cost).total;
  const double z = (mc_cost.mean_cost - exact) / mc_cost.stderr_cost;
  return {lr <= band && std::abs(z) <= 3.0 && mc.diverged == 0,
          fmt("covariance LR=%.3f (99%% band %.3f); cost analytic=%.4f MC=%.4f±%.4f z=%.2f",
              lr, band, exact, mc_cost.mean_cost, mc_cost.stderr_cost, z)};
}

// 6. Balanced SP² against the static schedules at desk scale.
Outcome fig2_reproduction(const fs::path& configs) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = load_config(configs / "double_integrator.json", "desk");
  const auto family = cfg.family();
  Sp2Policy sp2;
  sp2.sets = build_sets(cfg, family, cfg.policy.m, cfg.policy.ell);
  sp2.selector = Sp2Policy::Selector::kBalanced;
  sp2.horizon.T_lookahead = cfg.policy.lookahead;
  const auto sim = sim_config(cfg);
  const auto s1 = monte_carlo(family, StaticPolicy{{1}}, cfg.cost, sim);
  const auto s2 = monte_carlo(family, StaticPolicy{{2}}, cfg.cost, sim);
  const auto bal = monte_carlo(family, sp2, cfg.cost, sim);
  const bool ok = bal.mean_cost < s1.mean_cost && bal.mean_cost < s2.mean_cost &&
                  bal.mean_attention < s1.mean_attention && bal.diverged == 0;
  return {ok, fmt("mean cost balanced=%.4f static{1}=%.4f static{2}=%.4f; attention "
                  "balanced=%.1f static{1}=%.1f; time=%.1fs",
                  bal.mean_cost, s1.mean_cost, s2.mean_cost, bal.mean_attention,
                  s1.mean_attention, seconds_since(t0))};
}

// 7. CPU load of the balanced policy on the particle robot.
Outcome robot_cpu_load(const fs::path& configs) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = load_config(configs / "particle_robot.json", "desk");
  const auto family = cfg.family();
  Sp2Policy sp2;
  sp2.sets = build_sets(cfg, family, cfg.policy.m, cfg.policy.ell);
  sp2.selector = Sp2Policy::Selector::kBalanced;
  sp2.horizon.T_lookahead = cfg.policy.lookahead;
  const auto mc = monte_carlo(family, sp2, cfg.cost, sim_config(cfg));
  return {mc.mean_cpu_load < 0.9 && mc.diverged == 0,
          fmt("mean cpu_load=%.4f mean cost=%.4f attention=%.1f paths=%zu time=%.1fs",
              mc.mean_cpu_load, mc.mean_cost, mc.mean_attention, mc.paths,
              seconds_since(t0))};
}

// 8. Discretization against quadrature; semigroup and Gramian additivity.
Outcome numerical_kernels(const fs::path&) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> dt(0.01, 1.0);
  double worst_quad = 0.0;
  double worst_semi = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Index n = 1 + k % 4;
    SystemModel m;
    m.A = support::random_matrix(rng, n, n);
    m.B = support::random_matrix(rng, n, 1);
    m.C = Matrix::Identity(n, n);
    const Matrix g = support::random_matrix(rng, n, n);
    m.W0 = g * g.transpose();
    const Matrix L = Matrix::Zero(1, n);
    const double t1 = dt(rng);
    const double t2 = dt(rng);
    const auto a = discretize_interval(m, L, t1);
    const auto b = discretize_interval(m, L, t2);
    const auto ab = discretize_interval(m, L, t1 + t2);
    auto rel = [](const Matrix& x, const Matrix& ref) {
      return (x - ref).norm() / std::max(1e-300, ref.norm());
    };
    worst_semi = std::max({worst_semi, rel(b.Ad * a.Ad, ab.Ad),
                           rel(b.Ad * a.Bd + b.Bd, ab.Bd),
                           rel(b.Ad * a.Wd * b.Ad.transpose() + b.Wd, ab.Wd)});
    const auto q = support::quadrature_discretization(m, t1, 2000);
    worst_quad = std::max({worst_quad, rel(a.Ad, q.Ad), rel(a.Bd, q.Bd), rel(a.Wd, q.Wd)});
  }
  return {worst_quad <= 1e-8 && worst_semi <= 1e-9,
          fmt("max rel error vs quadrature=%.2e semigroup/Gramian=%.2e (1000 systems)",
              worst_quad, worst_semi)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string configs = "configs";
  std::vector<int> only;
  app.add_option("--configs", configs, "Directory with the shipped experiment files");
  app.add_option("--only", only, "Run only these criteria (1-8)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome(const fs::path&)>>> criteria{
      {"admissibility oracle equivalence", admissibility_oracle},
      {"double-integrator magnitude check", magnitude_check},
      {"SP2 stability", sp2_stability},
      {"dynprog exactness", dynprog_exactness},
      {"estimator/moment consistency", moment_consistency},
      {"balanced vs static cost ordering", fig2_reproduction},
      {"robot CPU-load bound", robot_cpu_load},
      {"numerical kernels", numerical_kernels},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second(configs);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
