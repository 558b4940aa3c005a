#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "latsched/admiss.hpp"
#include "latsched/config.hpp"
#include "latsched/linalg.hpp"
#include "latsched/planner.hpp"
#include "latsched/simlab.hpp"

namespace py = pybind11;
using namespace latsched;

namespace {

std::vector<ModeIndex> to_modes(const std::vector<int>& v) { return {v.begin(), v.end()}; }

}  // namespace

PYBIND11_MODULE(_latsched, m) {
  m.doc() = "Latency-aware perception scheduling for sampled-data LQG control";

  auto base = py::register_exception<Error>(m, "LatschedError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::enum_<ErrorKind>(m, "ErrorKind")
      .value("INVALID_ARGUMENT", ErrorKind::kInvalidArgument)
      .value("DIMENSION_MISMATCH", ErrorKind::kDimensionMismatch)
      .value("NON_FINITE", ErrorKind::kNonFinite)
      .value("SINGULAR", ErrorKind::kSingular)
      .value("NULLITY", ErrorKind::kNullity)
      .value("UNSUPPORTED", ErrorKind::kUnsupported)
      .value("MAX_ITERATIONS", ErrorKind::kMaxIterations)
      .value("HORIZON", ErrorKind::kHorizon)
      .value("DIVERGENCE", ErrorKind::kDivergence);

  // linsys
  py::class_<SystemModel>(m, "SystemModel")
      .def(py::init([](Matrix A, Matrix B, Matrix C, Matrix W0) {
             SystemModel s{std::move(A), std::move(B), std::move(C), std::move(W0)};
             s.validate();
             return s;
           }),
           py::arg("A"), py::arg("B"), py::arg("C"), py::arg("W0"))
      .def_readwrite("A", &SystemModel::A)
      .def_readwrite("B", &SystemModel::B)
      .def_readwrite("C", &SystemModel::C)
      .def_readwrite("W0", &SystemModel::W0)
      .def_property_readonly("states", &SystemModel::states);

  py::class_<PerceptionMode>(m, "PerceptionMode")
      .def(py::init([](double delta, Matrix sigma, Matrix gain, double penalty,
                       double cpu_fraction) {
             return PerceptionMode{delta, std::move(sigma), std::move(gain), penalty,
                                   cpu_fraction};
           }),
           py::arg("delta"), py::arg("sigma"), py::arg("gain"), py::arg("penalty") = 1.0,
           py::arg("cpu_fraction") = 0.5)
      .def_readwrite("delta", &PerceptionMode::delta)
      .def_readwrite("sigma", &PerceptionMode::sigma)
      .def_readwrite("gain", &PerceptionMode::gain)
      .def_readwrite("penalty", &PerceptionMode::penalty)
      .def_readwrite("cpu_fraction", &PerceptionMode::cpu_fraction);

  py::class_<DiscretizedMode>(m, "DiscretizedMode")
      .def_readonly("Ad", &DiscretizedMode::Ad)
      .def_readonly("Bd", &DiscretizedMode::Bd)
      .def_readonly("Wd", &DiscretizedMode::Wd)
      .def_readonly("Lambda", &DiscretizedMode::lambda)
      .def_readonly("mode_index", &DiscretizedMode::mode_index);

  py::class_<ModeFamily>(m, "ModeFamily")
      .def(py::init<SystemModel, std::vector<PerceptionMode>>(), py::arg("model"),
           py::arg("modes"))
      .def("mode", &ModeFamily::mode, py::arg("i"), py::return_value_policy::copy)
      .def("discretized", &ModeFamily::discretized, py::arg("i"),
           py::return_value_policy::copy)
      .def("chain", [](const ModeFamily& f, const std::vector<int>& g) {
        return f.chain(to_modes(g));
      })
      .def("latency", [](const ModeFamily& f, const std::vector<int>& g) {
        return f.latency(to_modes(g));
      })
      .def_property_readonly("size", &ModeFamily::size)
      .def_property_readonly("model", &ModeFamily::model, py::return_value_policy::copy);

  m.def("expm", &expm, py::arg("M"));
  m.def("discretize_interval", &discretize_interval, py::arg("model"), py::arg("gain"),
        py::arg("tau"), py::arg("index") = 1);

  // belief
  py::enum_<CovarianceClosure>(m, "CovarianceClosure")
      .value("EXACT", CovarianceClosure::kExact)
      .value("UNCORRELATED", CovarianceClosure::kUncorrelated);

  py::class_<GaussianBelief>(m, "GaussianBelief")
      .def(py::init([](Vector mean, Matrix cov, std::optional<Matrix> pred_cov) {
             Matrix p = pred_cov ? *pred_cov : cov;
             return GaussianBelief{std::move(mean), std::move(cov), std::move(p)};
           }),
           py::arg("mean"), py::arg("cov"), py::arg("pred_cov") = py::none())
      .def_readwrite("mean", &GaussianBelief::mean)
      .def_readwrite("cov", &GaussianBelief::cov)
      .def_readwrite("pred_cov", &GaussianBelief::pred_cov);

  py::class_<PredictorEstimate>(m, "PredictorEstimate")
      .def(py::init([](Vector x, Matrix P) { return PredictorEstimate{std::move(x), std::move(P)}; }),
           py::arg("x_hat"), py::arg("P_hat"))
      .def_readwrite("x_hat", &PredictorEstimate::x_hat)
      .def_readwrite("P_hat", &PredictorEstimate::P_hat);

  py::class_<CostConfig>(m, "CostConfig")
      .def(py::init([](double lambda_x, double lambda_r, double T_f, Matrix Q,
                       std::optional<Matrix> Q_f) {
             CostConfig c{lambda_x, lambda_r, T_f, Q, Q_f ? *Q_f : Q};
             c.validate(Q.rows());
             return c;
           }),
           py::arg("lambda_x"), py::arg("lambda_r"), py::arg("T_f"), py::arg("Q"),
           py::arg("Q_f") = py::none())
      .def_readwrite("lambda_x", &CostConfig::lambda_x)
      .def_readwrite("lambda_r", &CostConfig::lambda_r)
      .def_readwrite("T_f", &CostConfig::T_f)
      .def_readwrite("Q", &CostConfig::Q)
      .def_readwrite("Q_f", &CostConfig::Q_f);

  py::class_<CostBreakdown>(m, "CostBreakdown")
      .def_readonly("state_running", &CostBreakdown::state_running)
      .def_readonly("state_terminal", &CostBreakdown::state_terminal)
      .def_readonly("attention_penalty", &CostBreakdown::attention_penalty)
      .def_readonly("total", &CostBreakdown::total)
      .def_readonly("attention_count", &CostBreakdown::attention_count);

  py::class_<Moments>(m, "Moments")
      .def_readonly("mean", &Moments::mean)
      .def_readonly("cov", &Moments::cov);

  m.def("kalman_predict", &kalman_predict, py::arg("estimate"), py::arg("discretized"),
        py::arg("mode"), py::arg("measurement"), py::arg("control"), py::arg("C"));
  m.def("propagate_moments",
        py::overload_cast<const GaussianBelief&, const ModeFamily&, ModeIndex, double,
                          CovarianceClosure>(&propagate_moments),
        py::arg("belief"), py::arg("family"), py::arg("i"), py::arg("t_offset"),
        py::arg("closure") = CovarianceClosure::kExact);
  m.def("step_belief", &step_belief, py::arg("belief"), py::arg("family"), py::arg("i"),
        py::arg("closure") = CovarianceClosure::kExact);
  m.def(
      "evaluate_cost",
      [](const std::vector<int>& schedule, const GaussianBelief& b, const ModeFamily& f,
         const CostConfig& c, CovarianceClosure closure) {
        return evaluate_cost(to_modes(schedule), b, f, c, closure);
      },
      py::arg("schedule"), py::arg("belief"), py::arg("family"), py::arg("cost"),
      py::arg("closure") = CovarianceClosure::kExact);

  // schedset / admiss
  py::class_<Schedule>(m, "Schedule")
      .def_readonly("modes", &Schedule::modes)
      .def_readonly("total_latency", &Schedule::total_latency);

  py::class_<SetMember>(m, "SetMember")
      .def_readonly("schedule", &SetMember::schedule)
      .def_readonly("M", &SetMember::M);

  py::class_<EllipsoidSet>(m, "EllipsoidSet")
      .def_readonly("M0", &EllipsoidSet::M0)
      .def_readonly("members", &EllipsoidSet::members)
      .def_readonly("seed", &EllipsoidSet::seed)
      .def_readonly("iterations", &EllipsoidSet::iterations)
      .def_readonly("R", &EllipsoidSet::R)
      .def("__len__", &EllipsoidSet::size);

  m.def(
      "make_ellipsoid_set",
      [](const ModeFamily& f, const Matrix& M0, const std::vector<std::vector<int>>& s) {
        std::vector<std::vector<ModeIndex>> v;
        for (const auto& g : s) v.push_back(to_modes(g));
        return make_ellipsoid_set(f, M0, v);
      },
      py::arg("family"), py::arg("M0"), py::arg("schedules"));
  m.def("switching_index", &switching_index, py::arg("x"), py::arg("set"));
  m.def("gauge", &gauge, py::arg("x"), py::arg("M"));
  m.def(
      "build_schedule_set",
      [](const ModeFamily& f, const Matrix& M0, int ell, std::uint64_t seed,
         std::size_t max_iters, std::size_t check_directions) {
        py::gil_scoped_release release;
        return build_schedule_set({ell, seed, max_iters}, f, M0,
                                  default_checker(check_directions));
      },
      py::arg("family"), py::arg("M0"), py::arg("ell") = 20, py::arg("seed") = 0,
      py::arg("max_iters") = 1000, py::arg("check_directions") = 200000);

  py::enum_<CriticalKind>(m, "CriticalKind")
      .value("ISOLATED", CriticalKind::kIsolated)
      .value("REGULAR", CriticalKind::kRegular)
      .value("SAMPLED", CriticalKind::kSampled)
      .value("NONREGULAR", CriticalKind::kNonRegular);

  py::class_<CriticalPoint>(m, "CriticalPoint")
      .def_readonly("x", &CriticalPoint::x)
      .def_readonly("value", &CriticalPoint::value)
      .def_readonly("kind", &CriticalPoint::kind)
      .def_readonly("source_subset", &CriticalPoint::source_subset)
      .def_readonly("lambdas", &CriticalPoint::lambdas);

  py::class_<AdmissibilityReport>(m, "AdmissibilityReport")
      .def_readonly("R", &AdmissibilityReport::R)
      .def_readonly("admissible", &AdmissibilityReport::admissible)
      .def_readonly("margin", &AdmissibilityReport::margin)
      .def_readonly("critical_points", &AdmissibilityReport::critical_points)
      .def_readonly("warnings", &AdmissibilityReport::warnings)
      .def_property_readonly("method", [](const AdmissibilityReport& r) {
        return std::string(to_string(r.method));
      });

  m.def(
      "check_admissibility",
      [](const EllipsoidSet& set, const std::string& method, std::size_t directions) {
        CheckOptions o;
        if (method == "exact") {
          o.mode = CheckOptions::Mode::kExact;
        } else if (method == "sampled") {
          o.mode = CheckOptions::Mode::kSampled;
        } else if (method != "auto") {
          throw Error(ErrorKind::kInvalidArgument, "method must be auto, exact or sampled");
        }
        o.num_directions = directions;
        return check_admissibility(set, o);
      },
      py::arg("set"), py::arg("method") = "auto", py::arg("num_directions") = 1000000);
  m.def(
      "sampling_oracle",
      [](const EllipsoidSet& set, std::size_t n, bool refine) {
        return sampling_oracle(set, n, refine);
      },
      py::arg("set"), py::arg("num_directions"), py::arg("refine") = true);

  // planner
  py::class_<PlanResult>(m, "PlanResult")
      .def_readonly("schedule", &PlanResult::schedule)
      .def_readonly("cost", &PlanResult::cost)
      .def_readonly("chosen_set", &PlanResult::chosen_set)
      .def_readonly("set_sequence", &PlanResult::set_sequence)
      .def_readonly("nodes", &PlanResult::nodes);
  m.def(
      "dynprog",
      [](double tau, const GaussianBelief& b, const std::vector<EllipsoidSet>& sets,
         const ModeFamily& f, const CostConfig& c, bool prune) {
        return dynprog(tau, b, sets, f, c, {prune});
      },
      py::arg("tau"), py::arg("belief"), py::arg("sets"), py::arg("family"),
      py::arg("cost"), py::arg("prune") = true);

  // simlab
  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init([](Vector x0, Matrix P0, double h, std::uint64_t seed,
                       std::size_t num_paths, std::size_t workers) {
             SimConfig c;
             c.x0 = std::move(x0);
             c.P0 = std::move(P0);
             c.h = h;
             c.seed = seed;
             c.num_paths = num_paths;
             c.workers = workers;
             return c;
           }),
           py::arg("x0"), py::arg("P0"), py::arg("h") = 1e-3, py::arg("seed") = 0,
           py::arg("num_paths") = 100, py::arg("workers") = 0)
      .def_readwrite("h", &SimConfig::h)
      .def_readwrite("seed", &SimConfig::seed)
      .def_readwrite("num_paths", &SimConfig::num_paths)
      .def_readwrite("workers", &SimConfig::workers);

  py::class_<SamplePathResult>(m, "SamplePathResult")
      .def_readonly("path", &SamplePathResult::path)
      .def_readonly("cost", &SamplePathResult::cost)
      .def_readonly("attention", &SamplePathResult::attention)
      .def_readonly("cpu_load", &SamplePathResult::cpu_load)
      .def_readonly("schedule", &SamplePathResult::schedule)
      .def_readonly("x_final", &SamplePathResult::x_final)
      .def_readonly("diverged", &SamplePathResult::diverged);

  py::class_<MonteCarloSummary>(m, "MonteCarloSummary")
      .def_readonly("mean_cost", &MonteCarloSummary::mean_cost)
      .def_readonly("std_cost", &MonteCarloSummary::std_cost)
      .def_readonly("stderr_cost", &MonteCarloSummary::stderr_cost)
      .def_readonly("mean_attention", &MonteCarloSummary::mean_attention)
      .def_readonly("mean_cpu_load", &MonteCarloSummary::mean_cpu_load)
      .def_readonly("paths", &MonteCarloSummary::paths)
      .def_readonly("diverged", &MonteCarloSummary::diverged)
      .def_readonly("records", &MonteCarloSummary::records)
      .def_property_readonly("histogram_edges",
                             [](const MonteCarloSummary& s) { return s.histogram.edges; })
      .def_property_readonly("histogram_counts",
                             [](const MonteCarloSummary& s) { return s.histogram.counts; });

  m.def(
      "simulate_static",
      [](const ModeFamily& f, const std::vector<int>& pattern, const CostConfig& c,
         const SimConfig& s) {
        py::gil_scoped_release release;
        return monte_carlo(f, StaticPolicy{to_modes(pattern)}, c, s);
      },
      py::arg("family"), py::arg("pattern"), py::arg("cost"), py::arg("sim"));
  m.def(
      "simulate_sp2",
      [](const ModeFamily& f, std::vector<EllipsoidSet> sets, const CostConfig& c,
         const SimConfig& s, const std::string& selector, double lookahead) {
        Sp2Policy p;
        p.sets = std::move(sets);
        if (selector == "round_robin") {
          p.selector = Sp2Policy::Selector::kRoundRobin;
        } else if (selector != "balanced") {
          throw Error(ErrorKind::kInvalidArgument, "selector must be balanced or round_robin");
        }
        p.horizon.T_lookahead = lookahead;
        py::gil_scoped_release release;
        return monte_carlo(f, p, c, s);
      },
      py::arg("family"), py::arg("sets"), py::arg("cost"), py::arg("sim"),
      py::arg("selector") = "balanced", py::arg("lookahead") = 2.0);

  // config
  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def_readonly("model", &ExperimentConfig::model)
      .def_readonly("modes", &ExperimentConfig::modes)
      .def_readonly("cost", &ExperimentConfig::cost)
      .def_readonly("x0", &ExperimentConfig::x0)
      .def_readonly("P0", &ExperimentConfig::P0)
      .def_property_readonly("M0", [](const ExperimentConfig& c) { return c.policy.M0; })
      .def_property_readonly("seed", [](const ExperimentConfig& c) { return c.sim.seed; })
      .def("family", &ExperimentConfig::family);
  m.def("load_config", &load_config, py::arg("path"), py::arg("profile") = "");
  m.def("load_schedule_set", &load_schedule_set, py::arg("path"), py::arg("family"),
        py::arg("tol") = 1e-12);
  m.def("save_schedule_set", &save_schedule_set, py::arg("path"), py::arg("set"));
}
