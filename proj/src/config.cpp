#include "latsched/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "latsched/linalg.hpp"

namespace latsched {
namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + " " + msg);
}

const json& field(const json& obj, const std::string& key,
                  const std::string& path) {
  if (!obj.is_object()) fail(path, "must be an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(path + "." + key, "is required");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

double number_or(const json& obj, const std::string& key, double fallback,
                 const std::string& path) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : number(*it, path + "." + key);
}

std::int64_t integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "must be an integer");
  return j.get<std::int64_t>();
}

Matrix matrix(const json& j, const std::string& path) {
  if (j.is_number()) return Matrix::Constant(1, 1, number(j, path));
  if (!j.is_array() || j.empty()) fail(path, "must be a non-empty nested array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  Matrix m;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!row.is_array()) fail(rp, "must be an array");
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      if (cols == 0) fail(rp, "is empty");
      m.resize(rows, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      fail(rp, "has " + std::to_string(row.size()) + " entries, expected " +
                   std::to_string(cols));
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = number(row[static_cast<std::size_t>(c)],
                       rp + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

Vector vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "must be a non-empty array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) =
        number(j[i], path + "[" + std::to_string(i) + "]");
  }
  return v;
}

void require_shape(const Matrix& m, Eigen::Index r, Eigen::Index c,
                   const std::string& path) {
  if (m.rows() != r || m.cols() != c) {
    fail(path, "must be " + std::to_string(r) + "x" + std::to_string(c) +
                   ", got " + std::to_string(m.rows()) + "x" +
                   std::to_string(m.cols()));
  }
}

void require_psd(const Matrix& m, const std::string& path) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (!is_symmetric(m) || min_sym_eigenvalue(m) < -1e-12 * scale) {
    fail(path, "not PSD");
  }
}

void require_pd(const Matrix& m, const std::string& path) {
  if (!is_symmetric(m) || !(min_sym_eigenvalue(m) > 0.0)) fail(path, "not PD");
}

json json_matrix(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text,
                              const std::string& profile) {
  json doc = parse_json(json_text);
  if (!doc.is_object()) fail("$", "must be an object");
  if (!profile.empty()) {
    const auto& profiles = field(doc, "profiles", "$");
    const auto& over = field(profiles, profile, "profiles");
    doc.merge_patch(over);
  }

  ExperimentConfig cfg;
  const auto& sys = field(doc, "system", "$");
  cfg.model.A = matrix(field(sys, "A", "system"), "system.A");
  const auto n = cfg.model.A.rows();
  require_shape(cfg.model.A, n, n, "system.A");
  cfg.model.B = matrix(field(sys, "B", "system"), "system.B");
  if (cfg.model.B.rows() != n) fail("system.B", "must have n rows");
  cfg.model.C = matrix(field(sys, "C", "system"), "system.C");
  if (cfg.model.C.cols() != n) fail("system.C", "must have n columns");
  cfg.model.W0 = matrix(field(sys, "W0", "system"), "system.W0");
  require_shape(cfg.model.W0, n, n, "system.W0");
  require_psd(cfg.model.W0, "system.W0");
  const auto nu = cfg.model.B.cols();
  const auto nz = cfg.model.C.rows();

  const auto& modes = field(doc, "modes", "$");
  if (!modes.is_array() || modes.empty()) fail("modes", "must be a non-empty array");
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const std::string p = "modes[" + std::to_string(i) + "]";
    const auto& mj = modes[i];
    PerceptionMode mode;
    mode.delta = number(field(mj, "delta", p), p + ".delta");
    if (!(mode.delta > 0.0)) fail(p + ".delta", "must be positive");
    if (mj.contains("sigma")) {
      mode.sigma = matrix(mj["sigma"], p + ".sigma");
    } else if (mj.contains("sigma_inverse_latency")) {
      // Σ = (b/Δ)·I
      const double b = number(mj["sigma_inverse_latency"], p + ".sigma_inverse_latency");
      if (!(b >= 0.0)) fail(p + ".sigma_inverse_latency", "must be >= 0");
      mode.sigma = (b / mode.delta) * Matrix::Identity(nz, nz);
    } else {
      fail(p + ".sigma", "is required");
    }
    require_shape(mode.sigma, nz, nz, p + ".sigma");
    require_psd(mode.sigma, p + ".sigma");
    mode.gain = matrix(field(mj, "gain", p), p + ".gain");
    require_shape(mode.gain, nu, n, p + ".gain");
    if (mj.contains("penalty_rate")) {
      // r = rate·Δ
      mode.penalty = number(mj["penalty_rate"], p + ".penalty_rate") * mode.delta;
    } else {
      mode.penalty = number_or(mj, "penalty", 1.0, p);
    }
    if (!(mode.penalty > 0.0)) fail(p + ".penalty", "must be positive");
    mode.cpu_fraction = number_or(mj, "cpu_fraction", 0.5, p);
    if (!(mode.cpu_fraction > 0.0 && mode.cpu_fraction < 1.0)) {
      fail(p + ".cpu_fraction", "must lie in (0,1)");
    }
    cfg.modes.push_back(std::move(mode));
  }

  const auto& cost = field(doc, "cost", "$");
  cfg.cost.lambda_x = number_or(cost, "lambda_x", 1.0, "cost");
  cfg.cost.lambda_r = number_or(cost, "lambda_r", 0.0, "cost");
  if (cfg.cost.lambda_x < 0.0) fail("cost.lambda_x", "must be >= 0");
  if (cfg.cost.lambda_r < 0.0) fail("cost.lambda_r", "must be >= 0");
  cfg.cost.T_f = number(field(cost, "T_f", "cost"), "cost.T_f");
  if (!(cfg.cost.T_f > 0.0)) fail("cost.T_f", "must be positive");
  cfg.cost.Q = matrix(field(cost, "Q", "cost"), "cost.Q");
  require_shape(cfg.cost.Q, n, n, "cost.Q");
  require_psd(cfg.cost.Q, "cost.Q");
  cfg.cost.Q_f = cost.contains("Q_f") ? matrix(cost["Q_f"], "cost.Q_f") : cfg.cost.Q;
  require_shape(cfg.cost.Q_f, n, n, "cost.Q_f");
  require_psd(cfg.cost.Q_f, "cost.Q_f");

  const auto& pol = field(doc, "policy", "$");
  if (pol.contains("type")) {
    if (!pol["type"].is_string()) fail("policy.type", "must be a string");
    cfg.policy.type = pol["type"].get<std::string>();
  }
  if (cfg.policy.type != "balanced" && cfg.policy.type != "round_robin" &&
      cfg.policy.type != "static") {
    fail("policy.type", "must be balanced, round_robin or static");
  }
  if (pol.contains("pattern")) {
    const auto& pat = pol["pattern"];
    if (!pat.is_array() || pat.empty()) fail("policy.pattern", "must be a non-empty array");
    for (std::size_t i = 0; i < pat.size(); ++i) {
      const std::string p = "policy.pattern[" + std::to_string(i) + "]";
      const auto v = integer(pat[i], p);
      if (v < 1 || v > static_cast<std::int64_t>(cfg.modes.size())) {
        fail(p, "is not a mode index");
      }
      cfg.policy.pattern.push_back(static_cast<ModeIndex>(v));
    }
  }
  if (cfg.policy.type == "static" && cfg.policy.pattern.empty()) {
    fail("policy.pattern", "is required for a static policy");
  }
  if (pol.contains("m")) cfg.policy.m = static_cast<int>(integer(pol["m"], "policy.m"));
  if (pol.contains("ell")) cfg.policy.ell = static_cast<int>(integer(pol["ell"], "policy.ell"));
  if (cfg.policy.m < 1) fail("policy.m", "must be >= 1");
  if (cfg.policy.ell < 1) fail("policy.ell", "must be >= 1");
  cfg.policy.lookahead = number_or(pol, "lookahead", 2.0, "policy");
  if (!(cfg.policy.lookahead > 0.0)) fail("policy.lookahead", "must be positive");
  if (pol.contains("max_iters")) {
    const auto v = integer(pol["max_iters"], "policy.max_iters");
    if (v < 1) fail("policy.max_iters", "must be >= 1");
    cfg.policy.max_iters = static_cast<std::size_t>(v);
  }
  if (pol.contains("check_directions")) {
    const auto v = integer(pol["check_directions"], "policy.check_directions");
    if (v < 1) fail("policy.check_directions", "must be >= 1");
    cfg.policy.check_directions = static_cast<std::size_t>(v);
  }
  cfg.policy.M0 = pol.contains("M0") ? matrix(pol["M0"], "policy.M0")
                                     : Matrix::Identity(n, n);
  require_shape(cfg.policy.M0, n, n, "policy.M0");
  require_pd(cfg.policy.M0, "policy.M0");

  if (doc.contains("sim")) {
    const auto& sim = doc["sim"];
    if (!sim.is_object()) fail("sim", "must be an object");
    cfg.sim.h = number_or(sim, "h", cfg.sim.h, "sim");
    if (!(cfg.sim.h > 0.0)) fail("sim.h", "must be positive");
    if (sim.contains("paths")) {
      const auto v = integer(sim["paths"], "sim.paths");
      if (v < 1) fail("sim.paths", "must be >= 1");
      cfg.sim.paths = static_cast<std::size_t>(v);
    }
    if (sim.contains("seed")) {
      if (!sim["seed"].is_number_unsigned() && !sim["seed"].is_number_integer()) {
        fail("sim.seed", "must be a non-negative integer");
      }
      if (sim["seed"].is_number_integer() && sim["seed"].get<std::int64_t>() < 0) {
        fail("sim.seed", "must be a non-negative integer");
      }
      cfg.sim.seed = sim["seed"].get<std::uint64_t>();
    }
    if (sim.contains("workers")) {
      const auto v = integer(sim["workers"], "sim.workers");
      if (v < 0) fail("sim.workers", "must be >= 0");
      cfg.sim.workers = static_cast<std::size_t>(v);
    }
  }

  const auto& init = field(doc, "initial", "$");
  cfg.x0 = vector(field(init, "x0", "initial"), "initial.x0");
  if (cfg.x0.size() != n) fail("initial.x0", "must have n entries");
  cfg.P0 = matrix(field(init, "P0", "initial"), "initial.P0");
  require_shape(cfg.P0, n, n, "initial.P0");
  require_psd(cfg.P0, "initial.P0");

  // Remaining cross-checks (e.g. h against the latencies) are reported by
  // the modules themselves.
  (void)cfg.family();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::string& profile) {
  return parse_config(read_file(path), profile);
}

std::string schedule_set_to_json(const EllipsoidSet& set) {
  json doc;
  doc["format"] = "latsched-schedule-set/1";
  doc["seed"] = set.seed;
  doc["iterations"] = set.iterations;
  doc["R"] = set.R ? json(*set.R) : json(nullptr);
  doc["M0"] = json_matrix(set.M0);
  json members = json::array();
  for (const auto& m : set.members) {
    members.push_back({{"modes", m.schedule.modes}, {"M", json_matrix(m.M)}});
  }
  doc["schedules"] = std::move(members);
  return doc.dump(2) + "\n";
}

void save_schedule_set(const std::filesystem::path& path,
                       const EllipsoidSet& set) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path.string() + ": cannot write");
  out << schedule_set_to_json(set);
  if (!out) throw ConfigError(path.string() + ": write failed");
}

EllipsoidSet schedule_set_from_json(const std::string& json_text,
                                    const ModeFamily& family, double tol) {
  const json doc = parse_json(json_text);
  if (!doc.is_object()) fail("$", "must be an object");
  const auto& fmt = field(doc, "format", "$");
  if (fmt != "latsched-schedule-set/1") fail("format", "unsupported");
  const Matrix M0 = matrix(field(doc, "M0", "$"), "M0");
  const auto n = family.states();
  require_shape(M0, n, n, "M0");
  require_pd(M0, "M0");

  const auto& sched = field(doc, "schedules", "$");
  if (!sched.is_array() || sched.empty()) fail("schedules", "must be a non-empty array");
  std::vector<std::vector<ModeIndex>> seqs;
  std::vector<Matrix> stored;
  for (std::size_t i = 0; i < sched.size(); ++i) {
    const std::string p = "schedules[" + std::to_string(i) + "]";
    const auto& modes = field(sched[i], "modes", p);
    if (!modes.is_array() || modes.empty()) fail(p + ".modes", "must be a non-empty array");
    std::vector<ModeIndex> seq;
    for (std::size_t k = 0; k < modes.size(); ++k) {
      const std::string mp = p + ".modes[" + std::to_string(k) + "]";
      const auto v = integer(modes[k], mp);
      if (v < 1 || v > family.size()) fail(mp, "is not a mode index");
      seq.push_back(static_cast<ModeIndex>(v));
    }
    seqs.push_back(std::move(seq));
    stored.push_back(sched[i].contains("M") ? matrix(sched[i]["M"], p + ".M")
                                            : Matrix());
  }

  EllipsoidSet set;
  try {
    set = make_ellipsoid_set(family, M0, seqs);
  } catch (const Error& e) {
    throw ConfigError(std::string("schedules: ") + e.what());
  }
  for (std::size_t i = 0; i < stored.size(); ++i) {
    if (stored[i].size() == 0) continue;
    const std::string p = "schedules[" + std::to_string(i) + "].M";
    const Matrix& fresh = set.members[i].M;
    require_shape(stored[i], n, n, p);
    const double err = (stored[i] - fresh).cwiseAbs().maxCoeff();
    if (err > tol * std::max(1.0, fresh.cwiseAbs().maxCoeff())) {
      fail(p, "does not match the recomputed matrix (stale or foreign file)");
    }
  }
  if (doc.contains("seed") && doc["seed"].is_number_unsigned()) {
    set.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("iterations") && doc["iterations"].is_number_unsigned()) {
    set.iterations = doc["iterations"].get<std::size_t>();
  }
  if (doc.contains("R") && doc["R"].is_number()) set.R = doc["R"].get<double>();
  return set;
}

EllipsoidSet load_schedule_set(const std::filesystem::path& path,
                               const ModeFamily& family, double tol) {
  try {
    return schedule_set_from_json(read_file(path), family, tol);
  } catch (const ConfigError& e) {
    throw ConfigError(path.filename().string() + ": " + e.what());
  }
}

std::vector<EllipsoidSet> load_schedule_sets(const std::filesystem::path& path,
                                             const ModeFamily& family) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  if (files.empty()) throw ConfigError(path.string() + ": no schedule-set files");
  std::vector<EllipsoidSet> sets;
  for (const auto& f : files) sets.push_back(load_schedule_set(f, family));
  return sets;
}

}  // namespace latsched
