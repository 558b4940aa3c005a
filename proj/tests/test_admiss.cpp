#include <doctest.h>

#include <algorithm>
#include <random>

#include "latsched/admiss.hpp"
#include "support.hpp"

using namespace latsched;
using support::mat;
using support::vec;

namespace {

EllipsoidSet raw_set(const Matrix& M0, const std::vector<Matrix>& Ms) {
  EllipsoidSet s;
  s.M0 = M0;
  int k = 0;
  for (const auto& M : Ms) {
    SetMember m;
    m.schedule.modes = std::vector<ModeIndex>(static_cast<std::size_t>(++k), 1);
    m.schedule.total_latency = k;
    m.M = M;
    s.members.push_back(std::move(m));
  }
  return s;
}

/// Random member M = ΛᵀM0Λ with Λ a random near-contraction.
Matrix random_member(std::mt19937_64& rng, const Matrix& M0) {
  const Matrix L = support::random_matrix(rng, M0.rows(), M0.rows(), 0.6) +
                   0.2 * Matrix::Identity(M0.rows(), M0.rows());
  return L.transpose() * M0 * L;
}

}  // namespace

TEST_CASE("single ellipsoid examples") {
  const Matrix I = Matrix::Identity(2, 2);
  CHECK(check_admissibility(raw_set(I, {0.25 * I})).R == doctest::Approx(4.0));
  const auto shrunk = check_admissibility(raw_set(I, {4.0 * I}));
  CHECK(shrunk.R == doctest::Approx(0.25));
  CHECK_FALSE(shrunk.admissible);

  const auto r = check_admissibility(raw_set(I, {mat({{4, 0}, {0, 1}})}));
  CHECK(r.R == doctest::Approx(0.25).epsilon(1e-14));
  std::vector<Vector> pts;
  for (const auto& c : r.critical_points) pts.push_back(c.x);
  auto has = [&](const Vector& p) {
    return std::any_of(pts.begin(), pts.end(),
                       [&](const Vector& q) { return (q - p).norm() < 1e-12; });
  };
  CHECK(has(vec({0.5, 0})));
  CHECK(has(vec({-0.5, 0})));
  CHECK(has(vec({0, 1})));
  CHECK(has(vec({0, -1})));
}

TEST_CASE("two crossing ellipses: the isolated intersection wins") {
  const auto r = check_admissibility(raw_set(
      Matrix::Identity(2, 2), {mat({{1, 0}, {0, 4}}), mat({{4, 0}, {0, 1}})}));
  CHECK(r.R == doctest::Approx(0.4).epsilon(1e-13));
  int isolated = 0;
  for (const auto& c : r.critical_points) {
    if (c.kind == CriticalKind::kIsolated) {
      ++isolated;
      CHECK(std::abs(c.x(0)) == doctest::Approx(std::sqrt(0.2)));
      CHECK(std::abs(c.x(1)) == doctest::Approx(std::sqrt(0.2)));
    } else {
      CHECK(c.value == doctest::Approx(1.0));  // (±1,0), (0,±1) survive
    }
  }
  CHECK(isolated == 4);
}

TEST_CASE("nullity: a member equal to M0 gives a full kernel and R = 1") {
  const Matrix M0 = support::example_M0();
  const auto pts = regular_solutions(std::vector<std::size_t>{0}, M0,
                                     std::vector<Matrix>{M0});
  REQUIRE(!pts.empty());
  CHECK(pts[0].kernel_dim == 2);
  CHECK(pts[0].value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(check_admissibility(raw_set(M0, {M0})).R == doctest::Approx(1.0));

  try {
    (void)regular_solutions(std::vector<std::size_t>{0}, Matrix::Identity(3, 3),
                            std::vector<Matrix>{mat({{1, 0, 0}, {0, 1, 0}, {0, 0, 2}})});
    FAIL("expected kNullity");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNullity);
  }
}

TEST_CASE("critical points satisfy their constraints and stationarity") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix M0 = support::random_spd(rng, 2);
    std::vector<Matrix> Ms;
    for (int k = 0; k < 1 + trial % 4; ++k) Ms.push_back(random_member(rng, M0));
    const auto r = check_admissibility(raw_set(M0, Ms));
    for (const auto& c : r.critical_points) {
      CHECK(c.value == doctest::Approx(c.x.dot(M0 * c.x)).epsilon(1e-12));
      for (auto g : c.source_subset) {
        CHECK(c.x.dot(Ms[g] * c.x) == doctest::Approx(1.0).epsilon(1e-9));
      }
      for (std::size_t g = 0; g < Ms.size(); ++g) CHECK_FALSE(strictly_inside(c.x, Ms[g]));
      if (c.kind == CriticalKind::kRegular) {
        const Matrix G = M0 + c.lambdas[0] * Ms[c.source_subset[0]];
        CHECK((G * c.x).norm() <= 1e-9 * (1.0 + G.norm() * c.x.norm()));
      }
    }
  }
}

TEST_CASE("exact R agrees with the sampling oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const Matrix M0 = support::random_spd(rng, 2);
    std::vector<Matrix> Ms;
    for (int k = 0; k < 1 + trial % 5; ++k) Ms.push_back(random_member(rng, M0));
    const double exact = check_admissibility(raw_set(M0, Ms)).R;
    const auto oracle = sampling_oracle(M0, Ms, 200000);
    CHECK(oracle.R >= exact * (1 - 1e-9));
    CHECK(oracle.R == doctest::Approx(exact).epsilon(1e-6));
  }
}

TEST_CASE("R does not depend on member order") {
  std::mt19937_64 rng(8);
  const Matrix M0 = support::random_spd(rng, 2);
  std::vector<Matrix> Ms;
  for (int k = 0; k < 5; ++k) Ms.push_back(random_member(rng, M0));
  const double ref = check_admissibility(raw_set(M0, Ms)).R;
  for (int p = 0; p < 10; ++p) {
    std::shuffle(Ms.begin(), Ms.end(), rng);
    CHECK(check_admissibility(raw_set(M0, Ms)).R == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("scaling M0 by c scales R by c") {
  std::mt19937_64 rng(9);
  const Matrix M0 = support::random_spd(rng, 2);
  std::vector<Matrix> Ms{random_member(rng, M0), random_member(rng, M0)};
  const double r1 = check_admissibility(raw_set(M0, Ms)).R;
  const double r2 = check_admissibility(raw_set(3.0 * M0, Ms)).R;
  CHECK(r2 == doctest::Approx(3.0 * r1).epsilon(1e-12));
}

TEST_CASE("verdict-only stops early on inadmissible sets") {
  const Matrix I = Matrix::Identity(2, 2);
  CheckOptions o;
  o.verdict_only = true;
  const auto r = check_admissibility(raw_set(I, {4.0 * I, 3.0 * I, mat({{2, 0}, {0, 3}})}), o);
  CHECK(r.early_exit);
  CHECK(r.R <= 1.0);
}

TEST_CASE("coincident members are skipped with a warning") {
  const Matrix I = Matrix::Identity(2, 2);
  const auto r = check_admissibility(raw_set(I, {0.5 * I, 0.5 * I}));
  CHECK(r.R == doctest::Approx(2.0));
  CHECK(!r.warnings.empty());
}

TEST_CASE("nonregular scan flags dependent gradients only") {
  const Matrix M0 = Matrix::Identity(3, 3);
  const std::vector<Matrix> Ms{Matrix::Identity(3, 3), mat({{1, 0, 0}, {0, 2, 0}, {0, 0, 3}})};
  const std::vector<Vector> cands{vec({1, 0, 0}), vec({0, 1, 0}),
                                  vec({std::sqrt(0.5), std::sqrt(0.5), 0})};
  const auto s = nonregular_scan(Ms, cands, M0);
  REQUIRE(s.size() == 1);
  CHECK((s[0].x - vec({1, 0, 0})).norm() == 0.0);
  CHECK(s[0].value == doctest::Approx(1.0));
  CHECK(nonregular_scan(std::vector<Matrix>{Ms[0]}, cands, M0).empty());
}

TEST_CASE("n > 2: sampled fallback, forced exact throws") {
  std::mt19937_64 rng(10);
  const Matrix M0 = support::random_spd(rng, 3);
  const auto set = raw_set(M0, {random_member(rng, M0), random_member(rng, M0)});
  CheckOptions o;
  o.num_directions = 20000;
  const auto r = check_admissibility(set, o);
  CHECK(r.method == CheckMethod::kSampled);
  CHECK(!r.warnings.empty());
  o.mode = CheckOptions::Mode::kExact;
  try {
    (void)check_admissibility(set, o);
    FAIL("expected kUnsupported");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUnsupported);
  }
  const auto Ms = member_matrices(set);
  CHECK_THROWS_AS((void)isolated_solutions(std::vector<std::size_t>{0, 1, 0}, M0, Ms),
                  Error);
  CHECK_THROWS_AS((void)regular_solutions(std::vector<std::size_t>{0, 1}, M0, Ms),
                  Error);

  // Sampled R is an upper bound: a single-member exact value exists via the
  // pencil and the sampled estimate cannot undercut it.
  const auto single = raw_set(M0, {Ms[0]});
  const auto pts = regular_solutions(std::vector<std::size_t>{0}, M0,
                                     std::vector<Matrix>{Ms[0]});
  double exact = 1e300;
  for (const auto& p : pts) exact = std::min(exact, p.value);
  o.mode = CheckOptions::Mode::kSampled;
  o.num_directions = 200000;
  const double sampled = check_admissibility(single, o).R;
  CHECK(sampled >= exact * (1 - 1e-12));
  CHECK(sampled == doctest::Approx(exact).epsilon(2e-2));
}

TEST_CASE("input validation") {
  const Matrix I = Matrix::Identity(2, 2);
  CHECK_THROWS_AS((void)check_admissibility(raw_set(I, {})), Error);
  CHECK_THROWS_AS((void)check_admissibility(raw_set(I, {mat({{1, 0}, {0, -1}})})), Error);
  CHECK_THROWS_AS((void)regular_solutions(std::vector<std::size_t>{3}, I,
                                          std::vector<Matrix>{I}),
                  Error);
}
