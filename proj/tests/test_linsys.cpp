#include <doctest.h>

#include <random>

#include "latsched/linalg.hpp"
#include "latsched/linsys.hpp"
#include "support.hpp"

using namespace latsched;
using support::mat;

namespace {

double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1e-300, b.norm());
}

}  // namespace

TEST_CASE("expm agrees with Taylor series and closed forms") {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 50; ++k) {
    const Matrix m = support::random_matrix(rng, 4, 4, 0.3);
    CHECK(rel_err(expm(m), support::taylor_exp(m, 40)) < 1e-13);
  }
  const Matrix d = mat({{-3, 0}, {0, 2}});
  const Matrix e = expm(d * 5.0);
  CHECK(e(0, 0) == doctest::Approx(std::exp(-15.0)).epsilon(1e-13));
  CHECK(e(1, 1) == doctest::Approx(std::exp(10.0)).epsilon(1e-13));
  // Rotation generator.
  const Matrix r = expm(mat({{0, -1}, {1, 0}}) * 1.3);
  CHECK(r(0, 0) == doctest::Approx(std::cos(1.3)).epsilon(1e-14));
  CHECK(r(1, 0) == doctest::Approx(std::sin(1.3)).epsilon(1e-14));
}

TEST_CASE("scalar integrator discretization") {
  SystemModel m{mat({{0}}), mat({{1}}), mat({{1}}), mat({{1}})};
  PerceptionMode mode{0.1, mat({{1}}), mat({{0}}), 1.0, 0.5};
  const auto dm = discretize(m, mode, 1);
  CHECK(dm.Ad(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(dm.Bd(0, 0) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(dm.Wd(0, 0) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(dm.mode_index == 1);
}

TEST_CASE("double integrator: nilpotent Taylor oracle and symbolic Gramian") {
  const auto model = support::double_integrator();
  PerceptionMode mode{0.1, mat({{1}}), mat({{-1.5, -3}}), 1.0, 0.5};
  const auto dm = discretize(model, mode, 2);
  const double d = 0.1;
  // A² = 0: exp(AΔ) = I + AΔ, B_d = (IΔ + AΔ²/2)B.
  CHECK(rel_err(dm.Ad, mat({{1, d}, {0, 1}})) < 1e-15);
  CHECK(rel_err(dm.Bd, mat({{d * d / 2}, {d}})) < 1e-14);
  const Matrix wd = mat({{d + d * d * d / 3, d * d / 2}, {d * d / 2, d}});
  CHECK(rel_err(dm.Wd, wd) < 1e-13);
  CHECK(dm.Wd(0, 0) == doctest::Approx(0.1003333333333333).epsilon(1e-12));
  CHECK(rel_err(dm.lambda, dm.Ad + dm.Bd * mode.gain) < 1e-15);
}

TEST_CASE("chain_matrix order and simple products") {
  DiscretizedMode a;
  a.lambda = 2.0 * Matrix::Identity(2, 2);
  DiscretizedMode b;
  b.lambda = 3.0 * Matrix::Identity(2, 2);
  std::vector<DiscretizedMode> one{a};
  CHECK(chain_matrix(one).isApprox(a.lambda));
  std::vector<DiscretizedMode> two{a, b};
  CHECK(chain_matrix(two).isApprox(6.0 * Matrix::Identity(2, 2)));
  std::vector<DiscretizedMode> none;
  CHECK_THROWS_AS((void)chain_matrix(none), Error);

  // Non-commuting pair: the later mode multiplies from the left.
  const auto family = support::example_family();
  const Matrix l1 = family.discretized(1).lambda;
  const Matrix l2 = family.discretized(2).lambda;
  Matrix by_hand(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      by_hand(i, j) = l2(i, 0) * l1(0, j) + l2(i, 1) * l1(1, j);
  const std::vector<ModeIndex> gamma{1, 2};
  CHECK(rel_err(family.chain(gamma), by_hand) < 1e-15);
  CHECK(family.latency(gamma) == doctest::Approx(0.11));
}

TEST_CASE("semigroup and Gramian additivity on random systems") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> dist(0.01, 0.5);
  for (int k = 0; k < 200; ++k) {
    const Eigen::Index n = 1 + k % 4;
    const auto model = support::random_stable_model(rng, n);
    const Matrix gain = Matrix::Zero(1, n);
    const double d1 = dist(rng);
    const double d2 = dist(rng);
    const auto m1 = discretize_interval(model, gain, d1, 1);
    const auto m2 = discretize_interval(model, gain, d2, 1);
    const auto m12 = discretize_interval(model, gain, d1 + d2, 1);
    CHECK((m2.Ad * m1.Ad - m12.Ad).norm() <= 1e-9 * std::max(1.0, m12.Ad.norm()));
    const Matrix w = m2.Ad * m1.Wd * m2.Ad.transpose() + m2.Wd;
    CHECK((w - m12.Wd).norm() <= 1e-9 * std::max(1.0, m12.Wd.norm()));
    CHECK(is_symmetric(m12.Wd, 1e-12));
    CHECK(min_sym_eigenvalue(m12.Wd) >= -1e-12);
  }
}

TEST_CASE("discretize agrees with fine quadrature") {
  std::mt19937_64 rng(77);
  for (int k = 0; k < 6; ++k) {
    const Eigen::Index n = 1 + k % 4;
    const auto model = support::random_stable_model(rng, n);
    const double delta = 0.1 + 0.1 * k;
    // Simpson with h = 1e-6·Δ would be 10⁶ panels; 2·10⁵ is already far
    // below the 1e-8 target for these smooth integrands.
    const auto q = support::quadrature_discretization(model, delta, 200000);
    const auto dm = discretize_interval(model, Matrix::Zero(1, n), delta, 1);
    CHECK(rel_err(dm.Ad, q.Ad) < 1e-8);
    CHECK(rel_err(dm.Bd, q.Bd) < 1e-8);
    CHECK(rel_err(dm.Wd, q.Wd) < 1e-8);
  }
}

TEST_CASE("validation errors") {
  auto model = support::double_integrator();
  PerceptionMode mode{0.1, mat({{1}}), mat({{-1.5, -3}}), 1.0, 0.5};
  SUBCASE("dimension mismatch") {
    PerceptionMode bad = mode;
    bad.gain = mat({{1, 2, 3}});
    CHECK_THROWS_AS((void)discretize(model, bad, 1), Error);
    model.B = mat({{1}});
    CHECK_THROWS_AS(model.validate(), Error);
  }
  SUBCASE("non-finite entries") {
    model.A(0, 0) = std::nan("");
    try {
      model.validate();
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kNonFinite);
    }
  }
  SUBCASE("mode preconditions name the mode") {
    PerceptionMode bad = mode;
    bad.delta = -1.0;
    try {
      ModeFamily f(model, {mode, bad});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("modes[1]") != std::string::npos);
    }
    bad = mode;
    bad.sigma = mat({{-1}});
    CHECK_THROWS_AS(ModeFamily(model, {bad}), Error);
    bad = mode;
    bad.cpu_fraction = 1.0;
    CHECK_THROWS_AS(ModeFamily(model, {bad}), Error);
  }
}

TEST_CASE("partial-interval discretization cache") {
  const auto family = support::example_family();
  const auto half = family.at_offset(2, 0.05);
  const auto direct = discretize_interval(family.model(), family.mode(2).gain, 0.05, 2);
  CHECK(half.lambda.isApprox(direct.lambda, 1e-15));
  const auto zero = family.at_offset(2, 0.0);
  CHECK(zero.lambda.isApprox(Matrix::Identity(2, 2)));
  CHECK(zero.Wd.norm() == 0.0);
  CHECK_THROWS_AS((void)family.at_offset(2, 0.2), Error);
  CHECK_THROWS_AS((void)family.mode(3), Error);
}
