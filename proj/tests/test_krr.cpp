#include "adkrr/krr.hpp"
#include "adkrr/types.hpp"

#include <doctest.h>

using namespace adkrr;

namespace {

Matrix random_gram(const KernelSpec& spec, int n, uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = rng.uniform01();
  return gram_matrix(spec, x, x);
}

}  // namespace

TEST_CASE("solve_krr on frozen low-dimensional systems") {
  Matrix g1(1, 1);
  g1 << 1.0;
  Vector y1(1);
  y1 << 3.0;
  CHECK(solve_krr(g1, y1, 1.0)(0) == doctest::Approx(1.5).epsilon(1e-12));

  Matrix g2 = Matrix::Identity(2, 2);
  Vector y2(2);
  y2 << 2.0, 4.0;
  const Vector a2 = solve_krr(g2, y2, 0.5);
  CHECK(a2(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a2(1) == doctest::Approx(2.0).epsilon(1e-12));

  Matrix g3(2, 2);
  g3 << 1.0, 0.5, 0.5, 1.0;
  Vector y3(2);
  y3 << 1.0, 1.0;
  const Vector a3 = solve_krr(g3, y3, 0.25);
  CHECK(a3(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(a3(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("solve_krr rejects non-symmetric systems") {
  Matrix g(2, 2);
  g << 1.0, 0.9, 0.1, 1.0;
  Vector y(2);
  y << 1.0, 1.0;
  CHECK_THROWS_AS(solve_krr(g, y, 0.5), std::invalid_argument);
  Matrix ok = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(solve_krr(ok, y, 0.0), std::invalid_argument);
}

TEST_CASE("solve residual stays below 1e-8 relative") {
  const auto spec = KernelSpec::truncated_mercer(0.5, 200);
  Rng rng(21);
  for (int n : {1, 8, 64}) {
    Matrix x(n, 1);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = rng.uniform01();
      y[i] = rng.uniform(-1.0, 1.0);
    }
    const Matrix gram = gram_matrix(spec, x, x);
    for (double lam : {1.0, 0.1, 1e-3}) {
      const Vector a = solve_krr(gram, y, lam);
      Matrix sys = gram;
      sys.diagonal().array() += lam * n;
      CHECK((sys * a - y).norm() <= 1e-8 * y.norm());
    }
  }
}

TEST_CASE("predict_krr basics") {
  const auto spec = KernelSpec::gaussian(1.0);
  Matrix support(3, 1);
  support << 0.1, 0.5, 0.9;

  SUBCASE("zero coefficients give zero") {
    Vector zero = Vector::Zero(3);
    Vector q(1);
    q << 0.3;
    CHECK(predict_krr(zero, spec, support, q) == 0.0);
  }
  SUBCASE("a unit coefficient at the query point gives one") {
    Matrix one_pt(1, 1);
    one_pt << 0.5;
    Vector c(1);
    c << 1.0;
    Vector q(1);
    q << 0.5;
    CHECK(predict_krr(c, spec, one_pt, q) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("coefficient/support length mismatch is rejected") {
    Vector c(2);
    c << 1.0, 2.0;
    Vector q(1);
    q << 0.3;
    CHECK_THROWS_AS(predict_krr(c, spec, support, q), std::invalid_argument);
  }
  SUBCASE("prediction at training points equals gram * coefficients") {
    // the 2x2 solve_krr example evaluated through the kernel route
    const auto mercer = KernelSpec::truncated_mercer(0.5, 150);
    Matrix x(2, 1);
    x << 0.2, 0.7;
    const Matrix gram = gram_matrix(mercer, x, x);
    Vector y(2);
    y << 1.0, -1.0;
    const Vector a = solve_krr(gram, y, 0.25);
    const Vector direct = gram * a;
    for (int i = 0; i < 2; ++i)
      CHECK(predict_krr(a, mercer, x, Vector(x.row(i))) == doctest::Approx(direct[i]).epsilon(1e-12));
  }
}

TEST_CASE("empirical effective dimension on frozen matrices") {
  CHECK(empirical_effective_dimension(Matrix::Identity(2, 2), 0.5) ==
        doctest::Approx(1.0).epsilon(1e-12));

  Matrix g(2, 2);
  g << 1.0, 0.5, 0.5, 1.0;
  // eigenvalues {1.5, 0.5}; shifted by lambda n = 0.5 -> 1.5/2 + 0.5/1
  CHECK(empirical_effective_dimension(g, 0.25) == doctest::Approx(1.25).epsilon(1e-12));

  CHECK_THROWS_AS(empirical_effective_dimension(g, 0.0), std::invalid_argument);

  // vanishing limit
  const Matrix big = random_gram(KernelSpec::gaussian(0.3), 12, 5);
  CHECK(empirical_effective_dimension(big, 1e6) < 1e-4 * big.trace());
}

TEST_CASE("effective dimension is strictly decreasing in lambda and below n") {
  const int n = 24;
  const Matrix gram = random_gram(KernelSpec::truncated_mercer(0.5, 150), n, 9);
  double prev = static_cast<double>(n);
  for (int i = 0; i < 20; ++i) {
    const double lam = std::pow(10.0, -4.0 + 4.0 * i / 19.0);
    const double eff = empirical_effective_dimension(gram, lam);
    CHECK(eff > 0.0);
    CHECK(eff < n);
    CHECK(eff < prev);
    prev = eff;
  }
}

TEST_CASE("w_quantity frozen values and clamp") {
  CHECK(w_quantity(4, 0.25, 1.0) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(w_quantity(4, 0.25, 0.5) == doctest::Approx(1.5).epsilon(1e-12));  // max{.,1} clamp
  CHECK(w_quantity(100, 0.01, 4.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("w_quantity decreases strictly in n") {
  double prev = std::numeric_limits<double>::infinity();
  for (long n : {4L, 16L, 64L, 256L}) {
    const double w = w_quantity(n, 0.1, 2.0);
    CHECK(w < prev);
    prev = w;
  }
}

TEST_CASE("lambda ladder values") {
  CHECK(lambda_at(1.0, 1) == doctest::Approx(1.0));
  CHECK(lambda_at(2.0, 5) == doctest::Approx(0.1));
  CHECK(lambda_at(1.0, 4) == doctest::Approx(0.25));
  CHECK_THROWS_AS(lambda_at(0.5, 1), std::invalid_argument);

  const Ladder ladder{1.5, 6};
  const auto lambdas = ladder.lambdas();
  for (int k = 2; k <= 6; ++k) CHECK(lambdas[k - 1] < lambdas[k - 2]);
}

TEST_CASE("ladder cap: vacuous theoretical value at desk scale") {
  // n = 1e4, b = 1, kappa = 1: 1e4 / (128 ln^3(160000)) ~ 0.045 -> 0
  CHECK(ladder_cap(10000, 1.0, 1.0, CapMode::Theoretical) == 0);
  CHECK(ladder_cap(10000, 1.0, 1.0, CapMode::Practical, 50) == 50);
  CHECK(ladder_cap(1000000, 1.0, 1.0, CapMode::Theoretical) >=
        ladder_cap(10000, 1.0, 1.0, CapMode::Theoretical));
}

TEST_CASE("paper constants match an independent re-implementation") {
  // c1*
  CHECK(c1_star(1.0) == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(c1_star(2.0) == doctest::Approx(2.0 * std::sqrt(5.0)).epsilon(1e-12));
  CHECK(c1_star(6.0) == doctest::Approx(37.0 / 3.0).epsilon(1e-12));  // first branch wins

  for (double kappa : {0.5, 1.0, 1.7, 3.0, 6.0, 10.0}) {
    const double expected = std::max((kappa * kappa + 1.0) / 3.0, 2.0 * std::sqrt(kappa * kappa + 1.0));
    CHECK(c1_star(kappa) == doctest::Approx(expected).epsilon(1e-10));
  }

  // c_lp; Gamma(5) subterm is 24
  const double base = c_lp(1.0, 1.0, 1.0, 1.0);
  CHECK(base == doctest::Approx(4.0 * (1.0 + 576.0 * 24.0 * 4.0 * (18.0 + 8.0 * std::sqrt(2.0))))
                    .epsilon(1e-12));
  CHECK(base == doctest::Approx(6.4837e6).epsilon(1e-4));
  CHECK(c_lp(2.0, 1.0, 1.0, 1.0) == doctest::Approx(4.0 * base).epsilon(1e-12));

  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const double b = 1.0 + rng.uniform01();
    const double kappa = 0.5 + rng.uniform01();
    const double M = 0.1 + rng.uniform01();
    const double gamma = 0.1 + rng.uniform01();
    const double km = kappa * M + gamma;
    const double sq = std::sqrt(2.0) + 4.0;
    CHECK(c_lp(b, kappa, M, gamma) ==
          doctest::Approx(4.0 * b * b * (1.0 + 576.0 * 24.0 * km * km * sq * sq)).epsilon(1e-10));
  }

  // mu
  CHECK(mu_for_agent(100, 1.0, 1.0, MuMode::Theoretical) ==
        doctest::Approx(48.0 * 2.0 * std::sqrt(2.0) * std::log(801.0) / 100.0).epsilon(1e-10));
  CHECK(mu_for_agent(100, 1.0, 1.0, MuMode::Theoretical) == doctest::Approx(9.0771).epsilon(1e-4));
  CHECK(mu_for_agent(1000000, 1.0, 1.0, MuMode::Theoretical) <
        mu_for_agent(100, 1.0, 1.0, MuMode::Theoretical));
  CHECK(mu_for_agent(100, 1.0, 1.0, MuMode::Scaled, 0.01) ==
        doctest::Approx(0.090771).epsilon(1e-4));
}

TEST_CASE("ladder models: path monotonicity and residuals") {
  const auto spec = KernelSpec::truncated_mercer(0.5, 150);
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const int n = 4 + static_cast<int>(rng.next() % 61);  // up to 64
    Matrix x(n, 1);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = rng.uniform01();
      y[i] = std::sin(6.0 * x(i, 0)) + 0.1 * rng.uniform(-1.0, 1.0);
    }
    const Matrix gram = gram_matrix(spec, x, x);
    const Ladder ladder{1.0, 12};
    const auto models = LocalModelSet::fit(gram, y, ladder);

    double prev_norm = -1.0;
    double prev_resid = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= ladder.k_cap; ++k) {
      const Vector a = models.coefficients(k);
      Matrix sys = gram;
      sys.diagonal().array() += ladder.lambda(k) * n;
      CHECK((sys * a - y).norm() <= 1e-8 * y.norm());

      // ||f||_K^2 nondecreasing as k grows (lambda shrinks)
      const double norm = models.rkhs_norm_sq(k);
      CHECK(norm >= prev_norm - 1e-12 * std::abs(norm));
      CHECK(norm == doctest::Approx(a.dot(gram * a)).epsilon(1e-8));
      prev_norm = norm;

      // training residual nondecreasing in lambda = nonincreasing in k
      const double resid = (y - gram * a).squaredNorm();
      CHECK(resid <= prev_resid * (1.0 + 1e-12));
      prev_resid = resid;
    }

    for (int k = 2; k <= ladder.k_cap; ++k) {
      const Vector diff = models.coefficients(k) - models.coefficients(k - 1);
      const double scale = std::max(1.0, models.difference_values(k).cwiseAbs().maxCoeff());
      CHECK((models.difference_values(k) - gram * diff).cwiseAbs().maxCoeff() <= 1e-12 * scale);
      CHECK(models.difference_norm_sq(k) == doctest::Approx(diff.dot(gram * diff)).epsilon(1e-8));
    }
  }
}

TEST_CASE("degenerate single-sample dataset works along the ladder") {
  const auto spec = KernelSpec::gaussian(1.0);
  Matrix x(1, 1);
  x << 0.5;
  Vector y(1);
  y << 2.0;
  const Matrix gram = gram_matrix(spec, x, x);
  const auto models = LocalModelSet::fit(gram, y, Ladder{1.0, 3});
  // (1 + lambda_k) a = 2
  for (int k = 1; k <= 3; ++k)
    CHECK(models.coefficients(k)(0) == doctest::Approx(2.0 / (1.0 + 1.0 / k)).epsilon(1e-12));
  CHECK(models.w_value(2) > 0.0);
}
