#include "adkrr/kernel.hpp"
#include "adkrr/types.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

using namespace adkrr;

namespace {

Vector point1(double x) {
  Vector v(1);
  v[0] = x;
  return v;
}

Matrix random_points(int n, uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = rng.uniform01();
  return x;
}

// direct truncated-Mercer sum, independent of the gram fast path
double mercer_direct(double s_param, int truncation, double x, double x2) {
  double sum = 0.0;
  for (int t = 1; t <= truncation; ++t) {
    const double sigma = std::pow(static_cast<double>(t), -1.0 / s_param);
    sum += sigma * 2.0 * std::cos(t * M_PI * x) * std::cos(t * M_PI * x2);
  }
  return sum;
}

}  // namespace

TEST_CASE("gaussian kernel evaluates to 1 on the diagonal") {
  const auto spec = KernelSpec::gaussian(1.0);
  CHECK(eval_kernel(spec, point1(0.3), point1(0.3)) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("truncated mercer with a single eigenpair") {
  // sigma_1 = 1, phi_1(x) = sqrt(2) cos(pi x): K(0,0) = 2
  const auto spec = KernelSpec::truncated_mercer(0.5, 1);
  CHECK(eval_kernel(spec, point1(0.0), point1(0.0)) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("gaussian kernel decays below 1e-12 at large separation") {
  const auto spec = KernelSpec::gaussian(1.0, Domain::box(1, -100.0, 100.0));
  CHECK(eval_kernel(spec, point1(0.0), point1(50.0)) < 1e-12);
}

TEST_CASE("kernel evaluation is symmetric") {
  const auto gauss = KernelSpec::gaussian(0.7);
  const auto mercer = KernelSpec::truncated_mercer(0.5, 64);
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const Vector a = point1(rng.uniform01());
    const Vector b = point1(rng.uniform01());
    CHECK(eval_kernel(gauss, a, b) == doctest::Approx(eval_kernel(gauss, b, a)).epsilon(1e-12));
    CHECK(eval_kernel(mercer, a, b) == doctest::Approx(eval_kernel(mercer, b, a)).epsilon(1e-12));
  }
}

TEST_CASE("points outside the domain are rejected") {
  const auto spec = KernelSpec::truncated_mercer(0.5, 8);
  CHECK_THROWS_AS(eval_kernel(spec, point1(1.5), point1(0.2)), std::domain_error);
  Matrix bad(2, 1);
  bad << 0.5, -0.1;
  CHECK_THROWS_AS(gram_matrix(spec, bad, bad), std::domain_error);
}

TEST_CASE("gram of a single gaussian point is [[1]]") {
  const auto spec = KernelSpec::gaussian(2.0);
  Matrix x(1, 1);
  x << 0.4;
  const Matrix g = gram_matrix(spec, x, x);
  CHECK(g.rows() == 1);
  CHECK(g(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("empty point lists are rejected") {
  const auto spec = KernelSpec::gaussian(1.0);
  Matrix empty(0, 1), one(1, 1);
  one << 0.5;
  CHECK_THROWS_AS(gram_matrix(spec, empty, one), std::invalid_argument);
}

TEST_CASE("gram matrices are exactly symmetric and PSD up to round-off") {
  for (const auto& spec : {KernelSpec::gaussian(0.5), KernelSpec::truncated_mercer(0.5, 200)}) {
    const Matrix x = random_points(16, 11);
    const Matrix g = gram_matrix(spec, x, x);
    CHECK((g - g.transpose()).cwiseAbs().maxCoeff() == 0.0);

    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8 * 16);
  }
}

TEST_CASE("truncated mercer gram matches the direct eigen-sum oracle") {
  const double s = 0.5;
  const int T = 300;
  const auto spec = KernelSpec::truncated_mercer(s, T);
  const Matrix x = random_points(12, 3);
  const Matrix x2 = random_points(9, 4);
  const Matrix g = gram_matrix(spec, x, x2);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 9; ++j)
      CHECK(g(i, j) == doctest::Approx(mercer_direct(s, T, x(i, 0), x2(j, 0))).epsilon(1e-12));
}

TEST_CASE("kappa bounds K(x,x) on a dense domain grid") {
  for (const auto& spec : {KernelSpec::gaussian(1.0), KernelSpec::truncated_mercer(0.5, 500),
                           KernelSpec::truncated_mercer(1.0, 200)}) {
    const double kappa_sq = spec.kappa() * spec.kappa();
    for (int i = 0; i <= 10000; ++i) {
      const Vector x = point1(i / 10000.0);
      CHECK(eval_kernel(spec, x, x) <= kappa_sq * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("truncated mercer eigenvalues decrease strictly") {
  const auto spec = KernelSpec::truncated_mercer(0.7, 50);
  for (int t = 2; t <= 50; ++t) CHECK(spec.eigenvalue(t) < spec.eigenvalue(t - 1));
}

TEST_CASE("kernel specs round-trip through JSON") {
  const auto gauss = KernelSpec::gaussian(0.8, Domain::box(2, -1.0, 1.0));
  const auto back = kernel_spec_from_json(kernel_spec_to_json(gauss));
  CHECK(back.variant() == KernelVariant::Gaussian);
  CHECK(back.bandwidth() == doctest::Approx(0.8));
  CHECK(back.domain().dim == 2);

  const auto mercer = KernelSpec::truncated_mercer(0.25, 77);
  const auto back2 = kernel_spec_from_json(kernel_spec_to_json(mercer));
  CHECK(back2.variant() == KernelVariant::TruncatedMercer);
  CHECK(back2.s_param() == doctest::Approx(0.25));
  CHECK(back2.truncation() == 77);
}
