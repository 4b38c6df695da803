#pragma once

// Test-only oracles, kept independent of the library's computation paths.

#include "adkrr/kernel.hpp"
#include "adkrr/types.hpp"

#include <Eigen/Eigenvalues>

namespace adkrr::testing {

inline Matrix random_points(int n, uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = rng.uniform01();
  return x;
}

// Finite-span operator oracle for ||(L_{K,D} + lambda I)^{1/2} g||_K^2 with
// g = sum_l coeffs_l K_{xi_l}.
//
// Everything is represented in the span of {K_z : z in X u Centers}: the
// empirical operator L_{K,D} c = (1/n) sum_i g(x_i) K_{x_i} becomes a matrix
// on coefficient vectors, coordinates are orthonormalized through the matrix
// square root of the full Gram, and the square-root operator is evaluated by
// eigendecomposition. No code is shared with seminorm_sq.
inline double operator_seminorm_oracle(const KernelSpec& spec, const Matrix& X,
                                       const Matrix& centers, const Vector& coeffs,
                                       double lambda) {
  const int n = static_cast<int>(X.rows());
  const int L = static_cast<int>(centers.rows());
  const int q = n + L;
  Matrix Z(q, X.cols());
  Z.topRows(n) = X;
  Z.bottomRows(L) = centers;

  const Matrix kzz = gram_matrix(spec, Z, Z);
  Vector c = Vector::Zero(q);
  c.tail(L) = coeffs;

  Matrix op = Matrix::Zero(q, q);
  op.topRows(n) = kzz.topRows(n) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Matrix> es(kzz);
  const Vector eig = es.eigenvalues().cwiseMax(0.0);
  const Matrix& U = es.eigenvectors();
  const double tol = 1e-12 * eig.maxCoeff() * q;
  Vector sqrt_eig(q), inv_sqrt_eig(q);
  for (int i = 0; i < q; ++i) {
    sqrt_eig[i] = std::sqrt(eig[i]);
    inv_sqrt_eig[i] = eig[i] > tol ? 1.0 / sqrt_eig[i] : 0.0;
  }
  const Matrix B = U * sqrt_eig.asDiagonal() * U.transpose();
  const Matrix B_pinv = U * inv_sqrt_eig.asDiagonal() * U.transpose();

  Matrix S = B * op * B_pinv;
  S = ((S + S.transpose()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es2(S);
  const Vector op_eig = es2.eigenvalues().cwiseMax(0.0);
  const Vector u = es2.eigenvectors().transpose() * (B * c);

  double total = 0.0;
  for (int i = 0; i < q; ++i) total += (op_eig[i] + lambda) * u[i] * u[i];
  return total;
}

}  // namespace adkrr::testing
