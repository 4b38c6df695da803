#include "adkrr/approx.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace adkrr {

namespace {

void check_fit_shapes(const Matrix& cross_gram, const Matrix& center_gram, double mu) {
  if (center_gram.rows() != center_gram.cols())
    throw std::invalid_argument("fit_local_approx: center gram must be square");
  if (cross_gram.cols() != center_gram.rows())
    throw std::invalid_argument("fit_local_approx: cross gram / center gram shape mismatch");
  if (cross_gram.rows() < 1) throw std::invalid_argument("fit_local_approx: empty data");
  if (!(mu > 0.0)) throw std::invalid_argument("fit_local_approx: mu must be positive");
}

// R with R^T R = G for a PSD G, via pivoted LDLT with negative pivots clamped.
Matrix psd_sqrt_factor(const Matrix& g) {
  Eigen::LDLT<Matrix> ldlt(g);
  Matrix lower = ldlt.matrixL();
  Vector d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  Matrix r = (lower * d.asDiagonal()).transpose();  // R0 with R0^T R0 = L D L^T
  // undo the pivoting: G = P^T (L D L^T) P, so R = R0 P
  return r * ldlt.transpositionsP();
}

}  // namespace

LocalApproxFitter::LocalApproxFitter(const Matrix& cross_gram, const Matrix& center_gram, double mu) {
  check_fit_shapes(cross_gram, center_gram, mu);
  n_ = static_cast<int>(cross_gram.rows());
  basis_ = static_cast<int>(center_gram.rows());
  inv_sqrt_n_ = 1.0 / std::sqrt(static_cast<double>(n_));
  cross_ = cross_gram;

  Matrix stacked(n_ + basis_, basis_);
  stacked.topRows(n_) = cross_gram * inv_sqrt_n_;
  stacked.bottomRows(basis_) = std::sqrt(mu) * psd_sqrt_factor(center_gram);
  qr_.compute(stacked);

  const Vector diag = qr_.matrixQR().diagonal().head(basis_).cwiseAbs();
  const double tol = 1e-13 * static_cast<double>(basis_) * diag.maxCoeff();
  if (!(diag.minCoeff() > tol)) {
    used_jitter_ = true;
    const double jitter = 1e-12 * center_gram.trace() / static_cast<double>(basis_);
    Matrix normal = cross_gram.transpose() * cross_gram / static_cast<double>(n_) + mu * center_gram;
    normal.diagonal().array() += jitter;
    normal_.compute(normal);
    if (normal_.info() != Eigen::Success)
      throw std::runtime_error("fit_local_approx: normal matrix singular even after jitter");
  }
}

Vector LocalApproxFitter::fit(const Vector& targets) const {
  if (targets.size() != n_) throw std::invalid_argument("fit_local_approx: target length mismatch");
  Vector a;
  if (used_jitter_) {
    a = normal_.solve(cross_.transpose() * targets / static_cast<double>(n_));
  } else {
    Vector rhs = Vector::Zero(n_ + basis_);
    rhs.head(n_) = targets * inv_sqrt_n_;
    a = qr_.solve(rhs);
  }
  if (!a.allFinite()) throw std::runtime_error("fit_local_approx: non-finite solution");
  return a;
}

Vector fit_local_approx(const Matrix& cross_gram, const Matrix& center_gram,
                        const Vector& targets, double mu) {
  return LocalApproxFitter(cross_gram, center_gram, mu).fit(targets);
}

double evaluate_basis(const Vector& coeffs, const KernelSpec& spec, const Matrix& centers,
                      const Vector& x) {
  if (coeffs.size() != centers.rows())
    throw std::invalid_argument("evaluate_basis: coefficient/center length mismatch");
  Matrix q(1, x.size());
  q.row(0) = x.transpose();
  return (gram_matrix(spec, q, centers) * coeffs)(0);
}

Vector evaluate_basis(const Vector& coeffs, const KernelSpec& spec, const Matrix& centers,
                      const Matrix& queries) {
  if (coeffs.size() != centers.rows())
    throw std::invalid_argument("evaluate_basis: coefficient/center length mismatch");
  return gram_matrix(spec, queries, centers) * coeffs;
}

double seminorm_sq(const Vector& coeffs, const Matrix& cross_gram, const Matrix& center_gram,
                   double lambda) {
  if (coeffs.size() != cross_gram.cols() || cross_gram.cols() != center_gram.rows() ||
      center_gram.rows() != center_gram.cols())
    throw std::invalid_argument("seminorm_sq: shape mismatch");
  if (!(lambda > 0.0)) throw std::invalid_argument("seminorm_sq: lambda must be positive");
  const double n = static_cast<double>(cross_gram.rows());
  const double data_part = (cross_gram * coeffs).squaredNorm() / n;
  const double rkhs_part = coeffs.dot(center_gram * coeffs);
  return data_part + lambda * rkhs_part;
}

Vector GlobalApprox::row(int k) const {
  if (k < 2 || k > k_cap) throw std::invalid_argument("GlobalApprox::row: k out of range");
  return coeffs.row(k - 2).transpose();
}

double GlobalApprox::w_bar_at(int k) const {
  if (k < 2 || k > k_cap) throw std::invalid_argument("GlobalApprox::w_bar_at: k out of range");
  return w_bar[k - 2];
}

GlobalApprox synthesize_global(const std::vector<AgentUpload>& uploads, long total) {
  if (uploads.empty()) throw std::invalid_argument("synthesize_global: no uploads");
  const auto rows = uploads.front().coeffs.rows();
  const auto cols = uploads.front().coeffs.cols();
  long sum_n = 0;
  for (const auto& u : uploads) {
    if (u.coeffs.rows() != rows || u.coeffs.cols() != cols || u.w.size() != rows)
      throw std::invalid_argument("synthesize_global: upload shape mismatch");
    if (u.n < 1) throw std::invalid_argument("synthesize_global: agent size must be >= 1");
    sum_n += u.n;
  }
  if (sum_n != total) throw std::invalid_argument("synthesize_global: agent sizes do not sum to |D|");

  GlobalApprox g;
  g.k_cap = static_cast<int>(rows) + 1;
  g.coeffs = Matrix::Zero(rows, cols);
  g.w_bar = Vector::Zero(rows);
  for (const auto& u : uploads) {
    const double w = static_cast<double>(u.n) / static_cast<double>(total);
    g.coeffs += w * u.coeffs;
    g.w_bar += (w * w) * u.w.cwiseAbs2();
  }
  return g;
}

}  // namespace adkrr
