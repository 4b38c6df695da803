#include "adkrr/krr.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace adkrr {

double Ladder::lambda(int k) const {
  if (k < 1 || k > k_cap) throw std::invalid_argument("Ladder::lambda: k out of range");
  return lambda_at(b, k);
}

std::vector<double> Ladder::lambdas() const {
  std::vector<double> out(k_cap);
  for (int k = 1; k <= k_cap; ++k) out[k - 1] = lambda_at(b, k);
  return out;
}

double lambda_at(double b, int k) {
  if (!(b >= 1.0)) throw std::invalid_argument("lambda_at: b must be >= 1");
  if (k < 1) throw std::invalid_argument("lambda_at: k must be >= 1");
  return 1.0 / (static_cast<double>(k) * b);
}

double c1_star(double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("c1_star: kappa must be positive");
  const double k2p1 = kappa * kappa + 1.0;
  return std::max(k2p1 / 3.0, 2.0 * std::sqrt(k2p1));
}

double c_lp(double b, double kappa, double M, double gamma) {
  if (!(b >= 1.0)) throw std::invalid_argument("c_lp: b must be >= 1");
  if (!(kappa > 0.0 && M > 0.0 && gamma > 0.0))
    throw std::invalid_argument("c_lp: kappa, M, gamma must be positive");
  constexpr double gamma5 = 24.0;  // Gamma(5) = 4!
  const double km = kappa * M + gamma;
  const double s = std::sqrt(2.0) + 4.0;
  return 4.0 * b * b * (1.0 + 576.0 * gamma5 * km * km * s * s);
}

int ladder_cap(long n, double b, double kappa, CapMode mode, int k_min) {
  if (n < 1) throw std::invalid_argument("ladder_cap: n must be >= 1");
  const double c1 = c1_star(kappa);
  const double logn = std::log(16.0 * static_cast<double>(n));
  const double theoretical = static_cast<double>(n) / (16.0 * b * c1 * c1 * logn * logn * logn);
  const int cap = static_cast<int>(std::floor(theoretical));
  if (mode == CapMode::Theoretical) return cap;
  return std::max(cap, k_min);
}

double mu_for_agent(long n, double b, double kappa, MuMode mode, double factor) {
  if (n < 1) throw std::invalid_argument("mu_for_agent: n must be >= 1");
  const double mu = 48.0 * b * c1_star(kappa) * std::log1p(8.0 * kappa * static_cast<double>(n)) /
                    static_cast<double>(n);
  if (mode == MuMode::Theoretical) return mu;
  if (!(factor > 0.0 && factor <= 1.0))
    throw std::invalid_argument("mu_for_agent: scale factor must lie in (0,1]");
  return mu * factor;
}

namespace {

void check_square_symmetric(const Matrix& gram, const char* who) {
  if (gram.rows() != gram.cols()) throw std::invalid_argument(std::string(who) + ": gram must be square");
  const double scale = std::max(1.0, gram.cwiseAbs().maxCoeff());
  if ((gram - gram.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::invalid_argument(std::string(who) + ": gram must be symmetric");
}

}  // namespace

Vector solve_krr(const Matrix& gram, const Vector& y, double lambda) {
  check_square_symmetric(gram, "solve_krr");
  if (gram.rows() != y.size()) throw std::invalid_argument("solve_krr: gram/y size mismatch");
  if (!(lambda > 0.0)) throw std::invalid_argument("solve_krr: lambda must be positive");

  const auto n = gram.rows();
  Matrix system = gram;
  system.diagonal().array() += lambda * static_cast<double>(n);
  Eigen::LLT<Matrix> llt(system);
  if (llt.info() == Eigen::Success) {
    Vector a = llt.solve(y);
    if (a.allFinite()) return a;
  }
  // lambda n > 0 makes the system SPD, so LLT should not fail; LDLT covers
  // borderline indefiniteness from round-off.
  Eigen::LDLT<Matrix> ldlt(system);
  Vector a = ldlt.solve(y);
  if (ldlt.info() != Eigen::Success || !a.allFinite())
    throw std::runtime_error("solve_krr: factorization of (gram + lambda n I) failed");
  return a;
}

double predict_krr(const Vector& coeffs, const KernelSpec& spec, const Matrix& support,
                   const Vector& x) {
  if (coeffs.size() != support.rows())
    throw std::invalid_argument("predict_krr: coefficient/support length mismatch");
  Matrix q(1, x.size());
  q.row(0) = x.transpose();
  return (gram_matrix(spec, support, q).transpose() * coeffs)(0);
}

Vector predict_krr(const Vector& coeffs, const KernelSpec& spec, const Matrix& support,
                   const Matrix& queries) {
  if (coeffs.size() != support.rows())
    throw std::invalid_argument("predict_krr: coefficient/support length mismatch");
  return gram_matrix(spec, queries, support) * coeffs;
}

double empirical_effective_dimension(const Matrix& gram, double lambda) {
  check_square_symmetric(gram, "empirical_effective_dimension");
  if (!(lambda > 0.0)) throw std::invalid_argument("empirical_effective_dimension: lambda must be positive");
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return effective_dimension_from_eigs(es.eigenvalues(), lambda);
}

double effective_dimension_from_eigs(const Vector& gram_eigs, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("effective_dimension_from_eigs: lambda must be positive");
  const double ln = lambda * static_cast<double>(gram_eigs.size());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < gram_eigs.size(); ++i) {
    const double s = std::max(gram_eigs[i], 0.0);
    sum += s / (ln + s);
  }
  return sum;
}

double w_quantity(long n, double lambda, double n_eff) {
  if (n < 1) throw std::invalid_argument("w_quantity: n must be >= 1");
  if (!(lambda > 0.0)) throw std::invalid_argument("w_quantity: lambda must be positive");
  if (n_eff < 0.0) throw std::invalid_argument("w_quantity: n_eff must be >= 0");
  const double nn = static_cast<double>(n);
  return 1.0 / (nn * std::sqrt(lambda)) +
         (1.0 + 1.0 / std::sqrt(lambda * nn)) * std::sqrt(std::max(n_eff, 1.0) / nn);
}

LocalModelSet LocalModelSet::fit(const Matrix& gram, const Vector& y, const Ladder& ladder) {
  check_square_symmetric(gram, "LocalModelSet::fit");
  if (gram.rows() != y.size()) throw std::invalid_argument("LocalModelSet::fit: gram/y size mismatch");
  if (ladder.k_cap < 1) throw std::invalid_argument("LocalModelSet::fit: ladder cap must be >= 1");

  const auto n = gram.rows();
  const int cap = ladder.k_cap;

  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("LocalModelSet::fit: eigendecomposition of the gram matrix failed");
  const Vector eig = es.eigenvalues().cwiseMax(0.0);
  const Matrix& q = es.eigenvectors();
  const Vector y_rot = q.transpose() * y;

  LocalModelSet out;
  out.ladder_ = ladder;
  out.eff_dim_.resize(cap);
  out.w_.resize(cap);
  out.norm_sq_.resize(cap);
  out.diff_norm_sq_.assign(cap > 1 ? cap - 1 : 0, 0.0);

  // rotated coefficients a~_k = y~ / (eig + lambda_k n)
  Matrix rot(n, cap);
  for (int k = 1; k <= cap; ++k) {
    const double shift = ladder.lambda(k) * static_cast<double>(n);
    rot.col(k - 1) = y_rot.array() / (eig.array() + shift);
    out.eff_dim_[k - 1] = effective_dimension_from_eigs(eig, ladder.lambda(k));
    out.w_[k - 1] = w_quantity(n, ladder.lambda(k), out.eff_dim_[k - 1]);
    out.norm_sq_[k - 1] = (eig.array() * rot.col(k - 1).array().square()).sum();
  }
  out.coeffs_ = q * rot;

  if (cap > 1) {
    Matrix rot_diff(n, cap - 1);
    for (int k = 2; k <= cap; ++k) {
      const Vector d = rot.col(k - 1) - rot.col(k - 2);
      out.diff_norm_sq_[k - 2] = (eig.array() * d.array().square()).sum();
      rot_diff.col(k - 2) = eig.asDiagonal() * d;
    }
    out.diff_values_ = q * rot_diff;  // gram * (a_k - a_{k-1})
  }
  return out;
}

int LocalModelSet::check_k(int k, int lo) const {
  if (k < lo || k > ladder_.k_cap) throw std::invalid_argument("LocalModelSet: ladder index out of range");
  return k;
}

Vector LocalModelSet::coefficients(int k) const { return coeffs_.col(check_k(k, 1) - 1); }

double LocalModelSet::effective_dimension(int k) const { return eff_dim_[check_k(k, 1) - 1]; }

double LocalModelSet::w_value(int k) const { return w_[check_k(k, 1) - 1]; }

Vector LocalModelSet::difference_values(int k) const { return diff_values_.col(check_k(k, 2) - 2); }

double LocalModelSet::difference_norm_sq(int k) const { return diff_norm_sq_[check_k(k, 2) - 2]; }

double LocalModelSet::rkhs_norm_sq(int k) const { return norm_sq_[check_k(k, 1) - 1]; }

}  // namespace adkrr
