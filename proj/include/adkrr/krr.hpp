#pragma once

#include "adkrr/kernel.hpp"
#include "adkrr/types.hpp"

#include <vector>

namespace adkrr {

/// One agent's private sample: inputs X (one point per row) and labels y.
struct LocalDataset {
  Matrix X;
  Vector y;
  int n() const { return static_cast<int>(y.size()); }
};

/// Regularization grid lambda_k = 1/(k b), k = 1..k_cap, b >= 1.
struct Ladder {
  double b = 1.0;
  int k_cap = 0;

  double lambda(int k) const;
  std::vector<double> lambdas() const;
};

double lambda_at(double b, int k);

/// max{(kappa^2+1)/3, 2 sqrt(kappa^2+1)}
double c1_star(double kappa);

/// 4 b^2 (1 + 576 Gamma(5) (kappa M + gamma)^2 (sqrt(2)+4)^2), Gamma(5) = 24.
double c_lp(double b, double kappa, double M, double gamma);

enum class CapMode { Theoretical, Practical };

/// Ladder cap floor(n / (16 b C1*^2 ln^3(16 n))). The theoretical value is
/// routinely 0 at desk scale; practical mode clamps it up to k_min.
int ladder_cap(long n, double b, double kappa, CapMode mode, int k_min = 0);

enum class MuMode { Theoretical, Scaled };

/// 48 b C1* ln(1 + 8 kappa n) / n, optionally scaled by a factor in (0,1].
double mu_for_agent(long n, double b, double kappa, MuMode mode, double factor = 1.0);

/// Coefficients of the ridge estimate: (gram + lambda n I) a = y.
Vector solve_krr(const Matrix& gram, const Vector& y, double lambda);

/// sum_i coeffs_i K(support_i, x)
double predict_krr(const Vector& coeffs, const KernelSpec& spec, const Matrix& support,
                   const Vector& x);
Vector predict_krr(const Vector& coeffs, const KernelSpec& spec, const Matrix& support,
                   const Matrix& queries);

/// Tr[(lambda n I + gram)^{-1} gram]
double empirical_effective_dimension(const Matrix& gram, double lambda);
double effective_dimension_from_eigs(const Vector& gram_eigs, double lambda);

/// Computable noise proxy
///   1/(n sqrt(lambda)) + (1 + 1/sqrt(lambda n)) sqrt(max{n_eff, 1} / n).
double w_quantity(long n, double lambda, double n_eff);

/// All coefficient vectors along one agent's ladder plus per-step effective
/// dimensions, W values and successive-difference data, solved through a
/// single eigendecomposition of the Gram matrix.
class LocalModelSet {
 public:
  static LocalModelSet fit(const Matrix& gram, const Vector& y, const Ladder& ladder);

  const Ladder& ladder() const { return ladder_; }
  int n() const { return static_cast<int>(coeffs_.rows()); }

  Vector coefficients(int k) const;
  const Matrix& coefficient_matrix() const { return coeffs_; }

  double effective_dimension(int k) const;
  double w_value(int k) const;

  /// g_k = f_k - f_{k-1} evaluated at the agent's own inputs; k in [2, k_cap].
  Vector difference_values(int k) const;
  /// ||g_k||_K^2
  double difference_norm_sq(int k) const;
  /// ||f_k||_K^2
  double rkhs_norm_sq(int k) const;

 private:
  LocalModelSet() = default;
  int check_k(int k, int lo) const;

  Ladder ladder_;
  Matrix coeffs_;       // n x k_cap
  Matrix diff_values_;  // n x (k_cap - 1), column k-2
  std::vector<double> eff_dim_;       // index k-1
  std::vector<double> w_;             // index k-1
  std::vector<double> norm_sq_;       // index k-1
  std::vector<double> diff_norm_sq_;  // index k-2
};

}  // namespace adkrr
