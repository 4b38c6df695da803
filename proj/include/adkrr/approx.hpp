#pragma once

#include "adkrr/kernel.hpp"
#include "adkrr/types.hpp"

#include <Eigen/QR>

#include <vector>

namespace adkrr {

/// Shared centers xi_1..xi_L together with their Gram matrix.
struct CenterBasis {
  Matrix centers;  // L x d
  Matrix gram;     // L x L

  int size() const { return static_cast<int>(centers.rows()); }
};

/// Minimizer of (1/n)||C a - t||^2 + mu a^T G a over coefficient vectors a.
Vector fit_local_approx(const Matrix& cross_gram, const Matrix& center_gram,
                        const Vector& targets, double mu);

/// Same minimization, factored once and reused for many target vectors
/// (one ladder difference per step on a fixed center set).
///
/// The normal equations (C^T C / n + mu G) a = C^T t / n are solved through
/// the equivalent stacked least-squares system [C/sqrt(n); sqrt(mu) R] with
/// R^T R = G, which keeps the conditioning at the square root of the normal
/// matrix's. A rank-deficient stack falls back to the jittered normal
/// equations (jitter 1e-12 tr(G)/L).
class LocalApproxFitter {
 public:
  LocalApproxFitter(const Matrix& cross_gram, const Matrix& center_gram, double mu);

  Vector fit(const Vector& targets) const;
  bool used_jitter() const { return used_jitter_; }

 private:
  int n_ = 0;
  int basis_ = 0;
  double inv_sqrt_n_ = 0.0;
  Matrix cross_;  // kept for the RHS embedding
  Eigen::HouseholderQR<Matrix> qr_;
  bool used_jitter_ = false;
  Eigen::LDLT<Matrix> normal_;  // jitter fallback
};

/// sum_l coeffs_l K(xi_l, x)
double evaluate_basis(const Vector& coeffs, const KernelSpec& spec, const Matrix& centers,
                      const Vector& x);
Vector evaluate_basis(const Vector& coeffs, const KernelSpec& spec, const Matrix& centers,
                      const Matrix& queries);

/// ||g||_{D}^2 + lambda ||g||_K^2 for g = sum_l coeffs_l K(xi_l, .), i.e.
/// the computable square of ||(L_{K,D} + lambda I)^{1/2} g||_K. The data
/// enters through cross_gram (K(x_i, xi_l), n x L).
double seminorm_sq(const Vector& coeffs, const Matrix& cross_gram, const Matrix& center_gram,
                   double lambda);

/// One agent's contribution to the synthesis: coefficient rows for the ladder
/// differences k = 2..K* and the matching W values, plus the sample count.
struct AgentUpload {
  Matrix coeffs;  // (K*-1) x L, row k-2
  Vector w;       // (K*-1), entry k-2
  long n = 0;
};

/// Size-weighted average of the uploads: coefficient rows combine with
/// weights n_j/|D|, W values combine as sum_j (n_j/|D|)^2 W_jk^2.
struct GlobalApprox {
  Matrix coeffs;  // (K*-1) x L
  Vector w_bar;   // (K*-1)
  int k_cap = 0;

  Vector row(int k) const;
  double w_bar_at(int k) const;
};

GlobalApprox synthesize_global(const std::vector<AgentUpload>& uploads, long total);

}  // namespace adkrr
