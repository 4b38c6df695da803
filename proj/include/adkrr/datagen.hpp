#pragma once

#include "adkrr/kernel.hpp"
#include "adkrr/krr.hpp"

#include <json.hpp>

#include <utility>
#include <vector>

namespace adkrr {

/// Synthetic regression target f_rho(x) = sum_t sigma_t^r h_t phi_t(x) on
/// [0,1], with sigma_t = t^(-1/s), phi_t(x) = sqrt(2) cos(t pi x) and seeded
/// coefficients h_t = (+/-1)/t. The regularity index r and eigen-decay index
/// s are exact by construction, so every population quantity below is in
/// closed form.
class RegressionSpec {
 public:
  static RegressionSpec make(double r, double s_param, int truncation, uint64_t seed);

  double r() const { return r_; }
  double s_param() const { return s_param_; }
  int truncation() const { return truncation_; }
  uint64_t seed() const { return seed_; }
  const Vector& h() const { return h_; }

  double sigma(int t) const;
  double f_rho_at(double x) const;
  Vector f_rho(const Eigen::Ref<const Matrix>& X) const;

  /// sum_t sigma_t / (sigma_t + lambda)
  double population_effective_dimension(double lambda) const;
  /// max over a 20-point lambda grid of N(lambda) lambda^s
  double c0_bound() const;
  /// ||f_rho||_rho^2 = sum sigma^{2r} h^2
  double rho_norm_sq() const;
  /// ||f_rho||_K^2 = sum sigma^{2r-1} h^2
  double rkhs_norm_sq() const;

 private:
  RegressionSpec() = default;

  double r_ = 0.5;
  double s_param_ = 0.5;
  int truncation_ = 1000;
  uint64_t seed_ = 0;
  Vector h_;
};

/// Conditional noise model; both variants satisfy the Bernstein-type moment
/// bound with the recorded (M, gamma). Bounded noise |eps| <= M' gives
/// gamma/2 = M = M'.
struct NoiseSpec {
  enum class Kind { UniformBounded, Gaussian };

  Kind kind = Kind::UniformBounded;
  double param = 0.0;  // M' or sigma

  static NoiseSpec uniform_bounded(double m_prime);
  static NoiseSpec gaussian(double sigma);

  double M() const { return param; }
  double gamma() const { return kind == Kind::UniformBounded ? 2.0 * param : param; }
  bool noiseless() const { return param == 0.0; }
};

/// x_i iid uniform on [0,1], y_i = f_rho(x_i) + eps_i; bit-deterministic
/// under the seed.
LocalDataset sample_dataset(const RegressionSpec& spec, const NoiseSpec& noise, int n,
                            uint64_t seed);

struct PartitionScheme {
  enum class Kind { Equal, Proportional };
  Kind kind = Kind::Equal;
  std::vector<double> weights;

  static PartitionScheme equal() { return {}; }
  static PartitionScheme proportional(std::vector<double> w);
};

struct Partition {
  std::vector<int> sizes;
  /// set when some agent falls below the |D|^{1/(2r+s)} size qualification
  bool size_warning = false;
};

Partition partition(long n_total, int m, const PartitionScheme& scheme, double r, double s);

/// Contiguous split of one dataset by the given sizes; blocks are disjoint.
std::vector<LocalDataset> split_dataset(const LocalDataset& data, const std::vector<int>& sizes);

/// An estimate expressed as a finite kernel expansion sum_p c_p K(z_p, .).
struct KernelExpansion {
  Matrix points;  // P x d
  Vector coeffs;  // P
};

struct ErrorPair {
  double rho_sq = 0.0;
  double k_sq = 0.0;
};

/// Exact population errors of (estimate - f_rho) in the rho and RKHS norms,
/// via the shared eigenbasis. The kernel must be the truncated Mercer
/// variant matching the regression spec.
ErrorPair true_errors(const KernelExpansion& estimate, const KernelSpec& kernel,
                      const RegressionSpec& spec);

/// Same errors from a precomputed eigenbasis image u_t = sum_p c_p phi_t(z_p).
ErrorPair true_errors_from_basis_image(const Vector& u, const RegressionSpec& spec);

/// Ridge coefficients trained on (X, f_rho(X)) instead of (X, y); only
/// computable in simulation where f_rho is known.
Vector noise_free_krr(const LocalDataset& data, const KernelSpec& kernel,
                      const RegressionSpec& spec, double lambda);

struct Lemma1Report {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  double slack = 0.0;
  int reps = 0;
  bool passed = false;
};

/// Monte-Carlo check of the error decomposition
///   E||fbar - f_rho||^2 <= sum (n_j/n)^2 E||f_j - f_rho||^2
///                        + sum (n_j/n)   E||f*_j - f_rho||^2
/// in the rho norm, where f*_j is the noise-free ridge estimate. Asserts
/// LHS <= RHS (1 + 3/sqrt(reps)).
Lemma1Report lemma1_diagnostic(const RegressionSpec& spec, const NoiseSpec& noise,
                               const KernelSpec& kernel, const std::vector<int>& sizes,
                               double lambda, int reps, uint64_t seed, int workers = 0);

nlohmann::json regression_spec_to_json(const RegressionSpec& spec);
RegressionSpec regression_spec_from_json(const nlohmann::json& j);
nlohmann::json noise_spec_to_json(const NoiseSpec& spec);
NoiseSpec noise_spec_from_json(const nlohmann::json& j);

}  // namespace adkrr
