#pragma once

#include "adkrr/types.hpp"

#include <json.hpp>

namespace adkrr {

enum class KernelVariant { Gaussian, TruncatedMercer };

/// Axis-aligned box the inputs live in.
struct Domain {
  int dim = 1;
  double lo = 0.0;
  double hi = 1.0;

  bool contains(const Eigen::Ref<const Vector>& x) const;
  static Domain unit_interval() { return Domain{1, 0.0, 1.0}; }
  static Domain box(int dim, double lo, double hi) { return Domain{dim, lo, hi}; }
};

/// A Mercer kernel together with its bound kappa = sup_x sqrt(K(x,x)).
///
/// Two variants: the Gaussian kernel on a bounded box, and a truncated Mercer
/// expansion on [0,1] with eigenfunctions phi_t(x) = sqrt(2) cos(t pi x) and
/// eigenvalues sigma_t = t^(-1/s). The latter makes every population quantity
/// computable in closed form, which is what the synthetic ground-truth checks
/// rely on.
class KernelSpec {
 public:
  static KernelSpec gaussian(double bandwidth, Domain domain = Domain::unit_interval());
  static KernelSpec truncated_mercer(double s_param, int truncation = 1000);

  KernelVariant variant() const { return variant_; }
  double bandwidth() const { return bandwidth_; }
  double s_param() const { return s_param_; }
  int truncation() const { return truncation_; }
  double kappa() const { return kappa_; }
  const Domain& domain() const { return domain_; }

  /// sigma_t = t^(-1/s), 1-based; truncated-Mercer variant only.
  double eigenvalue(int t) const;

 private:
  KernelSpec() = default;

  KernelVariant variant_ = KernelVariant::Gaussian;
  double bandwidth_ = 1.0;
  double s_param_ = 0.0;
  int truncation_ = 0;
  double kappa_ = 1.0;
  Domain domain_ = Domain::unit_interval();
};

/// Pointwise K(x, x2). Throws std::domain_error if a point leaves the domain.
double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& x2);

/// |X| x |X2| matrix of kernel values; rows of X/X2 are points.
Matrix gram_matrix(const KernelSpec& spec, const Eigen::Ref<const Matrix>& X,
                   const Eigen::Ref<const Matrix>& X2);

/// Eigenfunction features phi_t(x_i) = sqrt(2) cos(t pi x_i), shape T x |x|.
Matrix mercer_features(int truncation, const Eigen::Ref<const Vector>& x);

nlohmann::json kernel_spec_to_json(const KernelSpec& spec);
KernelSpec kernel_spec_from_json(const nlohmann::json& j);

}  // namespace adkrr
