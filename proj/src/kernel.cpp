#include "adkrr/kernel.hpp"

#include <cmath>

namespace adkrr {

bool Domain::contains(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != dim) return false;
  for (int i = 0; i < dim; ++i) {
    if (!(x[i] >= lo && x[i] <= hi)) return false;
  }
  return true;
}

KernelSpec KernelSpec::gaussian(double bandwidth, Domain domain) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("gaussian kernel: bandwidth must be positive");
  if (!(domain.hi > domain.lo) || domain.dim < 1)
    throw std::invalid_argument("gaussian kernel: invalid domain box");
  KernelSpec spec;
  spec.variant_ = KernelVariant::Gaussian;
  spec.bandwidth_ = bandwidth;
  spec.kappa_ = 1.0;  // K(x,x) = 1
  spec.domain_ = domain;
  return spec;
}

KernelSpec KernelSpec::truncated_mercer(double s_param, int truncation) {
  if (!(s_param > 0.0 && s_param <= 1.0))
    throw std::invalid_argument("truncated mercer kernel: s_param must lie in (0,1]");
  if (truncation < 1)
    throw std::invalid_argument("truncated mercer kernel: truncation must be >= 1");
  KernelSpec spec;
  spec.variant_ = KernelVariant::TruncatedMercer;
  spec.s_param_ = s_param;
  spec.truncation_ = truncation;
  spec.domain_ = Domain::unit_interval();
  // sup_x K(x,x) is attained at x = 0 where every cos factor equals 1,
  // so kappa^2 = 2 * sum_t sigma_t exactly.
  double trace = 0.0;
  for (int t = 1; t <= truncation; ++t) trace += std::pow(static_cast<double>(t), -1.0 / s_param);
  spec.kappa_ = std::sqrt(2.0 * trace);
  return spec;
}

double KernelSpec::eigenvalue(int t) const {
  if (variant_ != KernelVariant::TruncatedMercer)
    throw std::invalid_argument("eigenvalue: only the truncated Mercer variant has known eigenpairs");
  if (t < 1 || t > truncation_) throw std::invalid_argument("eigenvalue: index out of range");
  return std::pow(static_cast<double>(t), -1.0 / s_param_);
}

namespace {

void check_in_domain(const KernelSpec& spec, const Eigen::Ref<const Vector>& x) {
  if (!spec.domain().contains(x)) throw std::domain_error("kernel: point outside the declared domain");
}

void check_points_in_domain(const KernelSpec& spec, const Eigen::Ref<const Matrix>& X) {
  if (X.cols() != spec.domain().dim)
    throw std::domain_error("kernel: point dimension does not match the domain");
  const double lo = spec.domain().lo, hi = spec.domain().hi;
  if (X.size() > 0 && (X.minCoeff() < lo || X.maxCoeff() > hi))
    throw std::domain_error("kernel: point outside the declared domain");
}

// sigma_t^{1/2}-weighted eigenfeatures; Gram matrices are products of these.
Matrix scaled_features(const KernelSpec& spec, const Eigen::Ref<const Vector>& x) {
  Matrix f = mercer_features(spec.truncation(), x);
  for (int t = 1; t <= spec.truncation(); ++t) f.row(t - 1) *= std::sqrt(spec.eigenvalue(t));
  return f;
}

}  // namespace

Matrix mercer_features(int truncation, const Eigen::Ref<const Vector>& x) {
  Matrix f(truncation, x.size());
  const double sqrt2 = std::sqrt(2.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double base = M_PI * x[i];
    for (int t = 1; t <= truncation; ++t) f(t - 1, i) = sqrt2 * std::cos(t * base);
  }
  return f;
}

double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& x2) {
  check_in_domain(spec, x);
  check_in_domain(spec, x2);
  switch (spec.variant()) {
    case KernelVariant::Gaussian: {
      const double d2 = (x - x2).squaredNorm();
      return std::exp(-d2 / (2.0 * spec.bandwidth() * spec.bandwidth()));
    }
    case KernelVariant::TruncatedMercer: {
      double sum = 0.0;
      for (int t = 1; t <= spec.truncation(); ++t) {
        const double ct = 2.0 * std::cos(t * M_PI * x[0]) * std::cos(t * M_PI * x2[0]);
        sum += spec.eigenvalue(t) * ct;
      }
      return sum;
    }
  }
  throw std::logic_error("eval_kernel: unknown variant");
}

Matrix gram_matrix(const KernelSpec& spec, const Eigen::Ref<const Matrix>& X,
                   const Eigen::Ref<const Matrix>& X2) {
  if (X.rows() == 0 || X2.rows() == 0)
    throw std::invalid_argument("gram_matrix: point lists must be non-empty");
  check_points_in_domain(spec, X);
  check_points_in_domain(spec, X2);

  switch (spec.variant()) {
    case KernelVariant::Gaussian: {
      Matrix g(X.rows(), X2.rows());
      const double inv = 1.0 / (2.0 * spec.bandwidth() * spec.bandwidth());
      for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X2.rows(); ++j)
          g(i, j) = std::exp(-(X.row(i) - X2.row(j)).squaredNorm() * inv);
      return g;
    }
    case KernelVariant::TruncatedMercer: {
      // K = F1^T F2 with F the sigma^{1/2}-weighted eigenfeature matrices.
      const Matrix f1 = scaled_features(spec, X.col(0));
      if (X.data() == X2.data() && X.rows() == X2.rows()) {
        Matrix g = f1.transpose() * f1;
        return g;
      }
      const Matrix f2 = scaled_features(spec, X2.col(0));
      return f1.transpose() * f2;
    }
  }
  throw std::logic_error("gram_matrix: unknown variant");
}

nlohmann::json kernel_spec_to_json(const KernelSpec& spec) {
  nlohmann::json j;
  switch (spec.variant()) {
    case KernelVariant::Gaussian:
      j["variant"] = "gaussian";
      j["bandwidth"] = spec.bandwidth();
      j["domain"] = {{"dim", spec.domain().dim}, {"lo", spec.domain().lo}, {"hi", spec.domain().hi}};
      break;
    case KernelVariant::TruncatedMercer:
      j["variant"] = "truncated_mercer";
      j["s_param"] = spec.s_param();
      j["truncation"] = spec.truncation();
      break;
  }
  return j;
}

KernelSpec kernel_spec_from_json(const nlohmann::json& j) {
  const std::string variant = j.at("variant").get<std::string>();
  if (variant == "gaussian") {
    Domain dom = Domain::unit_interval();
    if (j.contains("domain")) {
      dom.dim = j["domain"].value("dim", 1);
      dom.lo = j["domain"].value("lo", 0.0);
      dom.hi = j["domain"].value("hi", 1.0);
    }
    return KernelSpec::gaussian(j.at("bandwidth").get<double>(), dom);
  }
  if (variant == "truncated_mercer") {
    return KernelSpec::truncated_mercer(j.at("s_param").get<double>(), j.value("truncation", 1000));
  }
  throw std::invalid_argument("kernel_spec_from_json: unknown variant '" + variant + "'");
}

}  // namespace adkrr
