#include "adkrr/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace adkrr {

RegressionSpec RegressionSpec::make(double r, double s_param, int truncation, uint64_t seed) {
  if (!(r >= 0.5 && r <= 1.0)) throw std::invalid_argument("RegressionSpec: r must lie in [1/2, 1]");
  if (!(s_param > 0.0 && s_param <= 1.0))
    throw std::invalid_argument("RegressionSpec: s_param must lie in (0, 1]");
  if (truncation < 1) throw std::invalid_argument("RegressionSpec: truncation must be >= 1");

  RegressionSpec spec;
  spec.r_ = r;
  spec.s_param_ = s_param;
  spec.truncation_ = truncation;
  spec.seed_ = seed;
  Rng rng(mix_seed(seed, 0x68636f65ULL));
  spec.h_.resize(truncation);
  for (int t = 1; t <= truncation; ++t) spec.h_[t - 1] = rng.sign() / static_cast<double>(t);
  return spec;
}

double RegressionSpec::sigma(int t) const {
  if (t < 1 || t > truncation_) throw std::invalid_argument("RegressionSpec::sigma: index out of range");
  return std::pow(static_cast<double>(t), -1.0 / s_param_);
}

double RegressionSpec::f_rho_at(double x) const {
  double sum = 0.0;
  const double sqrt2 = std::sqrt(2.0);
  for (int t = 1; t <= truncation_; ++t)
    sum += std::pow(sigma(t), r_) * h_[t - 1] * sqrt2 * std::cos(t * M_PI * x);
  return sum;
}

Vector RegressionSpec::f_rho(const Eigen::Ref<const Matrix>& X) const {
  Vector w(truncation_);
  for (int t = 1; t <= truncation_; ++t) w[t - 1] = std::pow(sigma(t), r_) * h_[t - 1];
  return mercer_features(truncation_, X.col(0)).transpose() * w;
}

double RegressionSpec::population_effective_dimension(double lambda) const {
  if (!(lambda > 0.0))
    throw std::invalid_argument("population_effective_dimension: lambda must be positive");
  double sum = 0.0;
  for (int t = 1; t <= truncation_; ++t) {
    const double s = sigma(t);
    sum += s / (s + lambda);
  }
  return sum;
}

double RegressionSpec::c0_bound() const {
  double c0 = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double lambda = std::pow(10.0, -4.0 + 4.0 * i / 19.0);
    c0 = std::max(c0, population_effective_dimension(lambda) * std::pow(lambda, s_param_));
  }
  return c0;
}

double RegressionSpec::rho_norm_sq() const {
  double sum = 0.0;
  for (int t = 1; t <= truncation_; ++t) sum += std::pow(sigma(t), 2.0 * r_) * h_[t - 1] * h_[t - 1];
  return sum;
}

double RegressionSpec::rkhs_norm_sq() const {
  double sum = 0.0;
  for (int t = 1; t <= truncation_; ++t)
    sum += std::pow(sigma(t), 2.0 * r_ - 1.0) * h_[t - 1] * h_[t - 1];
  return sum;
}

NoiseSpec NoiseSpec::uniform_bounded(double m_prime) {
  if (m_prime < 0.0) throw std::invalid_argument("NoiseSpec: M' must be >= 0");
  return {Kind::UniformBounded, m_prime};
}

NoiseSpec NoiseSpec::gaussian(double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("NoiseSpec: sigma must be >= 0");
  return {Kind::Gaussian, sigma};
}

LocalDataset sample_dataset(const RegressionSpec& spec, const NoiseSpec& noise, int n,
                            uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
  Rng rng(seed);
  LocalDataset data;
  data.X.resize(n, 1);
  for (int i = 0; i < n; ++i) data.X(i, 0) = rng.uniform01();
  data.y = spec.f_rho(data.X);
  if (!noise.noiseless()) {
    for (int i = 0; i < n; ++i) {
      const double eps = noise.kind == NoiseSpec::Kind::UniformBounded
                             ? rng.uniform(-noise.param, noise.param)
                             : noise.param * rng.gaussian();
      data.y[i] += eps;
    }
  }
  return data;
}

PartitionScheme PartitionScheme::proportional(std::vector<double> w) {
  if (w.empty()) throw std::invalid_argument("PartitionScheme: empty weight list");
  for (double wi : w)
    if (!(wi > 0.0)) throw std::invalid_argument("PartitionScheme: weights must be positive");
  return {Kind::Proportional, std::move(w)};
}

Partition partition(long n_total, int m, const PartitionScheme& scheme, double r, double s) {
  if (m < 1) throw std::invalid_argument("partition: m must be >= 1");
  if (m > n_total) throw std::invalid_argument("partition: more agents than samples");

  Partition out;
  out.sizes.resize(m);
  if (scheme.kind == PartitionScheme::Kind::Equal) {
    const long base = n_total / m;
    const long rem = n_total % m;
    for (int j = 0; j < m; ++j) out.sizes[j] = static_cast<int>(base + (j < rem ? 1 : 0));
  } else {
    if (static_cast<int>(scheme.weights.size()) != m)
      throw std::invalid_argument("partition: weight count must equal m");
    const double total_w = std::accumulate(scheme.weights.begin(), scheme.weights.end(), 0.0);
    std::vector<double> frac(m);
    long assigned = 0;
    for (int j = 0; j < m; ++j) {
      const double ideal = static_cast<double>(n_total) * scheme.weights[j] / total_w;
      out.sizes[j] = static_cast<int>(std::floor(ideal));
      frac[j] = ideal - std::floor(ideal);
      assigned += out.sizes[j];
    }
    // largest-remainder rounding, ties to the lower index
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
    for (long left = n_total - assigned, i = 0; left > 0; --left, ++i) out.sizes[order[i % m]] += 1;
    for (int j = 0; j < m; ++j)
      if (out.sizes[j] < 1) throw std::invalid_argument("partition: weights give an agent zero samples");
  }

  const double qualification = std::pow(static_cast<double>(n_total), 1.0 / (2.0 * r + s));
  for (int j = 0; j < m; ++j)
    if (static_cast<double>(out.sizes[j]) < qualification) out.size_warning = true;
  return out;
}

std::vector<LocalDataset> split_dataset(const LocalDataset& data, const std::vector<int>& sizes) {
  const long total = std::accumulate(sizes.begin(), sizes.end(), 0L);
  if (total != data.n()) throw std::invalid_argument("split_dataset: sizes do not sum to |D|");
  std::vector<LocalDataset> parts;
  parts.reserve(sizes.size());
  long at = 0;
  for (int sz : sizes) {
    if (sz < 1) throw std::invalid_argument("split_dataset: block sizes must be >= 1");
    parts.push_back({data.X.middleRows(at, sz), data.y.segment(at, sz)});
    at += sz;
  }
  return parts;
}

namespace {

void check_expressible(const KernelSpec& kernel, const RegressionSpec& spec) {
  if (kernel.variant() != KernelVariant::TruncatedMercer ||
      kernel.s_param() != spec.s_param() || kernel.truncation() != spec.truncation())
    throw std::invalid_argument(
        "true_errors: estimate not expressible in the regression spec's eigenbasis "
        "(kernel must be the matching truncated Mercer variant)");
}

}  // namespace

ErrorPair true_errors_from_basis_image(const Vector& u, const RegressionSpec& spec) {
  if (u.size() != spec.truncation())
    throw std::invalid_argument("true_errors: basis image length mismatch");
  ErrorPair out;
  for (int t = 1; t <= spec.truncation(); ++t) {
    const double s = spec.sigma(t);
    const double e = s * u[t - 1] - std::pow(s, spec.r()) * spec.h()[t - 1];
    out.rho_sq += e * e;
    out.k_sq += e * e / s;
  }
  return out;
}

ErrorPair true_errors(const KernelExpansion& estimate, const KernelSpec& kernel,
                      const RegressionSpec& spec) {
  check_expressible(kernel, spec);
  if (estimate.points.rows() != estimate.coeffs.size())
    throw std::invalid_argument("true_errors: expansion point/coefficient mismatch");
  if (estimate.points.rows() == 0) return true_errors_from_basis_image(Vector::Zero(spec.truncation()), spec);
  const Vector u = mercer_features(spec.truncation(), estimate.points.col(0)) * estimate.coeffs;
  return true_errors_from_basis_image(u, spec);
}

Vector noise_free_krr(const LocalDataset& data, const KernelSpec& kernel,
                      const RegressionSpec& spec, double lambda) {
  const Matrix gram = gram_matrix(kernel, data.X, data.X);
  return solve_krr(gram, spec.f_rho(data.X), lambda);
}

Lemma1Report lemma1_diagnostic(const RegressionSpec& spec, const NoiseSpec& noise,
                               const KernelSpec& kernel, const std::vector<int>& sizes,
                               double lambda, int reps, uint64_t seed, int workers) {
  if (reps < 30) throw std::invalid_argument("lemma1_diagnostic: reps must be >= 30");
  const long n_total = std::accumulate(sizes.begin(), sizes.end(), 0L);
  const int m = static_cast<int>(sizes.size());

  std::vector<double> lhs(reps, 0.0), rhs(reps, 0.0);
  auto run_rep = [&](int rep) {
    const LocalDataset full = sample_dataset(spec, noise, static_cast<int>(n_total),
                                             mix_seed(seed, 1000 + rep));
    const auto parts = split_dataset(full, sizes);
    Vector u_bar = Vector::Zero(spec.truncation());
    double rhs_rep = 0.0;
    for (int j = 0; j < m; ++j) {
      const double w = static_cast<double>(sizes[j]) / static_cast<double>(n_total);
      const Matrix gram = gram_matrix(kernel, parts[j].X, parts[j].X);
      const Matrix feats = mercer_features(spec.truncation(), parts[j].X.col(0));
      const Vector u_noisy = feats * solve_krr(gram, parts[j].y, lambda);
      const Vector u_clean = feats * solve_krr(gram, spec.f_rho(parts[j].X), lambda);
      u_bar += w * u_noisy;
      rhs_rep += w * w * true_errors_from_basis_image(u_noisy, spec).rho_sq;
      rhs_rep += w * true_errors_from_basis_image(u_clean, spec).rho_sq;
    }
    lhs[rep] = true_errors_from_basis_image(u_bar, spec).rho_sq;
    rhs[rep] = rhs_rep;
  };

  int threads = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, reps));
  if (threads == 1) {
    for (int rep = 0; rep < reps; ++rep) run_rep(rep);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (int rep = next.fetch_add(1); rep < reps; rep = next.fetch_add(1)) run_rep(rep);
      });
    for (auto& th : pool) th.join();
  }

  Lemma1Report report;
  report.reps = reps;
  report.lhs = std::accumulate(lhs.begin(), lhs.end(), 0.0) / reps;
  report.rhs = std::accumulate(rhs.begin(), rhs.end(), 0.0) / reps;
  report.ratio = report.rhs > 0.0 ? report.lhs / report.rhs : 0.0;
  report.slack = 1.0 + 3.0 / std::sqrt(static_cast<double>(reps));
  report.passed = report.lhs <= report.rhs * report.slack;
  return report;
}

nlohmann::json regression_spec_to_json(const RegressionSpec& spec) {
  return {{"r", spec.r()},
          {"s_param", spec.s_param()},
          {"truncation", spec.truncation()},
          {"seed", spec.seed()}};
}

RegressionSpec regression_spec_from_json(const nlohmann::json& j) {
  return RegressionSpec::make(j.at("r").get<double>(), j.at("s_param").get<double>(),
                              j.value("truncation", 1000), j.value("seed", 0ULL));
}

nlohmann::json noise_spec_to_json(const NoiseSpec& spec) {
  nlohmann::json j;
  j["distribution"] = spec.kind == NoiseSpec::Kind::UniformBounded ? "uniform_bounded" : "gaussian";
  if (spec.kind == NoiseSpec::Kind::UniformBounded)
    j["m_prime"] = spec.param;
  else
    j["sigma"] = spec.param;
  return j;
}

NoiseSpec noise_spec_from_json(const nlohmann::json& j) {
  const std::string dist = j.at("distribution").get<std::string>();
  if (dist == "uniform_bounded") return NoiseSpec::uniform_bounded(j.at("m_prime").get<double>());
  if (dist == "gaussian") return NoiseSpec::gaussian(j.at("sigma").get<double>());
  throw std::invalid_argument("noise_spec_from_json: unknown distribution '" + dist + "'");
}

}  // namespace adkrr
