#include "adkrr/experiment.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>

namespace py = pybind11;
using namespace adkrr;

namespace {

ExperimentConfig config_from_json_str(const std::string& text) {
  return ExperimentConfig::from_json(nlohmann::json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_adkrr, m) {
  m.doc() = "adaptive distributed kernel ridge regression with Lepskii stopping";

  // kernels
  py::class_<Domain>(m, "Domain")
      .def(py::init([](int dim, double lo, double hi) { return Domain::box(dim, lo, hi); }),
           py::arg("dim") = 1, py::arg("lo") = 0.0, py::arg("hi") = 1.0)
      .def_readonly("dim", &Domain::dim)
      .def_readonly("lo", &Domain::lo)
      .def_readonly("hi", &Domain::hi);

  py::class_<KernelSpec>(m, "KernelSpec")
      .def_static("gaussian", &KernelSpec::gaussian, py::arg("bandwidth"),
                  py::arg("domain") = Domain::unit_interval())
      .def_static("truncated_mercer", &KernelSpec::truncated_mercer, py::arg("s_param"),
                  py::arg("truncation") = 1000)
      .def_property_readonly("kappa", &KernelSpec::kappa)
      .def("eigenvalue", &KernelSpec::eigenvalue, py::arg("t"))
      .def("to_json", [](const KernelSpec& spec) { return kernel_spec_to_json(spec).dump(); });

  m.def("eval_kernel", &eval_kernel, py::arg("spec"), py::arg("x"), py::arg("x2"));
  m.def("gram_matrix", &gram_matrix, py::arg("spec"), py::arg("X"), py::arg("X2"));

  // local ridge machinery
  py::class_<Ladder>(m, "Ladder")
      .def(py::init([](double b, int k_cap) { return Ladder{b, k_cap}; }), py::arg("b"),
           py::arg("k_cap"))
      .def_readonly("b", &Ladder::b)
      .def_readonly("k_cap", &Ladder::k_cap)
      .def("lambda_value", &Ladder::lambda, py::arg("k"))
      .def("lambdas", &Ladder::lambdas);

  m.def("lambda_at", &lambda_at, py::arg("b"), py::arg("k"));
  m.def("c1_star", &c1_star, py::arg("kappa"));
  m.def("c_lp", &c_lp, py::arg("b"), py::arg("kappa"), py::arg("M"), py::arg("gamma"));
  m.def(
      "ladder_cap",
      [](long n, double b, double kappa, const std::string& mode, int k_min) {
        return ladder_cap(n, b, kappa,
                          mode == "theoretical" ? CapMode::Theoretical : CapMode::Practical, k_min);
      },
      py::arg("n"), py::arg("b"), py::arg("kappa"), py::arg("mode") = "theoretical",
      py::arg("k_min") = 0);
  m.def(
      "mu_for_agent",
      [](long n, double b, double kappa, const std::string& mode, double factor) {
        return mu_for_agent(n, b, kappa,
                            mode == "theoretical" ? MuMode::Theoretical : MuMode::Scaled, factor);
      },
      py::arg("n"), py::arg("b"), py::arg("kappa"), py::arg("mode") = "theoretical",
      py::arg("factor") = 1.0);

  m.def("solve_krr", &solve_krr, py::arg("gram"), py::arg("y"), py::arg("lam"));
  m.def(
      "predict_krr",
      [](const Vector& coeffs, const KernelSpec& spec, const Matrix& support,
         const Matrix& queries) {
        return predict_krr(coeffs, spec, support, queries);
      },
      py::arg("coeffs"), py::arg("spec"), py::arg("support"), py::arg("queries"));
  m.def("empirical_effective_dimension", &empirical_effective_dimension, py::arg("gram"),
        py::arg("lam"));
  m.def("w_quantity", &w_quantity, py::arg("n"), py::arg("lam"), py::arg("n_eff"));

  // reduced-rank approximation
  m.def("fit_local_approx", &fit_local_approx, py::arg("cross_gram"), py::arg("center_gram"),
        py::arg("targets"), py::arg("mu"));
  m.def(
      "evaluate_basis",
      [](const Vector& coeffs, const KernelSpec& spec, const Matrix& centers,
         const Matrix& queries) {
        return evaluate_basis(coeffs, spec, centers, queries);
      },
      py::arg("coeffs"), py::arg("spec"), py::arg("centers"), py::arg("queries"));
  m.def("seminorm_sq", &seminorm_sq, py::arg("coeffs"), py::arg("cross_gram"),
        py::arg("center_gram"), py::arg("lam"));

  // selection
  m.def("threshold_at", &threshold_at, py::arg("k"), py::arg("c_lp"), py::arg("w_bar_k"),
        py::arg("ladder"));
  m.def(
      "select_k",
      [](const std::map<int, double>& seminorms, const std::map<int, double>& thresholds,
         int k_cap) { return select_k(seminorms, thresholds, k_cap); },
      py::arg("seminorms"), py::arg("thresholds"), py::arg("k_cap"));
  m.def("halton_radical_inverse", &halton_radical_inverse, py::arg("base"), py::arg("index"));

  // synthetic data
  py::class_<RegressionSpec>(m, "RegressionSpec")
      .def_static("make", &RegressionSpec::make, py::arg("r"), py::arg("s_param"),
                  py::arg("truncation"), py::arg("seed"))
      .def_property_readonly("r", &RegressionSpec::r)
      .def_property_readonly("s_param", &RegressionSpec::s_param)
      .def_property_readonly("truncation", &RegressionSpec::truncation)
      .def("f_rho", [](const RegressionSpec& spec, const Matrix& X) { return spec.f_rho(X); })
      .def("population_effective_dimension", &RegressionSpec::population_effective_dimension)
      .def("c0_bound", &RegressionSpec::c0_bound)
      .def("rho_norm_sq", &RegressionSpec::rho_norm_sq)
      .def("rkhs_norm_sq", &RegressionSpec::rkhs_norm_sq);

  py::class_<NoiseSpec>(m, "NoiseSpec")
      .def_static("uniform_bounded", &NoiseSpec::uniform_bounded, py::arg("m_prime"))
      .def_static("gaussian", &NoiseSpec::gaussian, py::arg("sigma"))
      .def_property_readonly("M", &NoiseSpec::M)
      .def_property_readonly("gamma", &NoiseSpec::gamma);

  py::class_<LocalDataset>(m, "LocalDataset")
      .def(py::init([](Matrix X, Vector y) { return LocalDataset{std::move(X), std::move(y)}; }),
           py::arg("X"), py::arg("y"))
      .def_readonly("X", &LocalDataset::X)
      .def_readonly("y", &LocalDataset::y)
      .def_property_readonly("n", &LocalDataset::n);

  m.def("sample_dataset", &sample_dataset, py::arg("spec"), py::arg("noise"), py::arg("n"),
        py::arg("seed"));
  m.def(
      "partition",
      [](long n_total, int m_agents, const std::string& scheme, std::vector<double> weights,
         double r, double s) {
        const PartitionScheme ps = scheme == "proportional"
                                       ? PartitionScheme::proportional(std::move(weights))
                                       : PartitionScheme::equal();
        const Partition part = partition(n_total, m_agents, ps, r, s);
        return py::make_tuple(part.sizes, part.size_warning);
      },
      py::arg("n_total"), py::arg("m"), py::arg("scheme") = "equal",
      py::arg("weights") = std::vector<double>{}, py::arg("r") = 0.5, py::arg("s") = 0.5);
  m.def(
      "true_errors",
      [](const Matrix& points, const Vector& coeffs, const KernelSpec& kernel,
         const RegressionSpec& spec) {
        const ErrorPair errs = true_errors(KernelExpansion{points, coeffs}, kernel, spec);
        return py::make_tuple(errs.rho_sq, errs.k_sq);
      },
      py::arg("points"), py::arg("coeffs"), py::arg("kernel"), py::arg("spec"));
  m.def(
      "lemma1_diagnostic",
      [](const RegressionSpec& spec, const NoiseSpec& noise, const KernelSpec& kernel,
         const std::vector<int>& sizes, double lam, int reps, uint64_t seed, int workers) {
        Lemma1Report report;
        {
          py::gil_scoped_release release;
          report = lemma1_diagnostic(spec, noise, kernel, sizes, lam, reps, seed, workers);
        }
        py::dict out;
        out["lhs"] = report.lhs;
        out["rhs"] = report.rhs;
        out["ratio"] = report.ratio;
        out["passed"] = report.passed;
        return out;
      },
      py::arg("spec"), py::arg("noise"), py::arg("kernel"), py::arg("sizes"), py::arg("lam"),
      py::arg("reps"), py::arg("seed"), py::arg("workers") = 0);

  // experiments
  py::class_<RunResult>(m, "RunResult")
      .def_readonly("n", &RunResult::n)
      .def_readonly("m", &RunResult::m)
      .def_readonly("k_cap", &RunResult::k_cap)
      .def_readonly("k_star", &RunResult::k_star)
      .def_readonly("lambda_star", &RunResult::lambda_star)
      .def_readonly("rho_err", &RunResult::rho_err)
      .def_readonly("k_err", &RunResult::k_err)
      .def_readonly("oracle_err", &RunResult::oracle_err)
      .def_readonly("clp_used", &RunResult::clp_used)
      .def_readonly("floats_sent", &RunResult::floats_sent)
      .def_readonly("audit_passed", &RunResult::audit_passed)
      .def_readonly("wall_ms", &RunResult::wall_ms);

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const ExperimentConfig config = config_from_json_str(config_json);
        py::gil_scoped_release release;
        return run_experiment(config);
      },
      py::arg("config_json"), "run one experiment from a JSON config string");
  m.def(
      "sweep",
      [](const std::string& config_json, const std::vector<long>& grid, int reps) {
        const ExperimentConfig config = config_from_json_str(config_json);
        SweepResult result;
        {
          py::gil_scoped_release release;
          result = sweep(config, grid, reps);
        }
        py::dict out;
        out["grid"] = result.grid;
        out["mean_rho_err"] = result.mean_rho_err;
        out["slope"] = result.slope;
        return out;
      },
      py::arg("config_json"), py::arg("grid"), py::arg("reps"));
  m.def("results_csv_header", &results_csv_header);
  m.def("results_csv_row", &results_csv_row, py::arg("result"));

  m.attr("__version__") = "0.1.0";
}
