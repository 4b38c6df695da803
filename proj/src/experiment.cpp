#include "adkrr/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace adkrr {

namespace {

constexpr uint64_t kDataSalt = 0x646174ULL;
constexpr uint64_t kCenterSalt = 0x63656eULL;
constexpr uint64_t kCalibSalt = 0x63616cULL;

std::vector<double> default_clp_grid() {
  return {1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0};
}

int resolved_workers(int workers) {
  if (workers > 0) return workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

CenterScheme center_scheme_from_string(const std::string& name) {
  if (name == "iid_uniform") return CenterScheme::IidUniform;
  if (name == "halton") return CenterScheme::Halton;
  if (name == "own_data") return CenterScheme::OwnData;
  throw std::invalid_argument("unknown center scheme '" + name + "'");
}

std::string center_scheme_to_string(CenterScheme scheme) {
  switch (scheme) {
    case CenterScheme::IidUniform: return "iid_uniform";
    case CenterScheme::Halton: return "halton";
    case CenterScheme::OwnData: return "own_data";
  }
  return "?";
}

}  // namespace

int ExperimentConfig::resolve_m(long n) const {
  if (m > 0) return m;
  return static_cast<int>(std::ceil(std::pow(static_cast<double>(n), 0.25)));
}

std::vector<double> ExperimentConfig::resolve_clp_grid() const {
  return clp_grid.empty() ? default_clp_grid() : clp_grid;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  if (j.contains("kernel")) cfg.kernel = kernel_spec_from_json(j["kernel"]);
  if (j.contains("regression")) {
    const auto& r = j["regression"];
    cfg.reg_r = r.value("r", 0.5);
    cfg.reg_s = r.value("s_param", 0.5);
    cfg.reg_truncation = r.value("truncation", 1000);
    cfg.reg_seed = r.value("seed", 1ULL);
  }
  if (j.contains("noise")) cfg.noise = noise_spec_from_json(j["noise"]);
  cfg.n_total = j.value("n_total", 1024L);
  cfg.m = j.value("m", 0);
  if (j.contains("partition")) {
    const auto& p = j["partition"];
    const std::string scheme = p.value("scheme", "equal");
    if (scheme == "equal") {
      cfg.partition_scheme = PartitionScheme::equal();
    } else if (scheme == "proportional") {
      cfg.partition_scheme =
          PartitionScheme::proportional(p.at("weights").get<std::vector<double>>());
    } else {
      throw std::invalid_argument("unknown partition scheme '" + scheme + "'");
    }
  }
  cfg.num_centers = j.value("num_centers", 0);
  if (j.contains("center_scheme"))
    cfg.center_scheme = center_scheme_from_string(j["center_scheme"].get<std::string>());
  cfg.b = j.value("b", 1.0);
  if (j.contains("ladder_cap")) {
    const auto& c = j["ladder_cap"];
    const std::string mode = c.value("mode", "practical");
    if (mode == "theoretical") {
      cfg.cap_mode = CapMode::Theoretical;
    } else if (mode == "practical") {
      cfg.cap_mode = CapMode::Practical;
      cfg.k_min = c.value("k_min", 128);
    } else {
      throw std::invalid_argument("unknown ladder cap mode '" + mode + "'");
    }
  }
  if (j.contains("mu")) {
    const auto& mu = j["mu"];
    const std::string mode = mu.value("mode", "scaled");
    if (mode == "theoretical") {
      cfg.mu_mode = MuMode::Theoretical;
    } else if (mode == "scaled") {
      cfg.mu_mode = MuMode::Scaled;
      cfg.mu_factor = mu.value("factor", 1e-8);
    } else {
      throw std::invalid_argument("unknown mu mode '" + mode + "'");
    }
  }
  if (j.contains("c_lp")) {
    const auto& c = j["c_lp"];
    const std::string mode = c.value("mode", "calibrate");
    if (mode == "theoretical") {
      cfg.clp_mode = ClpMode::Theoretical;
    } else if (mode == "fixed") {
      cfg.clp_mode = ClpMode::Fixed;
      cfg.clp_value = c.at("value").get<double>();
    } else if (mode == "calibrate") {
      cfg.clp_mode = ClpMode::Calibrate;
      if (c.contains("grid")) cfg.clp_grid = c["grid"].get<std::vector<double>>();
    } else {
      throw std::invalid_argument("unknown c_lp mode '" + mode + "'");
    }
  }
  cfg.calibration_fraction = j.value("calibration_fraction", 0.1);
  cfg.eval_grid = j.value("eval_grid", 100);
  cfg.mc_reps = j.value("mc_reps", 1);
  cfg.seed = j.value("seed", 42ULL);
  cfg.workers = j.value("workers", 0);
  cfg.out_dir = j.value("out_dir", std::string{});
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["kernel"] = kernel_spec_to_json(kernel);
  j["regression"] = {{"r", reg_r}, {"s_param", reg_s}, {"truncation", reg_truncation}, {"seed", reg_seed}};
  j["noise"] = noise_spec_to_json(noise);
  j["n_total"] = n_total;
  j["m"] = m;
  if (partition_scheme.kind == PartitionScheme::Kind::Equal) {
    j["partition"] = {{"scheme", "equal"}};
  } else {
    j["partition"] = {{"scheme", "proportional"}, {"weights", partition_scheme.weights}};
  }
  j["num_centers"] = num_centers;
  j["center_scheme"] = center_scheme_to_string(center_scheme);
  j["b"] = b;
  if (cap_mode == CapMode::Theoretical) {
    j["ladder_cap"] = {{"mode", "theoretical"}};
  } else {
    j["ladder_cap"] = {{"mode", "practical"}, {"k_min", k_min}};
  }
  if (mu_mode == MuMode::Theoretical) {
    j["mu"] = {{"mode", "theoretical"}};
  } else {
    j["mu"] = {{"mode", "scaled"}, {"factor", mu_factor}};
  }
  switch (clp_mode) {
    case ClpMode::Theoretical: j["c_lp"] = {{"mode", "theoretical"}}; break;
    case ClpMode::Fixed: j["c_lp"] = {{"mode", "fixed"}, {"value", clp_value}}; break;
    case ClpMode::Calibrate: j["c_lp"] = {{"mode", "calibrate"}, {"grid", resolve_clp_grid()}}; break;
  }
  j["calibration_fraction"] = calibration_fraction;
  j["eval_grid"] = eval_grid;
  j["mc_reps"] = mc_reps;
  j["seed"] = seed;
  j["workers"] = workers;
  j["out_dir"] = out_dir;
  return j;
}

Vector dkrr_predict(const std::vector<LocalDataset>& datasets, const KernelSpec& kernel,
                    double lambda, const Eigen::Ref<const Matrix>& queries) {
  long total = 0;
  for (const auto& d : datasets) total += d.n();
  Vector out = Vector::Zero(queries.rows());
  for (const auto& d : datasets) {
    const Matrix gram = gram_matrix(kernel, d.X, d.X);
    const Vector coeffs = solve_krr(gram, d.y, lambda);
    out += (static_cast<double>(d.n()) / static_cast<double>(total)) *
           (gram_matrix(kernel, queries, d.X) * coeffs);
  }
  return out;
}

std::vector<LocalDataset> calibration_holdout(const std::vector<LocalDataset>& datasets,
                                              double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("calibration_holdout: fraction must lie in (0,1)");
  std::vector<LocalDataset> holdouts;
  holdouts.reserve(datasets.size());
  for (const auto& d : datasets) {
    if (d.n() < 2)
      throw std::invalid_argument("calibration_holdout: each agent needs at least 2 samples");
    const int take = std::clamp(static_cast<int>(std::floor(d.n() * fraction)), 2, d.n());
    holdouts.push_back({d.X.topRows(take), d.y.head(take)});
  }
  return holdouts;
}

std::function<CalibrationScore(double)> make_calibration_pipeline(
    const std::vector<LocalDataset>& holdouts, const KernelSpec& kernel,
    const ProtocolOptions& options) {
  // deterministic prefix split: leading 9/10 trains, trailing 1/10 validates
  std::vector<LocalDataset> train_sets;
  std::vector<Matrix> valid_x;
  std::vector<Vector> valid_y;
  long valid_total = 0;
  for (const auto& h : holdouts) {
    const int n = h.n();
    int train_n = std::max(1, (9 * n) / 10);
    if (train_n == n) train_n = n - 1;
    if (train_n < 1) throw std::invalid_argument("calibration pipeline: holdout too small to split");
    train_sets.push_back({h.X.topRows(train_n), h.y.head(train_n)});
    valid_x.push_back(h.X.bottomRows(n - train_n));
    valid_y.push_back(h.y.tail(n - train_n));
    valid_total += n - train_n;
  }
  Matrix queries(valid_total, holdouts.front().X.cols());
  Vector targets(valid_total);
  long at = 0;
  for (size_t j = 0; j < valid_x.size(); ++j) {
    queries.middleRows(at, valid_x[j].rows()) = valid_x[j];
    targets.segment(at, valid_y[j].size()) = valid_y[j];
    at += valid_x[j].rows();
  }

  return [train_sets, queries, targets, kernel, options](double candidate) -> CalibrationScore {
    ProtocolOptions opts = options;
    opts.c_lp = candidate;
    try {
      ProtocolRun run(kernel, train_sets, opts);
      run.run_selection();
      bool exercised = false;
      for (int j = 0; j < run.agent_count(); ++j)
        for (const auto& row : run.agent(j).selection().trace)
          if (row.hit) exercised = true;
      const Vector pred = run.predict(queries);
      const double mse = (pred - targets).squaredNorm() / static_cast<double>(targets.size());
      if (!std::isfinite(mse)) return {std::numeric_limits<double>::infinity(), exercised};
      return {mse, exercised};
    } catch (const config_error&) {
      throw;  // the setup itself is broken; no candidate can fix it
    } catch (const std::runtime_error&) {
      return {std::numeric_limits<double>::infinity(), false};
    }
  };
}

namespace {

struct ResolvedClp {
  double value = 0.0;
  std::string mode;
};

ResolvedClp resolve_clp(const ExperimentConfig& config,
                        const std::vector<LocalDataset>& datasets) {
  switch (config.clp_mode) {
    case ClpMode::Theoretical: {
      if (config.noise.noiseless())
        throw config_error(
            "theoretical C_LP needs positive noise constants (M, gamma); use a fixed or "
            "calibrated C_LP for noiseless data");
      return {c_lp(config.b, config.kernel.kappa(), config.noise.M(), config.noise.gamma()),
              "theoretical"};
    }
    case ClpMode::Fixed:
      return {config.clp_value, "fixed"};
    case ClpMode::Calibrate: {
      const auto holdouts = calibration_holdout(datasets, config.calibration_fraction);
      ProtocolOptions opts;
      opts.num_centers = 0;  // auto from the train blocks
      opts.center_scheme = config.center_scheme;
      opts.center_seed = mix_seed(config.seed, kCalibSalt);
      opts.b = config.b;
      opts.cap_mode = config.cap_mode;
      opts.k_min = config.k_min;
      opts.mu_mode = config.mu_mode;
      opts.mu_factor = config.mu_factor;
      opts.workers = 1;
      const double value =
          calibrate_clp(config.resolve_clp_grid(), make_calibration_pipeline(holdouts, config.kernel, opts));
      return {value, "calibrated"};
    }
  }
  throw std::logic_error("resolve_clp: unknown mode");
}

void require_exact_metric_kernel(const ExperimentConfig& config) {
  if (config.kernel.variant() != KernelVariant::TruncatedMercer ||
      config.kernel.s_param() != config.reg_s ||
      config.kernel.truncation() != config.reg_truncation)
    throw config_error(
        "exact population error metrics need the truncated Mercer kernel matching the "
        "regression spec (same s_param and truncation); adjust the kernel section of the config");
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  require_exact_metric_kernel(config);

  const RegressionSpec reg =
      RegressionSpec::make(config.reg_r, config.reg_s, config.reg_truncation, config.reg_seed);
  const int m = config.resolve_m(config.n_total);
  const Partition part =
      partition(config.n_total, m, config.partition_scheme, config.reg_r, config.reg_s);

  const LocalDataset full = sample_dataset(reg, config.noise, static_cast<int>(config.n_total),
                                           mix_seed(config.seed, kDataSalt));
  const std::vector<LocalDataset> datasets = split_dataset(full, part.sizes);

  const ResolvedClp clp = resolve_clp(config, datasets);

  ProtocolOptions options;
  options.num_centers = config.num_centers;
  options.center_scheme = config.center_scheme;
  options.center_seed = mix_seed(config.seed, kCenterSalt);
  options.b = config.b;
  options.cap_mode = config.cap_mode;
  options.k_min = config.k_min;
  options.mu_mode = config.mu_mode;
  options.mu_factor = config.mu_factor;
  options.c_lp = clp.value;
  options.workers = resolved_workers(config.workers);

  ProtocolRun run(config.kernel, datasets, options);
  run.run_selection();

  // Step 5 through the message path at the evaluation grid.
  const Domain& dom = config.kernel.domain();
  Matrix queries(std::max(config.eval_grid, 1), 1);
  for (int i = 0; i < queries.rows(); ++i)
    queries(i, 0) = dom.lo + (dom.hi - dom.lo) * (i + 0.5) / static_cast<double>(queries.rows());
  run.predict(queries);

  const AuditReport audit = audit_privacy(run.ledger(), datasets);

  // Exact errors through the shared eigenbasis: column k of `ladder_images`
  // is the basis image of the fixed-lambda_k distributed estimate.
  const int k_cap = run.k_cap();
  Matrix ladder_images = Matrix::Zero(reg.truncation(), k_cap);
  for (int j = 0; j < m; ++j) {
    const double w = static_cast<double>(datasets[j].n()) / static_cast<double>(config.n_total);
    const Matrix feats = mercer_features(reg.truncation(), datasets[j].X.col(0));
    ladder_images.noalias() += w * (feats * run.agent(j).models().coefficient_matrix());
  }

  RunResult result;
  result.n = config.n_total;
  result.m = m;
  result.seed = config.seed;
  result.k_cap = k_cap;
  result.k_star = run.k_stars();
  result.lambda_star = run.lambda_stars();
  result.size_warning = part.size_warning;
  result.audit_passed = audit.passed;
  result.clp_used = clp.value;

  result.oracle_err = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= k_cap; ++k) {
    const double err = true_errors_from_basis_image(ladder_images.col(k - 1), reg).rho_sq;
    if (err < result.oracle_err) {
      result.oracle_err = err;
      result.oracle_k = k;
    }
  }

  // double weighted average: w-average of the fixed-lambda estimates at the
  // per-agent selections
  Vector lep_image = Vector::Zero(reg.truncation());
  for (int j = 0; j < m; ++j) {
    const double w = static_cast<double>(datasets[j].n()) / static_cast<double>(config.n_total);
    lep_image += w * ladder_images.col(result.k_star[j] - 1);
  }
  const ErrorPair errs = true_errors_from_basis_image(lep_image, reg);
  result.rho_err = errs.rho_sq;
  result.k_err = errs.k_sq;

  for (int j = 0; j < m; ++j) {
    result.mu_per_agent.push_back(run.agent(j).mu());
    result.fit_jitter_per_agent.push_back(run.agent(j).fit_used_jitter());
    for (const auto& row : run.agent(j).selection().trace) {
      result.traces.push_back(row);
      result.trace_agent.push_back(j);
    }
  }

  result.ledger_csv = run.ledger().to_csv();
  result.floats_sent = run.ledger().total_values();
  result.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

std::string results_csv_header() {
  return "n,m,seed,k_star_per_agent,rho_err,k_err,oracle_err,floats_sent,wall_ms";
}

std::string results_csv_row(const RunResult& result) {
  std::ostringstream out;
  out.precision(17);
  out << result.n << ',' << result.m << ',' << result.seed << ',';
  for (size_t j = 0; j < result.k_star.size(); ++j) {
    if (j) out << '|';
    out << result.k_star[j];
  }
  out << ',' << result.rho_err << ',' << result.k_err << ',' << result.oracle_err << ','
      << result.floats_sent << ',' << result.wall_ms;
  return out.str();
}

namespace {

void write_manifest(const ExperimentConfig& config, const RunResult& result,
                    const std::filesystem::path& path) {
  nlohmann::json j;
  j["config"] = config.to_json();
  j["seeds"] = {{"run", config.seed},
                {"data", mix_seed(config.seed, kDataSalt)},
                {"centers", mix_seed(config.seed, kCenterSalt)},
                {"calibration_centers", mix_seed(config.seed, kCalibSalt)},
                {"regression", config.reg_seed}};
  j["constant_modes"] = {
      {"ladder_cap", config.cap_mode == CapMode::Theoretical ? "theoretical" : "practical"},
      {"mu", config.mu_mode == MuMode::Theoretical ? "theoretical" : "scaled"},
      {"c_lp", config.clp_mode == ClpMode::Theoretical
                   ? "theoretical"
                   : (config.clp_mode == ClpMode::Fixed ? "fixed" : "calibrated")}};
  j["k_cap"] = result.k_cap;
  j["clp_used"] = result.clp_used;
  j["k_star_per_agent"] = result.k_star;
  j["lambda_star_per_agent"] = result.lambda_star;
  j["m"] = result.m;
  j["size_warning"] = result.size_warning;
  j["audit_passed"] = result.audit_passed;
  j["floats_sent"] = result.floats_sent;
  j["mu_per_agent"] = result.mu_per_agent;
  j["fit_jitter_per_agent"] = result.fit_jitter_per_agent;
  const RegressionSpec reg =
      RegressionSpec::make(config.reg_r, config.reg_s, config.reg_truncation, config.reg_seed);
  j["regression_c0"] = reg.c0_bound();
  j["regression_rkhs_norm_sq"] = reg.rkhs_norm_sq();

  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

void write_trace(const RunResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "agent,k,seminorm,threshold,hit\n";
  out.precision(17);
  for (size_t i = 0; i < result.traces.size(); ++i) {
    const auto& row = result.traces[i];
    out << result.trace_agent[i] << ',' << row.k << ',' << row.seminorm << ',' << row.threshold
        << ',' << (row.hit ? 1 : 0) << '\n';
  }
}

}  // namespace

RunResult run_experiment_with_outputs(const ExperimentConfig& config) {
  if (config.out_dir.empty())
    throw std::invalid_argument("run_experiment_with_outputs: out_dir not set");
  const RunResult result = run_experiment(config);
  const std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "results.csv");
    out << results_csv_header() << '\n' << results_csv_row(result) << '\n';
  }
  write_manifest(config, result, dir / "manifest.json");
  write_trace(result, dir / "selection_trace.csv");
  {
    std::ofstream out(dir / "ledger.csv");
    out << result.ledger_csv;
  }
  return result;
}

double fit_loglog_slope(const std::vector<long>& ns, const std::vector<double>& errs) {
  if (ns.size() != errs.size() || ns.size() < 2)
    throw std::invalid_argument("fit_loglog_slope: need at least two points");
  const size_t p = ns.size();
  double mean_x = 0.0, mean_y = 0.0;
  for (size_t i = 0; i < p; ++i) {
    if (!(errs[i] > 0.0)) throw std::invalid_argument("fit_loglog_slope: errors must be positive");
    mean_x += std::log(static_cast<double>(ns[i]));
    mean_y += std::log(errs[i]);
  }
  mean_x /= p;
  mean_y /= p;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < p; ++i) {
    const double dx = std::log(static_cast<double>(ns[i])) - mean_x;
    sxx += dx * dx;
    sxy += dx * (std::log(errs[i]) - mean_y);
  }
  return sxy / sxx;
}

SweepResult sweep(const ExperimentConfig& config, const std::vector<long>& n_grid, int reps) {
  if (n_grid.empty()) throw std::invalid_argument("sweep: empty grid");
  for (size_t i = 1; i < n_grid.size(); ++i)
    if (n_grid[i] <= n_grid[i - 1]) throw std::invalid_argument("sweep: grid must be increasing");
  if (reps < 1) throw std::invalid_argument("sweep: reps must be >= 1");

  struct Cell {
    long n;
    int rep;
  };
  std::vector<Cell> todo;
  for (long n : n_grid)
    for (int rep = 0; rep < reps; ++rep) todo.push_back({n, rep});

  SweepResult out;
  out.grid = n_grid;
  out.cells.resize(todo.size());
  std::vector<char> done(todo.size(), 0);

  const int workers = std::max(1, std::min(resolved_workers(config.workers),
                                           static_cast<int>(todo.size())));
  std::atomic<size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto run_cell = [&](size_t idx) {
    ExperimentConfig cell_cfg = config;
    cell_cfg.n_total = todo[idx].n;
    cell_cfg.seed = mix_seed(mix_seed(config.seed, static_cast<uint64_t>(todo[idx].n)),
                             static_cast<uint64_t>(todo[idx].rep));
    cell_cfg.workers = 1;  // cells are the parallel unit
    cell_cfg.out_dir.clear();
    out.cells[idx] = {todo[idx].n, todo[idx].rep, run_experiment(cell_cfg)};
    done[idx] = 1;
  };

  auto worker = [&] {
    for (size_t idx = next.fetch_add(1); idx < todo.size(); idx = next.fetch_add(1)) {
      try {
        run_cell(idx);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  auto flush = [&](std::vector<SweepCell>& cells) {
    if (config.out_dir.empty()) return;
    const std::filesystem::path dir(config.out_dir);
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir / "results.csv");
    csv << results_csv_header() << '\n';
    for (const auto& cell : cells) csv << results_csv_row(cell.result) << '\n';
  };

  if (first_error) {
    // preserve whatever finished before the failure
    std::vector<SweepCell> partial;
    for (size_t i = 0; i < todo.size(); ++i)
      if (done[i]) partial.push_back(out.cells[i]);
    flush(partial);
    std::rethrow_exception(first_error);
  }

  for (long n : n_grid) {
    double sum = 0.0;
    int count = 0;
    for (const auto& cell : out.cells)
      if (cell.n == n) {
        sum += cell.result.rho_err;
        ++count;
      }
    out.mean_rho_err.push_back(sum / count);
  }
  out.slope = fit_loglog_slope(out.grid, out.mean_rho_err);

  flush(out.cells);
  if (!config.out_dir.empty()) {
    const std::filesystem::path dir(config.out_dir);
    nlohmann::json j;
    j["config"] = config.to_json();
    j["grid"] = n_grid;
    j["reps"] = reps;
    j["mean_rho_err"] = out.mean_rho_err;
    j["slope"] = out.slope;
    std::ofstream manifest(dir / "manifest.json");
    manifest << j.dump(2) << '\n';
  }
  return out;
}

}  // namespace adkrr
