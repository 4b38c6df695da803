#pragma once

#include "adkrr/datagen.hpp"
#include "adkrr/protocol.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace adkrr {

enum class ClpMode { Theoretical, Fixed, Calibrate };

/// Everything one experiment needs: problem knobs, protocol knobs, constant
/// modes and output location. Loads from / echoes to JSON.
struct ExperimentConfig {
  KernelSpec kernel = KernelSpec::truncated_mercer(0.5, 1000);
  double reg_r = 0.5;
  double reg_s = 0.5;
  int reg_truncation = 1000;
  uint64_t reg_seed = 1;
  NoiseSpec noise = NoiseSpec::uniform_bounded(0.25);

  long n_total = 1024;
  int m = 0;  // 0: m = ceil(n^{1/4})
  PartitionScheme partition_scheme = PartitionScheme::equal();

  int num_centers = 0;  // 0: max_j |D_j|
  CenterScheme center_scheme = CenterScheme::IidUniform;
  double b = 1.0;
  CapMode cap_mode = CapMode::Practical;
  int k_min = 128;
  MuMode mu_mode = MuMode::Scaled;
  double mu_factor = 1e-8;

  ClpMode clp_mode = ClpMode::Calibrate;
  double clp_value = 1.0;            // Fixed mode
  std::vector<double> clp_grid;      // Calibrate mode; empty: default grid
  double calibration_fraction = 0.1; // leading share of each agent's data

  int eval_grid = 100;
  int mc_reps = 1;
  uint64_t seed = 42;
  int workers = 0;  // 0: hardware concurrency
  std::string out_dir;

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);
  nlohmann::json to_json() const;

  int resolve_m(long n) const;
  std::vector<double> resolve_clp_grid() const;
};

struct RunResult {
  long n = 0;
  int m = 0;
  uint64_t seed = 0;
  int k_cap = 0;
  std::vector<int> k_star;
  std::vector<double> lambda_star;
  double rho_err = 0.0;
  double k_err = 0.0;
  double oracle_err = 0.0;  // best fixed-lambda ladder DKRR error
  int oracle_k = 0;
  double clp_used = 0.0;
  size_t floats_sent = 0;
  double wall_ms = 0.0;
  bool size_warning = false;
  bool audit_passed = false;
  std::vector<double> mu_per_agent;
  std::vector<bool> fit_jitter_per_agent;
  std::string ledger_csv;
  std::vector<SelectionTraceRow> traces;  // concatenated per agent
  std::vector<int> trace_agent;           // agent id per trace row
};

/// Runs data generation, protocol steps 1-5 and the exact error metrics for
/// one configuration; also evaluates the on-ladder fixed-lambda oracle.
RunResult run_experiment(const ExperimentConfig& config);

/// run_experiment plus results.csv / manifest.json / selection_trace.csv in
/// config.out_dir.
RunResult run_experiment_with_outputs(const ExperimentConfig& config);

struct SweepCell {
  long n = 0;
  int rep = 0;
  RunResult result;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<long> grid;
  std::vector<double> mean_rho_err;
  double slope = 0.0;  // least-squares slope of log mean rho error vs log n
};

SweepResult sweep(const ExperimentConfig& config, const std::vector<long>& n_grid, int reps);

/// Least-squares slope of log(err) against log(n).
double fit_loglog_slope(const std::vector<long>& ns, const std::vector<double>& errs);

/// Eq-(1)-style fixed-lambda distributed prediction, computed directly from
/// per-agent ridge solves with no protocol in between (oracle route).
Vector dkrr_predict(const std::vector<LocalDataset>& datasets, const KernelSpec& kernel,
                    double lambda, const Eigen::Ref<const Matrix>& queries);

/// Leading calibration slice (first fraction of each agent's samples).
std::vector<LocalDataset> calibration_holdout(const std::vector<LocalDataset>& datasets,
                                              double fraction);

/// Validation pipeline for one candidate constant: train on the leading 9/10
/// of each holdout block, validate on the trailing 1/10. Reports whether the
/// stopping rule fired for any agent alongside the MSE.
std::function<CalibrationScore(double)> make_calibration_pipeline(
    const std::vector<LocalDataset>& holdouts, const KernelSpec& kernel,
    const ProtocolOptions& options);

std::string results_csv_header();
std::string results_csv_row(const RunResult& result);

}  // namespace adkrr
