#include "adkrr/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

std::vector<long> parse_grid(const std::string& grid) {
  std::vector<long> out;
  size_t at = 0;
  while (at < grid.size()) {
    size_t comma = grid.find(',', at);
    if (comma == std::string::npos) comma = grid.size();
    out.push_back(std::stol(grid.substr(at, comma - at)));
    at = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive distributed kernel ridge regression experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  uint64_t seed = 0;
  bool seed_set = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
    cmd->add_option("--out", out_dir, "output directory (overrides the config)");
    cmd->add_option("--seed", seed, "run seed (overrides the config)")
        ->each([&](const std::string&) { seed_set = true; });
  };

  auto* run_cmd = app.add_subcommand("run", "run one experiment");
  add_common(run_cmd);

  auto* sweep_cmd = app.add_subcommand("sweep", "sweep |D| and fit the learning-curve slope");
  add_common(sweep_cmd);
  std::string grid_arg = "512,2048,8192";
  int reps = 0;
  sweep_cmd->add_option("--grid", grid_arg, "comma-separated |D| grid (default 512,2048,8192)");
  sweep_cmd->add_option("--reps", reps, "repetitions per grid point (default: config mc_reps)");

  CLI11_PARSE(app, argc, argv);

  try {
    adkrr::ExperimentConfig config = adkrr::ExperimentConfig::from_file(config_path);
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (seed_set) config.seed = seed;

    if (run_cmd->parsed()) {
      if (config.out_dir.empty()) config.out_dir = "out";
      const adkrr::RunResult result = adkrr::run_experiment_with_outputs(config);
      std::cout << adkrr::results_csv_header() << '\n'
                << adkrr::results_csv_row(result) << '\n';
      std::cout << "outputs written to " << config.out_dir << '\n';
      return 0;
    }

    if (config.out_dir.empty()) config.out_dir = "out";
    const std::vector<long> grid = parse_grid(grid_arg);
    const int use_reps = reps > 0 ? reps : std::max(1, config.mc_reps);
    const adkrr::SweepResult result = adkrr::sweep(config, grid, use_reps);
    std::cout << "n,mean_rho_err\n";
    for (size_t i = 0; i < result.grid.size(); ++i)
      std::cout << result.grid[i] << ',' << result.mean_rho_err[i] << '\n';
    std::cout << "log-log slope: " << result.slope << '\n';
    std::cout << "outputs written to " << config.out_dir << '\n';
    return 0;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
}
