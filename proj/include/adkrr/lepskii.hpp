#pragma once

#include "adkrr/krr.hpp"

#include <functional>
#include <map>
#include <vector>

namespace adkrr {

/// c_lp * lambda_{k-1}^2 * w_bar_k; k must be >= 2 (lambda_{k-1} is undefined
/// at k = 1 on the 1/(kb) grid).
double threshold_at(int k, double c_lp, double w_bar_k, const Ladder& ladder);

/// Descending scan k = K*, K*-1, ..., 2; returns the first k whose seminorm
/// reaches its threshold (ties count as hits), or K* when none does.
int select_k(const std::map<int, double>& seminorms, const std::map<int, double>& thresholds,
             int k_cap);

struct SelectionTraceRow {
  int k;
  double seminorm;
  double threshold;
  bool hit;
};

struct SelectionResult {
  int k_star = 0;
  double lambda_star = 0.0;
  std::vector<SelectionTraceRow> trace;  // ascending k = 2..K*
};

/// Vector-indexed variant (entry k-2 holds step k) that also records the
/// full per-step trace for audit.
SelectionResult select_with_trace(const std::vector<double>& seminorms,
                                  const std::vector<double>& thresholds, const Ladder& ladder);

/// Ladder + stopping rule evaluated directly on one agent's local
/// quantities, with no basis approximation in between: the seminorm at k is
/// ||g_k||_D^2 + lambda_k ||g_k||_K^2 for the exact ladder difference g_k,
/// and the threshold uses the single-agent average w_bar_k = W_k^2.
struct SingleMachineSelection {
  SelectionResult selection;
  Vector coefficients;  // ridge coefficients at the selected step
};

SingleMachineSelection single_machine_lepskii(const Matrix& gram, const Vector& y,
                                              const Ladder& ladder, double c_lp);

/// One candidate's calibration outcome: the holdout validation MSE and
/// whether the stopping rule actually fired anywhere (a candidate so large
/// that every agent fell back to the cap was never exercised -- its MSE is
/// the fallback policy's, shared bit-for-bit by every larger candidate, and
/// says nothing about the constant itself).
struct CalibrationScore {
  double mse = 0.0;
  bool exercised = true;
};

/// Grid argmin of the validation score, restricted to exercised candidates
/// whenever any candidate was exercised. Throws when no candidate produces a
/// finite score.
double calibrate_clp(const std::vector<double>& grid,
                     const std::function<CalibrationScore(double)>& validation);

}  // namespace adkrr
