#include "adkrr/lepskii.hpp"

#include <cmath>
#include <limits>

namespace adkrr {

double threshold_at(int k, double c_lp, double w_bar_k, const Ladder& ladder) {
  if (k < 2) throw std::invalid_argument("threshold_at: k must be >= 2");
  if (k > ladder.k_cap) throw std::invalid_argument("threshold_at: k beyond the ladder cap");
  if (w_bar_k < 0.0) throw std::invalid_argument("threshold_at: w_bar must be >= 0");
  const double lam_prev = ladder.lambda(k - 1);
  return c_lp * lam_prev * lam_prev * w_bar_k;
}

int select_k(const std::map<int, double>& seminorms, const std::map<int, double>& thresholds,
             int k_cap) {
  if (k_cap < 2) throw std::invalid_argument("select_k: cap must be >= 2");
  for (int k = 2; k <= k_cap; ++k) {
    if (!seminorms.count(k) || !thresholds.count(k))
      throw std::invalid_argument("select_k: missing ladder index " + std::to_string(k));
  }
  for (int k = k_cap; k >= 2; --k) {
    if (seminorms.at(k) >= thresholds.at(k)) return k;
  }
  return k_cap;
}

SelectionResult select_with_trace(const std::vector<double>& seminorms,
                                  const std::vector<double>& thresholds, const Ladder& ladder) {
  const int cap = ladder.k_cap;
  if (cap < 2) throw std::invalid_argument("select_with_trace: ladder cap must be >= 2");
  if (static_cast<int>(seminorms.size()) != cap - 1 ||
      static_cast<int>(thresholds.size()) != cap - 1)
    throw std::invalid_argument("select_with_trace: expected entries for k = 2..cap");

  SelectionResult out;
  out.trace.reserve(cap - 1);
  for (int k = 2; k <= cap; ++k) {
    const bool hit = seminorms[k - 2] >= thresholds[k - 2];
    out.trace.push_back({k, seminorms[k - 2], thresholds[k - 2], hit});
  }
  out.k_star = cap;
  for (int k = cap; k >= 2; --k) {
    if (out.trace[k - 2].hit) {
      out.k_star = k;
      break;
    }
  }
  out.lambda_star = ladder.lambda(out.k_star);
  return out;
}

SingleMachineSelection single_machine_lepskii(const Matrix& gram, const Vector& y,
                                              const Ladder& ladder, double c_lp) {
  if (ladder.k_cap < 2) throw std::invalid_argument("single_machine_lepskii: ladder cap must be >= 2");
  const LocalModelSet models = LocalModelSet::fit(gram, y, ladder);
  const double n = static_cast<double>(models.n());

  std::vector<double> seminorms(ladder.k_cap - 1), thresholds(ladder.k_cap - 1);
  for (int k = 2; k <= ladder.k_cap; ++k) {
    const double data_part = models.difference_values(k).squaredNorm() / n;
    seminorms[k - 2] = data_part + ladder.lambda(k) * models.difference_norm_sq(k);
    const double w = models.w_value(k);
    thresholds[k - 2] = threshold_at(k, c_lp, w * w, ladder);
  }

  SingleMachineSelection out;
  out.selection = select_with_trace(seminorms, thresholds, ladder);
  out.coefficients = models.coefficients(out.selection.k_star);
  return out;
}

double calibrate_clp(const std::vector<double>& grid,
                     const std::function<CalibrationScore(double)>& validation) {
  if (grid.empty()) throw std::invalid_argument("calibrate_clp: empty candidate grid");
  std::vector<CalibrationScore> scores;
  scores.reserve(grid.size());
  bool any_exercised = false;
  for (double candidate : grid) {
    scores.push_back(validation(candidate));
    if (std::isfinite(scores.back().mse) && scores.back().exercised) any_exercised = true;
  }
  double best = std::numeric_limits<double>::quiet_NaN();
  double best_score = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(scores[i].mse)) continue;
    if (any_exercised && !scores[i].exercised) continue;
    if (scores[i].mse < best_score) {
      best_score = scores[i].mse;
      best = grid[i];
    }
  }
  if (!std::isfinite(best_score))
    throw std::runtime_error("calibrate_clp: no candidate produced a finite validation score");
  return best;
}

}  // namespace adkrr
