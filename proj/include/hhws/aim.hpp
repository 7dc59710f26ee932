#pragma once

#include <cstddef>
#include <vector>

#include "hhws/data.hpp"
#include "hhws/model.hpp"

namespace hhws {

struct AimRule {
  std::size_t var = 0;
  double cut = 0.0;
};

struct AimModel {
  std::vector<AimRule> rules;
  double beta0 = 0.0;
  double beta1 = 0.0;
  /// Squared t statistic of beta1 on the working response.
  double t_squared = 0.0;
  bool degenerate = false;

  [[nodiscard]] std::size_t k() const { return rules.size(); }
  /// Number of rules satisfied by each row.
  [[nodiscard]] Vector index(const Matrix& x) const;
  [[nodiscard]] Vector predict(const Matrix& x) const;
};

struct AimConfig {
  std::size_t max_splits_per_var = 3;
  std::size_t folds = 5;
};

/// Residuals of a least-squares fit of y on [1 | C].
Vector covariate_residual(const Dataset& data);

/// Greedy path for K = 1..K_max on the given working response. The path is
/// shorter when no admissible cut remains; for a constant response it holds a
/// single empty model flagged degenerate.
std::vector<AimModel> fit_aim_path(const Matrix& x, const Vector& response, const AimConfig& cfg);
std::vector<AimModel> fit_aim_path(const Dataset& data, const AimConfig& cfg);

/// Held-out mean squared error for K = 1..K_max over contiguous folds.
std::vector<double> cv_errors(const Dataset& data, const AimConfig& cfg);

AimModel select_k_cv(const Dataset& data, const AimConfig& cfg);

/// Largest cut per variable; variables without a rule are not selected.
ThresholdSet extract_thresholds_aim(const AimModel& model, const std::vector<std::string>& names);

}  // namespace hhws
