#pragma once

#include <cmath>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

namespace hhws {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Family {
  QuasiPoisson,  // log link, variance proportional to the mean
  Gaussian,      // identity link
};

std::string_view to_string(Family f);
Family parse_family(std::string_view name);

struct GlmOptions {
  double tolerance = 1e-10;  // relative deviance change
  int max_iterations = 25;
  bool compute_scores = true;
  /// Forces the dispersion to 1 (coefficients are unaffected).
  bool unit_dispersion = false;
  /// Warm start for IRLS; ignored for the Gaussian family.
  std::optional<Vector> start;
};

/// Result of an IRLS fit. Immutable once returned.
struct GlmFit {
  Family family = Family::Gaussian;
  Vector coefficients;
  double dispersion = 1.0;
  Matrix cov;
  double deviance = 0.0;
  /// Per-observation score contributions x_i (y_i - mu_i), n x k.
  Matrix scores;
  Vector fitted;
  bool converged = false;
  int iterations = 0;

  [[nodiscard]] Eigen::Index n() const { return fitted.size(); }
  [[nodiscard]] Eigen::Index k() const { return coefficients.size(); }
  /// Standard error of coefficient j.
  [[nodiscard]] double std_error(Eigen::Index j) const { return std::sqrt(cov(j, j)); }
};

/// Fits y on `design` (which must contain its own intercept column).
///
/// Throws SingularError when the design is rank deficient at tolerance
/// 1e-10 relative to the largest pivot, DimensionError when shapes disagree or
/// n <= k, and std::invalid_argument for negative quasi-Poisson responses.
/// Non-convergence is reported through `converged`, not thrown.
GlmFit fit_glm(const Matrix& design, const Vector& y, Family family, const GlmOptions& options = {});

/// Inverse-link of design * coefficients.
Vector predict(const GlmFit& fit, const Matrix& design);

/// Unit deviance contribution summed over observations.
double deviance(Family family, const Vector& y, const Vector& mu);

}  // namespace hhws
