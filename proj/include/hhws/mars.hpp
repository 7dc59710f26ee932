#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "hhws/data.hpp"
#include "hhws/glm.hpp"
#include "hhws/model.hpp"

namespace hhws {

/// (x_var - knot)_+ when sign = +1, (knot - x_var)_+ when sign = -1.
struct Hinge {
  std::size_t var = 0;
  double knot = 0.0;
  int sign = 1;

  [[nodiscard]] double operator()(double x) const {
    const double v = sign > 0 ? x - knot : knot - x;
    return v > 0.0 ? v : 0.0;
  }
};

/// Product of hinge factors, the intercept (no factor), or a linear covariate column.
struct MarsTerm {
  std::vector<Hinge> factors;
  std::optional<std::size_t> covariate;

  [[nodiscard]] bool is_intercept() const { return factors.empty() && !covariate; }
  [[nodiscard]] bool is_hinge() const { return !factors.empty(); }
  [[nodiscard]] std::size_t degree() const { return factors.size(); }
};

struct MarsConfig {
  std::size_t max_terms = 21;  // intercept plus hinge terms; covariates not counted
  int degree = 2;
  std::size_t min_span = 5;
  std::size_t min_box = 5;
  double knot_penalty = 3.0;
  /// Quasi-Poisson selects knots on log(y + 0.5) and refits on the count scale.
  Family family = Family::QuasiPoisson;
};

struct MarsModel {
  std::vector<MarsTerm> terms;  // terms[0] is the intercept
  Vector coefficients;          // least squares on the working response
  double rss = 0.0;
  double gcv = 0.0;
  /// RSS after each forward step, starting with the intercept/covariate model.
  std::vector<double> rss_path;

  [[nodiscard]] std::size_t knot_count() const;
};

Vector term_values(const MarsTerm& term, const Dataset& data);
Matrix basis_matrix(const MarsModel& model, const Dataset& data);

/// Response the knots are selected on.
Vector working_response(const Dataset& data, Family family);

/// (RSS/n) / (1 - C/n)^2 with C = terms + penalty * knots; infinite when C >= n.
double mars_gcv(double rss, std::size_t n, std::size_t terms, std::size_t knots, double penalty);

MarsModel forward_pass(const Dataset& data, const MarsConfig& cfg);
MarsModel backward_pass(const MarsModel& model, const Dataset& data, const MarsConfig& cfg);

struct MarsRefit {
  MarsModel model;  // may have lost collinear terms
  GlmFit fit;
};

MarsRefit refit_response(const MarsModel& model, const Dataset& data, Family family);

ThresholdSet extract_thresholds_mars(const MarsModel& model, const Dataset& data, const MarsConfig& cfg);

struct MarsResult {
  MarsModel forward;
  MarsRefit refit;
  ThresholdSet thresholds;
};

MarsResult fit_mars(const Dataset& data, const MarsConfig& cfg);

}  // namespace hhws
