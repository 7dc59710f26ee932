#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "hhws/data.hpp"
#include "hhws/glm.hpp"
#include "hhws/model.hpp"

namespace hhws {

struct SegmentedConfig {
  std::size_t init_count = 10;
  /// Hinge coefficients with |t| below this are dropped.
  double min_abs_t = 1.0;
  /// Observations required beyond each breakpoint and between neighbours.
  std::size_t min_obs = 5;
  int max_iterations = 50;
  double tolerance = 1e-4;  // relative to each variable's range
  Family family = Family::QuasiPoisson;
};

struct SegmentedFit {
  std::vector<std::vector<double>> breakpoints;  // per variable, sorted
  /// Per variable: slope of the first segment followed by each hinge coefficient.
  std::vector<std::vector<double>> slopes;
  bool converged = false;
  int iterations = 0;
};

/// One linearisation step for a single breakpoint: psi + gamma / beta.
double segmented_update(double psi, double gamma, double beta);

SegmentedFit fit_segmented_model(const Dataset& data, const SegmentedConfig& cfg);
/// Largest surviving breakpoint per variable.
ThresholdSet fit_segmented(const Dataset& data, const SegmentedConfig& cfg = {});

struct CurveConfig {
  int df = 4;
  std::size_t grid = 100;
  double z = 1.959963984540054;  // two-sided 95%
  Family family = Family::QuasiPoisson;
};

struct CurveCI {
  std::vector<double> grid;
  std::vector<double> estimate;  // f(x) - f(MMT)
  std::vector<double> lower;
  std::vector<double> upper;
  double mmt = 0.0;
  std::optional<double> threshold;
};

/// Additive natural-spline fit of y on every indicator plus C; one curve per indicator.
std::vector<CurveCI> fit_curves(const Dataset& data, const CurveConfig& cfg);
ThresholdSet curve_ci_threshold(const Dataset& data, const CurveConfig& cfg = {});

}  // namespace hhws
