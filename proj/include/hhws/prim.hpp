#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "hhws/data.hpp"
#include "hhws/model.hpp"

namespace hhws {

/// Lower-bounded box over the indicators. A row is a member iff x_j >= lower_j for all j.
struct Box {
  std::vector<double> lower;
  std::vector<std::size_t> members;

  [[nodiscard]] bool contains(const Matrix& x, Eigen::Index row) const;
};

struct PrimConfig {
  double alpha = 0.05;
  /// Minimum support; the effective value is max(5/n, phi0).
  double phi0 = 0.0;
  bool paste = true;
  double paste_alpha = 0.01;
  LocalModel model;
};

struct PeelStep {
  Box box;
  double support = 1.0;
  double slope = 0.0;
  std::optional<std::size_t> peeled_variable;
  std::size_t peeled_count = 0;
};

struct PeelingTrajectory {
  std::vector<PeelStep> steps;  // steps[0] is the full data
  std::vector<std::string> names;
  std::size_t n = 0;
  /// Set when peeling stopped because every eligible candidate failed to fit.
  bool ended_early = false;
};

PeelingTrajectory peel(const Dataset& data, const PrimConfig& cfg);

/// Rate of slope increase per unit of support removed, for steps 1..K.
/// rates[k-1] belongs to step k.
std::vector<double> peeling_rates(std::span<const double> support, std::span<const double> slope);

/// Index of the step with the largest rate (earliest on ties). Throws
/// std::invalid_argument for fewer than two steps or when every support
/// difference is zero.
std::size_t select_step(std::span<const double> support, std::span<const double> slope);
std::size_t select_step(const PeelingTrajectory& traj);

/// Finite lower bounds of the selected box.
ThresholdSet select_box(const PeelingTrajectory& traj);

/// Lowers one bound at a time while the in-box slope strictly increases.
Box paste(const Box& box, const Dataset& data, const PrimConfig& cfg);

struct PrimResult {
  PeelingTrajectory trajectory;
  std::size_t selected_step = 0;
  Box box;  // after pasting
  double slope = 0.0;
  ThresholdSet thresholds;
};

PrimResult fit_prim(const Dataset& data, const PrimConfig& cfg);

ThresholdSet thresholds_from_box(const Box& box, const std::vector<std::string>& names,
                                 const std::string& method = "PRIM");

/// step,support,slope,rate,peeled,<lower_name>... one line per step.
void write_trajectory_csv(std::ostream& out, const PeelingTrajectory& traj);

}  // namespace hhws
