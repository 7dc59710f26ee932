#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hhws/data.hpp"
#include "hhws/glm.hpp"
#include "hhws/model.hpp"

namespace hhws {

struct MobConfig {
  double alpha_test = 0.05;
  std::size_t min_node = 5;
  /// Indicator columns searched for splits; empty means all.
  std::vector<std::size_t> split_vars;
  LocalModel model;
};

struct InstabilityTest {
  double statistic = 0.0;
  double p_value = 1.0;
  /// Score directions dropped because the score covariance is singular there.
  std::size_t dropped_components = 0;
};

/// Survival function of sup |B(t)| for a Brownian bridge B on [0, 1].
double brownian_bridge_sup_sf(double x);

/// Score-based fluctuation test along `order` (a permutation of 0..n-1).
///
/// Scores are centred, decorrelated with the inverse square root of their
/// covariance and cumulated along the ordering. For each component the
/// statistic is the largest squared partial sum over cuts leaving at least
/// `min_node` observations on both sides; components are Bonferroni-combined.
InstabilityTest instability_test(const Matrix& scores, std::span<const std::size_t> order,
                                 std::size_t min_node);

struct MobNode {
  std::vector<std::size_t> rows;
  std::optional<GlmFit> fit;
  double slope = 0.0;
  int depth = 0;
  /// Per split variable, in `MobConfig::split_vars` order; empty when untested.
  std::vector<InstabilityTest> tests;
  // Internal nodes only: rows with x[split_var] >= split_value go right.
  std::optional<std::size_t> split_var;
  double split_value = 0.0;
  int left = -1;
  int right = -1;
  int parent = -1;

  [[nodiscard]] bool terminal() const { return left < 0; }
};

struct MobTree {
  std::vector<MobNode> nodes;  // nodes[0] is the root
  std::vector<std::string> names;
  std::vector<std::size_t> split_vars;

  [[nodiscard]] std::vector<std::size_t> terminal_nodes() const;
};

MobTree grow(const Dataset& data, const MobConfig& cfg);

/// Lower bounds crossed on the path to the terminal node with the steepest slope.
ThresholdSet extract_thresholds(const MobTree& tree);

}  // namespace hhws
