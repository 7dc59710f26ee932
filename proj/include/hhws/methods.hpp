#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hhws/data.hpp"
#include "hhws/glm.hpp"
#include "hhws/model.hpp"

namespace hhws {

using ThresholdMethod = std::function<ThresholdSet(const Dataset&)>;

struct MethodSettings {
  Family family = Family::QuasiPoisson;
  /// Slope columns of the node/box model; empty means every indicator.
  std::vector<std::size_t> slope_columns;
  /// Whether the slope columns enter as their mean. Unset: MOB fits one
  /// slope per column, PRIM uses the mean.
  std::optional<bool> slope_mean;
  std::size_t min_node = 5;
  double prim_alpha = 0.05;
  bool prim_paste = true;
  std::size_t mars_max_terms = 21;
  int mars_degree = 2;
  std::size_t aim_max_splits = 3;
  std::size_t aim_folds = 5;
  std::size_t segmented_init = 10;
  int gam_df = 4;
};

/// Registered keys: mob, mars, prim, aim, segmented, gam.
const std::vector<std::string>& method_keys();
bool is_method(std::string_view key);
/// Display name used in outputs (MOB, MARS, ...).
std::string method_label(std::string_view key);
ThresholdMethod make_method(std::string_view key, const MethodSettings& settings);

}  // namespace hhws
