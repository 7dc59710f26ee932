#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hhws/data.hpp"
#include "hhws/glm.hpp"

namespace hhws {

/// Indicator(s) entering the local (node/box) regression as the slope term.
///
/// By default every indicator column gets its own slope. With `mean` set, the
/// slope term is the row mean of `columns` (all indicators when empty), the
/// single derived indicator used when indicators are strongly collinear.
struct SlopeVariable {
  std::vector<std::size_t> columns;
  bool mean = false;

  /// Copy with an explicit column list for `p` indicators.
  [[nodiscard]] SlopeVariable bind(std::size_t p) const;
  /// Number of slope columns in the design; needs a bound variable.
  [[nodiscard]] std::size_t width() const;
  [[nodiscard]] Matrix values(const Matrix& x) const;
};

/// Local regression fitted inside nodes and boxes: y ~ 1 + slope + C.
struct LocalModel {
  Family family = Family::QuasiPoisson;
  SlopeVariable slope;

  /// [1 | slope columns | covariates] for every row of `data`.
  [[nodiscard]] Matrix design(const Dataset& data) const;

  /// Fits on the selected rows of a prebuilt full design.
  [[nodiscard]] GlmFit fit(const Matrix& full_design, const Vector& y,
                           std::span<const std::size_t> rows, const GlmOptions& options = {}) const;

  /// Copy whose slope variable is bound to `p` indicators.
  [[nodiscard]] LocalModel bind(std::size_t p) const { return {family, slope.bind(p)}; }

  /// Summed slope coefficients of a fit made on `design`.
  [[nodiscard]] double slope_of(const GlmFit& fit) const;
};

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows);
Vector select_rows(const Vector& v, std::span<const std::size_t> rows);

/// Per-indicator lower alert bounds; `std::nullopt` marks a discarded indicator.
struct ThresholdSet {
  std::string method;
  std::vector<std::string> names;
  std::vector<std::optional<double>> bounds;
  /// Free-form markers such as "relaxed" or "degenerate".
  std::vector<std::string> flags;

  ThresholdSet() = default;
  ThresholdSet(std::string method_name, std::vector<std::string> indicator_names);

  [[nodiscard]] bool any_selected() const;
  [[nodiscard]] bool has_flag(const std::string& flag) const;
  [[nodiscard]] std::size_t size() const { return bounds.size(); }
};

}  // namespace hhws
