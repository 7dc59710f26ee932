#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hhws/date.hpp"

namespace hhws {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Aligned daily series: response, indicators and adjustment covariates.
///
/// Row t of `y`, `x` and `c` always refers to `dates[t]`. Simulated datasets
/// carry a real-valued response; ingested datasets carry non-negative counts.
struct Dataset {
  std::vector<Date> dates;
  Vector y;
  Matrix x;  // n x p indicators
  Matrix c;  // n x q covariates (q may be 0)
  std::vector<std::string> names;
  std::vector<std::string> covariate_names;

  [[nodiscard]] std::size_t n() const { return static_cast<std::size_t>(y.size()); }
  [[nodiscard]] std::size_t p() const { return static_cast<std::size_t>(x.cols()); }
  [[nodiscard]] std::size_t q() const { return static_cast<std::size_t>(c.cols()); }

  /// Throws std::invalid_argument when shapes disagree or values are not finite.
  void validate() const;

  /// Rows in the given order (indices may repeat).
  [[nodiscard]] Dataset subset(std::span<const std::size_t> rows) const;

  /// Indicator column by name; throws SchemaError if absent.
  [[nodiscard]] std::size_t indicator_index(const std::string& name) const;
};

/// Convex weights for lags 0..L.
class LagWeights {
 public:
  explicit LagWeights(std::vector<double> weights);
  [[nodiscard]] std::span<const double> weights() const { return weights_; }
  [[nodiscard]] std::size_t max_lag() const { return weights_.size() - 1; }

 private:
  std::vector<double> weights_;
};

struct SplineSpec {
  int df_season = 4;
  double df_per_decade = 1.0;
};

struct CsvSchema {
  std::string date_column = "date";
  std::string count_column = "y";
  std::vector<std::string> indicator_columns;
  std::vector<std::string> covariate_columns;
};

/// Reads a UTF-8 CSV with a header row. Rows with an empty or `NA` mapped cell
/// are dropped; rows outside `season` are dropped; the result is sorted by date.
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema,
                 const SeasonWindow& season = {});

/// out[t] = sum_l w[l] * series[t + L - l]; the output is L elements shorter
/// than the input (the first L days lack history).
std::vector<double> lagged_indicator(std::span<const double> series, const LagWeights& w);

/// Replaces every indicator column by its lagged weighted average. Lagging runs
/// over runs of consecutive calendar days; the first L days of each run are
/// dropped from every column.
Dataset apply_lags(const Dataset& data, const LagWeights& w);

/// Natural cubic spline with interior knots at equally spaced quantiles.
class NaturalSplineBasis {
 public:
  NaturalSplineBasis(std::span<const double> x, int df);

  [[nodiscard]] int df() const { return df_; }
  [[nodiscard]] double lower_boundary() const { return lo_; }
  [[nodiscard]] double upper_boundary() const { return hi_; }
  [[nodiscard]] const std::vector<double>& interior_knots() const { return interior_; }

  /// Basis columns at arbitrary points; linear beyond the boundary knots.
  [[nodiscard]] Matrix evaluate(std::span<const double> x) const;

 private:
  int df_;
  double lo_;
  double hi_;
  std::vector<double> interior_;
};

Matrix natural_spline_basis(std::span<const double> x, int df);

/// Day-of-season spline with `df_season` columns followed by a year trend with
/// ceil(decades * df_per_decade) columns. The trend is omitted for one year.
Matrix build_covariates(std::span<const Date> dates, const SplineSpec& spec,
                        const SeasonWindow& season = {});

/// Number of year-trend columns build_covariates produces for these dates.
int year_trend_df(std::span<const Date> dates, const SplineSpec& spec);

/// Appends build_covariates columns to `data.c`.
Dataset with_calendar_covariates(Dataset data, const SplineSpec& spec,
                                 const SeasonWindow& season = {});

}  // namespace hhws
