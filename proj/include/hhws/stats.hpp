#pragma once

#include <span>
#include <vector>

namespace hhws {

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `values` need not be sorted.
double quantile(std::span<const double> values, double prob);

/// Same, on already sorted input.
double quantile_sorted(std::span<const double> sorted, double prob);

double mean(std::span<const double> values);

double normal_cdf(double z);
double normal_quantile(double prob);

}  // namespace hhws
