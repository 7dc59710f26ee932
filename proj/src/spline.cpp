#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "hhws/data.hpp"
#include "hhws/error.hpp"
#include "hhws/stats.hpp"

namespace hhws {

// Truncated-power construction of the natural cubic spline basis on the unit
// interval [lo, hi] -> [0, 1]: columns u and d_k(u) - d_{K-1}(u), where
// d_k(u) = ((u - k_k)^3_+ - (u - k_K)^3_+) / (k_K - k_k). Every column is
// linear outside [0, 1].

NaturalSplineBasis::NaturalSplineBasis(std::span<const double> x, int df) : df_(df) {
  if (df < 1) throw std::invalid_argument("spline df must be >= 1");
  const std::set<double> distinct(x.begin(), x.end());
  if (distinct.size() < static_cast<std::size_t>(df) + 2) {
    throw RankError("natural spline with df=" + std::to_string(df) + " needs at least " +
                    std::to_string(df + 2) + " distinct values, got " +
                    std::to_string(distinct.size()));
  }
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  lo_ = sorted.front();
  hi_ = sorted.back();
  for (int k = 1; k < df; ++k) {
    interior_.push_back(quantile_sorted(sorted, static_cast<double>(k) / df));
  }
}

Matrix NaturalSplineBasis::evaluate(std::span<const double> x) const {
  const double width = hi_ - lo_;
  std::vector<double> knots{0.0};
  for (double k : interior_) knots.push_back((k - lo_) / width);
  knots.push_back(1.0);
  const std::size_t last = knots.size() - 1;

  const auto cube_plus = [](double v) { return v > 0.0 ? v * v * v : 0.0; };
  const auto d = [&](std::size_t k, double u) {
    return (cube_plus(u - knots[k]) - cube_plus(u - knots[last])) / (knots[last] - knots[k]);
  };

  Matrix out(static_cast<Eigen::Index>(x.size()), df_);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = (x[i] - lo_) / width;
    const auto r = static_cast<Eigen::Index>(i);
    out(r, 0) = u;
    for (int k = 1; k < df_; ++k) {
      // k-th column pairs knot k-1 with the penultimate knot.
      out(r, k) = d(static_cast<std::size_t>(k - 1), u) - d(last - 1, u);
    }
  }
  return out;
}

Matrix natural_spline_basis(std::span<const double> x, int df) {
  return NaturalSplineBasis(x, df).evaluate(x);
}

}  // namespace hhws
