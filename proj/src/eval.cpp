#include "hhws/eval.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "hhws/error.hpp"

namespace hhws {

AlertSeries alerts(const Dataset& data, const ThresholdSet& thresholds) {
  if (!thresholds.any_selected()) {
    throw std::invalid_argument("threshold set '" + thresholds.method + "' selects no indicator");
  }
  std::vector<std::pair<Eigen::Index, double>> rules;
  for (std::size_t j = 0; j < thresholds.size(); ++j) {
    if (!thresholds.bounds[j]) continue;
    const auto col = thresholds.names.empty() ? j : data.indicator_index(thresholds.names[j]);
    if (col >= data.p()) throw DimensionError("threshold refers to a missing indicator");
    rules.emplace_back(static_cast<Eigen::Index>(col), *thresholds.bounds[j]);
  }
  AlertSeries out(data.n());
  for (std::size_t t = 0; t < data.n(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    out[t] = std::all_of(rules.begin(), rules.end(),
                         [&](const auto& rule) { return data.x(row, rule.first) >= rule.second; });
  }
  return out;
}

double f_score(double sensitivity, double precision) {
  if (sensitivity * precision == 0.0) return 0.0;
  return 2.0 * sensitivity * precision / (sensitivity + precision);
}

Scores confusion_scores(const AlertSeries& alerts, const std::vector<bool>& truth) {
  if (alerts.size() != truth.size()) throw DimensionError("alert and truth series differ in length");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t t = 0; t < alerts.size(); ++t) {
    if (alerts[t] && truth[t]) ++tp;
    else if (alerts[t]) ++fp;
    else if (truth[t]) ++fn;
  }
  Scores s;
  s.sensitivity = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  s.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  s.f_score = f_score(s.sensitivity, s.precision);
  s.n_alerts = tp + fp;
  return s;
}

Vector expected_mortality(const Dataset& data, const SplineSpec& spec, const SeasonWindow& season) {
  const Matrix basis = build_covariates(data.dates, spec, season);
  Matrix design(basis.rows(), basis.cols() + 1);
  design << Vector::Ones(basis.rows()), basis;
  GlmOptions options;
  options.compute_scores = false;
  const GlmFit fit = fit_glm(design, data.y, Family::QuasiPoisson, options);
  return fit.fitted;
}

Vector over_mortality(const Vector& y, const Vector& em) {
  if (y.size() != em.size()) throw DimensionError("observed and expected series differ in length");
  if ((em.array() <= 0.0).any()) throw std::invalid_argument("expected mortality must be > 0");
  return (100.0 * (y.array() - em.array()) / em.array()).matrix();
}

std::vector<bool> om_events(const Vector& om, double cut) {
  std::vector<bool> out(static_cast<std::size_t>(om.size()));
  for (Eigen::Index t = 0; t < om.size(); ++t) out[static_cast<std::size_t>(t)] = om(t) > cut;
  return out;
}

std::size_t episodes(std::span<const Date> dates, const AlertSeries& alerts, int gap) {
  if (dates.size() != alerts.size()) throw DimensionError("dates and alerts differ in length");
  std::size_t count = 0;
  std::optional<Date> previous;
  for (std::size_t t = 0; t < alerts.size(); ++t) {
    if (!alerts[t]) continue;
    const bool merges = previous && year_of(*previous) == year_of(dates[t]) &&
                        (dates[t] - *previous).count() >= 0 && (dates[t] - *previous).count() <= gap;
    if (!merges) ++count;
    previous = dates[t];
  }
  return count;
}

double mean_over_alerts(const Vector& om, const AlertSeries& alerts) {
  double total = 0.0;
  std::size_t m = 0;
  for (std::size_t t = 0; t < alerts.size(); ++t) {
    if (!alerts[t]) continue;
    total += om(static_cast<Eigen::Index>(t));
    ++m;
  }
  return m == 0 ? 0.0 : total / static_cast<double>(m);
}

double coverage(const Vector& om, const AlertSeries& alerts) {
  if (static_cast<std::size_t>(om.size()) != alerts.size()) {
    throw DimensionError("over-mortality and alerts differ in length");
  }
  if (alerts.empty()) return 0.0;
  return mean_over_alerts(om, alerts) * static_cast<double>(count(alerts)) /
         static_cast<double>(alerts.size());
}

std::size_t count(const AlertSeries& alerts) {
  return static_cast<std::size_t>(std::count(alerts.begin(), alerts.end(), true));
}

}  // namespace hhws
