#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hhws/data.hpp"
#include "hhws/model.hpp"

namespace hhws {

/// One flag per day: true iff every selected indicator meets its bound.
using AlertSeries = std::vector<bool>;

struct Scores {
  double sensitivity = 0.0;
  double precision = 0.0;
  double f_score = 0.0;
  std::size_t n_alerts = 0;
  std::size_t n_episodes = 0;
  double mean_om = 0.0;
  double coverage = 0.0;
};

/// Throws std::invalid_argument if no indicator is selected or names mismatch.
AlertSeries alerts(const Dataset& data, const ThresholdSet& thresholds);

/// Harmonic mean of sensitivity and precision; 0 when either is 0.
double f_score(double sensitivity, double precision);

/// Sensitivity = TP/(TP+FN) (1 without true days), precision = TP/(TP+FP)
/// (1 without alerts), F as above.
Scores confusion_scores(const AlertSeries& alerts, const std::vector<bool>& truth);

/// Fitted means of a quasi-Poisson regression of y on the calendar covariates.
Vector expected_mortality(const Dataset& data, const SplineSpec& spec, const SeasonWindow& season = {});

/// 100 * (y - em) / em. Throws std::invalid_argument if any em <= 0.
Vector over_mortality(const Vector& y, const Vector& em);

/// Days with OM strictly above the cut point.
std::vector<bool> om_events(const Vector& om, double cut);

/// Alert days at most `gap` calendar days apart share an episode; a change of
/// year always starts a new one.
std::size_t episodes(std::span<const Date> dates, const AlertSeries& alerts, int gap = 3);

/// Mean OM over alert days times the alert fraction; 0 without alerts.
double coverage(const Vector& om, const AlertSeries& alerts);

double mean_over_alerts(const Vector& om, const AlertSeries& alerts);

std::size_t count(const AlertSeries& alerts);

}  // namespace hhws
