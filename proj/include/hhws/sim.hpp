#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "hhws/data.hpp"
#include "hhws/eval.hpp"
#include "hhws/methods.hpp"
#include "hhws/model.hpp"

namespace hhws {

struct Scenario {
  std::size_t id = 0;
  int p = 1;
  double beta2 = 1.0;
  double rho = 0.0;
  std::size_t n = 1000;
  double beta1 = 1.0;
  double noise_sd = 1.0;
  double target = 0.015;
};

/// p in 1..4, beta2 in {0.1, 0.2, 0.3, 0.5, 1}, rho in {0, 0.5}: 40 scenarios.
std::vector<Scenario> paper_grid();
/// p in {1, 2}, beta2 in {0.1, 1}, rho in {0, 0.5}.
std::vector<Scenario> small_grid();

inline constexpr std::uint64_t kCalibrationSeed = 20240515;

/// Common bound s with P(min_j X_j >= s) = target for an equicorrelated
/// standard normal vector. Closed form for p = 1 or rho = 0, otherwise
/// bisection on a fixed Monte Carlo sample of `draws` minima.
double calibrate_threshold(int p, double rho, double target, std::size_t draws = 1'000'000,
                           std::uint64_t seed = kCalibrationSeed);
std::vector<double> calibrate_thresholds(int p, double rho, double target);

struct SimReplicate {
  Dataset data;  // no covariates
  std::vector<double> s;
  std::vector<bool> truth;  // every x_j >= s_j
};

/// Engine seeded from (master, scenario, replicate) only.
std::mt19937_64 replicate_engine(std::uint64_t master, std::uint64_t scenario, std::uint64_t replicate);

SimReplicate generate(const Scenario& sc, const std::vector<double>& s, std::mt19937_64& rng);

struct ScoreRow {
  std::size_t scenario = 0;
  std::string method;
  std::size_t replicate = 0;
  std::optional<Scores> scores;  // empty when the fit failed
  std::string status;            // ok, no_selection or failed
  std::string message;
};

struct ScoreTable {
  std::vector<Scenario> scenarios;
  std::vector<ScoreRow> rows;
};

struct StudyOptions {
  std::size_t replicates = 100;
  std::vector<std::string> methods;  // registry keys
  MethodSettings settings = [] {
    MethodSettings s;
    s.family = Family::Gaussian;
    return s;
  }();
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

/// Rows are ordered by scenario, replicate, method regardless of `workers`.
ScoreTable run_study(const std::vector<Scenario>& grid, const StudyOptions& opt);

struct SummaryRow {
  std::size_t scenario = 0;
  std::string method;
  std::size_t fitted = 0;
  std::size_t failed = 0;
  std::size_t no_selection = 0;
  double mean_sensitivity = 0.0;
  double mean_precision = 0.0;
  double mean_f = 0.0;
  double f_lo = 0.0;  // 2.5% quantile
  double f_hi = 0.0;  // 97.5% quantile
};

std::vector<SummaryRow> summarize(const ScoreTable& table);
/// Mean F of one method in one scenario over non-missing rows (NaN if none).
double mean_f(const ScoreTable& table, std::size_t scenario, const std::string& method);

void write_scores_csv(std::ostream& out, const ScoreTable& table);
void write_summary_csv(std::ostream& out, const ScoreTable& table, const std::vector<SummaryRow>& rows);

/// Resamples whole years with replacement, concatenated in draw order.
class YearBlockBootstrap {
 public:
  explicit YearBlockBootstrap(const Dataset& data);

  [[nodiscard]] std::size_t years() const { return blocks_.size(); }
  /// Block indices (positions in year order) drawn for replicate `b`.
  [[nodiscard]] std::vector<std::size_t> draw_blocks(std::uint64_t seed, std::size_t b) const;
  [[nodiscard]] Dataset replicate(std::uint64_t seed, std::size_t b) const;

 private:
  const Dataset& data_;
  std::vector<std::vector<std::size_t>> blocks_;
};

struct BootstrapRow {
  std::size_t replicate = 0;
  std::optional<ThresholdSet> thresholds;  // empty on failure
  std::string message;
};

struct BootstrapVariable {
  std::string name;
  double q025 = 0.0, q50 = 0.0, q975 = 0.0;  // NaN when never selected
  double selected = 0.0;
  double not_selected = 0.0;
  double failed = 0.0;
};

struct BootstrapResult {
  std::vector<BootstrapRow> rows;
  std::vector<BootstrapVariable> variables;
};

BootstrapResult bootstrap_summary(const ThresholdMethod& method, const Dataset& data, std::size_t replicates,
                                  std::uint64_t seed, std::size_t workers = 1);

/// Runs task(i) for i in [0, count) on `workers` threads; the first exception is rethrown.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& task);

}  // namespace hhws
