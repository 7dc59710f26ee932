#include "hhws/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "hhws/report.hpp"
#include "hhws/stats.hpp"

namespace hhws {

std::vector<Scenario> paper_grid() {
  std::vector<Scenario> out;
  for (int p = 1; p <= 4; ++p) {
    for (double b : {0.1, 0.2, 0.3, 0.5, 1.0}) {
      for (double rho : {0.0, 0.5}) {
        Scenario s;
        s.id = out.size();
        s.p = p;
        s.beta2 = b;
        s.rho = rho;
        out.push_back(s);
      }
    }
  }
  return out;
}

std::vector<Scenario> small_grid() {
  std::vector<Scenario> out;
  for (int p : {1, 2}) {
    for (double b : {0.1, 1.0}) {
      for (double rho : {0.0, 0.5}) {
        Scenario s;
        s.id = out.size();
        s.p = p;
        s.beta2 = b;
        s.rho = rho;
        out.push_back(s);
      }
    }
  }
  return out;
}

double calibrate_threshold(int p, double rho, double target, std::size_t draws, std::uint64_t seed) {
  if (p < 1) throw std::invalid_argument("p must be >= 1");
  if (!(target > 0.0 && target < 1.0)) throw std::invalid_argument("target must lie in (0, 1)");
  // Equicorrelation with one common factor needs rho >= 0.
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in [0, 1)");
  if (p == 1) return normal_quantile(1.0 - target);
  if (rho == 0.0) return normal_quantile(1.0 - std::pow(target, 1.0 / p));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  const double a = std::sqrt(rho), b = std::sqrt(1.0 - rho);
  std::vector<double> mins(draws);
  for (auto& m : mins) {
    const double common = a * z(rng);
    m = std::numeric_limits<double>::infinity();
    for (int j = 0; j < p; ++j) m = std::min(m, common + b * z(rng));
  }
  std::sort(mins.begin(), mins.end());
  const auto prob = [&](double s) {
    const auto below = std::lower_bound(mins.begin(), mins.end(), s) - mins.begin();
    return static_cast<double>(mins.size() - static_cast<std::size_t>(below)) / static_cast<double>(mins.size());
  };
  double lo = -10.0, hi = 10.0;
  if (!(prob(lo) >= target && prob(hi) <= target)) throw std::runtime_error("calibration does not bracket the target");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double pm = prob(mid);
    if (std::abs(pm - target) < 5e-4 && hi - lo < 1e-6) return mid;
    (pm > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> calibrate_thresholds(int p, double rho, double target) {
  return std::vector<double>(static_cast<std::size_t>(p), calibrate_threshold(p, rho, target));
}

std::mt19937_64 replicate_engine(std::uint64_t master, std::uint64_t scenario, std::uint64_t replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(scenario), static_cast<std::uint32_t>(scenario >> 32),
                    static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32)};
  return std::mt19937_64(seq);
}

SimReplicate generate(const Scenario& sc, const std::vector<double>& s, std::mt19937_64& rng) {
  if (static_cast<int>(s.size()) != sc.p) throw std::invalid_argument("threshold count differs from p");
  const auto n = static_cast<Eigen::Index>(sc.n);
  const auto p = static_cast<Eigen::Index>(sc.p);
  std::normal_distribution<double> z;
  const double a = std::sqrt(sc.rho), b = std::sqrt(1.0 - sc.rho);

  SimReplicate out;
  auto& d = out.data;
  d.x.resize(n, p);
  d.y.resize(n);
  d.c.resize(n, 0);
  for (Eigen::Index j = 0; j < p; ++j) d.names.push_back("x" + std::to_string(j + 1));
  const Date start = std::chrono::sys_days{std::chrono::year{2000} / 1 / 1};
  out.truth.resize(sc.n);
  out.s = s;
  for (Eigen::Index i = 0; i < n; ++i) {
    d.dates.push_back(start + std::chrono::days{i});
    const double common = a * z(rng);
    bool all = true;
    double lin = 0.0, excess = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double v = common + b * z(rng);
      d.x(i, j) = v;
      lin += sc.beta1 * v;
      excess += v - s[static_cast<std::size_t>(j)];
      all = all && v >= s[static_cast<std::size_t>(j)];
    }
    out.truth[static_cast<std::size_t>(i)] = all;
    d.y(i) = lin + (all ? sc.beta2 * excess : 0.0) + sc.noise_sd * z(rng);
  }
  return out;
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& task) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

ScoreTable run_study(const std::vector<Scenario>& grid, const StudyOptions& opt) {
  for (const auto& m : opt.methods) {
    if (!is_method(m)) throw std::invalid_argument("unknown method: " + m);
  }
  std::map<std::pair<int, double>, std::vector<double>> calib;
  for (const auto& sc : grid) {
    const auto key = std::make_pair(sc.p, sc.p == 1 ? 0.0 : sc.rho);
    if (!calib.count(key)) calib[key] = calibrate_thresholds(sc.p, sc.rho, sc.target);
  }
  std::vector<ThresholdMethod> fns;
  for (const auto& m : opt.methods) fns.push_back(make_method(m, opt.settings));

  ScoreTable table;
  table.scenarios = grid;
  const std::size_t per_task = opt.methods.size();
  const std::size_t tasks = grid.size() * opt.replicates;
  table.rows.resize(tasks * per_task);

  parallel_for(tasks, opt.workers, [&](std::size_t t) {
    const auto& sc = grid[t / opt.replicates];
    const std::size_t rep = t % opt.replicates;
    auto rng = replicate_engine(opt.seed, sc.id, rep);
    const auto& s = calib.at(std::make_pair(sc.p, sc.p == 1 ? 0.0 : sc.rho));
    const auto sim = generate(sc, s, rng);
    for (std::size_t k = 0; k < per_task; ++k) {
      auto& row = table.rows[t * per_task + k];
      row.scenario = sc.id;
      row.method = opt.methods[k];
      row.replicate = rep;
      try {
        const auto th = fns[k](sim.data);
        if (!th.any_selected()) {
          // No rule means no alert: nothing is detected.
          row.scores = confusion_scores(AlertSeries(sim.data.n(), false), sim.truth);
          row.status = "no_selection";
        } else {
          row.scores = confusion_scores(alerts(sim.data, th), sim.truth);
          row.status = "ok";
        }
      } catch (const std::exception& e) {
        row.status = "failed";
        row.message = e.what();
      }
    }
  });
  return table;
}

std::vector<SummaryRow> summarize(const ScoreTable& table) {
  std::map<std::pair<std::size_t, std::string>, std::vector<const ScoreRow*>> groups;
  std::vector<std::pair<std::size_t, std::string>> order;
  for (const auto& r : table.rows) {
    const auto key = std::make_pair(r.scenario, r.method);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    SummaryRow s;
    s.scenario = key.first;
    s.method = key.second;
    std::vector<double> f, sens, prec;
    for (const auto* r : groups[key]) {
      if (!r->scores) {
        ++s.failed;
        continue;
      }
      if (r->status == "no_selection") ++s.no_selection;
      f.push_back(r->scores->f_score);
      sens.push_back(r->scores->sensitivity);
      prec.push_back(r->scores->precision);
    }
    s.fitted = f.size();
    if (f.empty()) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      s.mean_f = s.f_lo = s.f_hi = s.mean_sensitivity = s.mean_precision = nan;
    } else {
      s.mean_f = mean(f);
      s.mean_sensitivity = mean(sens);
      s.mean_precision = mean(prec);
      s.f_lo = quantile(f, 0.025);
      s.f_hi = quantile(f, 0.975);
    }
    out.push_back(s);
  }
  return out;
}

double mean_f(const ScoreTable& table, std::size_t scenario, const std::string& method) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : table.rows) {
    if (r.scenario == scenario && r.method == method && r.scores) {
      sum += r.scores->f_score;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

namespace {

const Scenario& scenario_by_id(const ScoreTable& t, std::size_t id) {
  for (const auto& s : t.scenarios) {
    if (s.id == id) return s;
  }
  throw std::invalid_argument("unknown scenario id");
}

}  // namespace

void write_scores_csv(std::ostream& out, const ScoreTable& table) {
  write_csv_row(out, {"scenario_id", "p", "beta2", "rho", "method", "replicate", "sensitivity", "precision",
                      "f_score", "status"});
  for (const auto& r : table.rows) {
    const auto& sc = scenario_by_id(table, r.scenario);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    write_csv_row(out, {std::to_string(r.scenario), std::to_string(sc.p), format_number(sc.beta2),
                        format_number(sc.rho), method_label(r.method), std::to_string(r.replicate),
                        format_number(r.scores ? r.scores->sensitivity : nan),
                        format_number(r.scores ? r.scores->precision : nan),
                        format_number(r.scores ? r.scores->f_score : nan), r.status});
  }
}

void write_summary_csv(std::ostream& out, const ScoreTable& table, const std::vector<SummaryRow>& rows) {
  write_csv_row(out, {"scenario_id", "p", "beta2", "rho", "method", "fitted", "failed", "no_selection",
                      "mean_sensitivity", "mean_precision", "mean_f", "f_q025", "f_q975"});
  for (const auto& r : rows) {
    const auto& sc = scenario_by_id(table, r.scenario);
    write_csv_row(out, {std::to_string(r.scenario), std::to_string(sc.p), format_number(sc.beta2),
                        format_number(sc.rho), method_label(r.method), std::to_string(r.fitted),
                        std::to_string(r.failed), std::to_string(r.no_selection),
                        format_number(r.mean_sensitivity), format_number(r.mean_precision),
                        format_number(r.mean_f), format_number(r.f_lo), format_number(r.f_hi)});
  }
}

YearBlockBootstrap::YearBlockBootstrap(const Dataset& data) : data_(data) {
  std::map<int, std::vector<std::size_t>> by_year;
  for (std::size_t i = 0; i < data.dates.size(); ++i) by_year[year_of(data.dates[i])].push_back(i);
  for (auto& [year, rows] : by_year) blocks_.push_back(std::move(rows));
  if (blocks_.empty()) throw std::invalid_argument("bootstrap needs a non-empty dataset");
}

std::vector<std::size_t> YearBlockBootstrap::draw_blocks(std::uint64_t seed, std::size_t b) const {
  auto rng = replicate_engine(seed, 0, b);
  std::uniform_int_distribution<std::size_t> pick(0, blocks_.size() - 1);
  std::vector<std::size_t> out(blocks_.size());
  for (auto& v : out) v = pick(rng);
  return out;
}

Dataset YearBlockBootstrap::replicate(std::uint64_t seed, std::size_t b) const {
  std::vector<std::size_t> rows;
  for (auto k : draw_blocks(seed, b)) rows.insert(rows.end(), blocks_[k].begin(), blocks_[k].end());
  return data_.subset(rows);
}

BootstrapResult bootstrap_summary(const ThresholdMethod& method, const Dataset& data, std::size_t replicates,
                                  std::uint64_t seed, std::size_t workers) {
  const YearBlockBootstrap boot(data);
  BootstrapResult out;
  out.rows.resize(replicates);
  parallel_for(replicates, workers, [&](std::size_t b) {
    auto& row = out.rows[b];
    row.replicate = b;
    try {
      row.thresholds = method(boot.replicate(seed, b));
    } catch (const std::exception& e) {
      row.message = e.what();
    }
  });

  const double nb = static_cast<double>(std::max<std::size_t>(replicates, 1));
  for (std::size_t j = 0; j < data.p(); ++j) {
    BootstrapVariable v;
    v.name = data.names[j];
    std::vector<double> values;
    std::size_t failed = 0, dropped = 0;
    for (const auto& r : out.rows) {
      if (!r.thresholds) {
        ++failed;
      } else if (r.thresholds->bounds[j]) {
        values.push_back(*r.thresholds->bounds[j]);
      } else {
        ++dropped;
      }
    }
    v.failed = static_cast<double>(failed) / nb;
    v.not_selected = static_cast<double>(dropped) / nb;
    v.selected = static_cast<double>(values.size()) / nb;
    if (values.empty()) {
      v.q025 = v.q50 = v.q975 = std::numeric_limits<double>::quiet_NaN();
    } else {
      v.q025 = quantile(values, 0.025);
      v.q50 = quantile(values, 0.5);
      v.q975 = quantile(values, 0.975);
    }
    out.variables.push_back(v);
  }
  return out;
}

}  // namespace hhws
