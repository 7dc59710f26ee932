#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "helpers.hpp"
#include "hhws/sim.hpp"

using namespace hhws;
using testing::day;

namespace {

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

// `years` summers of `days` consecutive days; x counts rows.
Dataset yearly(int years, int days, std::size_t p = 1) {
  Dataset d;
  for (int y = 0; y < years; ++y) {
    for (int k = 0; k < days; ++k) d.dates.push_back(day(2000 + y, 6, 1) + std::chrono::days{k});
  }
  const auto n = static_cast<Eigen::Index>(d.dates.size());
  d.x.resize(n, static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d.x.cols(); ++j) d.x(i, j) = static_cast<double>(i) + 0.5 * static_cast<double>(j);
  }
  d.y = Vector::LinSpaced(n, 0, 1);
  d.c.resize(n, 0);
  for (std::size_t j = 0; j < p; ++j) d.names.push_back("x" + std::to_string(j + 1));
  return d;
}

ThresholdSet max_of_first(const Dataset& d) {
  ThresholdSet t("max", d.names);
  t.bounds[0] = d.x.col(0).maxCoeff();
  return t;
}

}  // namespace

TEST_CASE("scenario grids") {
  const auto grid = paper_grid();
  CHECK(grid.size() == 40);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(grid[i].id == i);
  const auto small = small_grid();
  CHECK(small.size() == 8);
  CHECK(small[0].p == 1);
  CHECK(small[7].p == 2);
  CHECK(small[7].beta2 == 1.0);
  CHECK(small[7].rho == 0.5);
}

TEST_CASE("threshold calibration") {
  CHECK(std::abs(calibrate_threshold(1, 0.0, 0.015) - 2.170) <= 0.001);
  CHECK(calibrate_threshold(1, 0.0, 0.015) == doctest::Approx(normal_quantile(0.985)).epsilon(1e-10));
  const double indep = calibrate_threshold(2, 0.0, 0.015);
  CHECK(indep == doctest::Approx(normal_quantile(1.0 - std::sqrt(0.015))).epsilon(1e-10));
  CHECK(std::abs(indep - 1.162) < 0.001);
  const double corr = calibrate_threshold(2, 0.5, 0.015);
  CHECK(corr > indep);
  CHECK(corr < calibrate_threshold(1, 0.0, 0.015));
  CHECK(calibrate_threshold(3, 0.0, 0.015) < indep);
  CHECK(calibrate_threshold(3, 0.5, 0.015) < corr);
  CHECK(calibrate_thresholds(3, 0.5, 0.015).size() == 3);
}

TEST_CASE("truth fraction over a million rows") {
  for (const auto& [p, rho] : {std::pair{2, 0.0}, std::pair{2, 0.5}, std::pair{3, 0.5}}) {
    Scenario sc;
    sc.p = p;
    sc.rho = rho;
    sc.n = 1'000'000;
    auto rng = replicate_engine(99, 0, 0);
    const auto rep = generate(sc, calibrate_thresholds(p, rho, 0.015), rng);
    const double frac = static_cast<double>(std::count(rep.truth.begin(), rep.truth.end(), true)) / 1e6;
    CHECK(std::abs(frac - 0.015) <= 0.001);
  }
}

TEST_CASE("extreme term vanishes off the joint set (property)") {
  Scenario sc;
  sc.p = 2;
  sc.rho = 0.5;
  sc.beta2 = 1.0;
  sc.noise_sd = 0.0;
  const std::vector<double> s{0.3, 0.2};
  auto rng = replicate_engine(1, 2, 3);
  const auto rep = generate(sc, s, rng);
  CHECK(rep.data.names == std::vector<std::string>{"x1", "x2"});
  CHECK(rep.data.q() == 0);
  CHECK(rep.data.dates.front() == day(2000, 1, 1));
  for (Eigen::Index i = 0; i < rep.data.y.size(); ++i) {
    const double lin = rep.data.x.row(i).sum();
    const double extreme = rep.data.y(i) - lin;
    if (rep.truth[static_cast<std::size_t>(i)]) {
      CHECK(extreme == doctest::Approx(rep.data.x(i, 0) - 0.3 + rep.data.x(i, 1) - 0.2).epsilon(1e-12));
    } else {
      CHECK(std::abs(extreme) < 1e-12);
    }
  }

  // Same seed, same bits.
  auto a = replicate_engine(1, 2, 3), b = replicate_engine(1, 2, 3), c = replicate_engine(1, 2, 4);
  const auto ra = generate(sc, s, a), rb = generate(sc, s, b), rc = generate(sc, s, c);
  CHECK(ra.data.x == rb.data.x);
  CHECK(ra.data.y == rb.data.y);
  CHECK(ra.data.x != rc.data.x);
}

TEST_CASE("without the extreme term the regression recovers unit slopes") {
  Scenario sc;
  sc.p = 3;
  sc.rho = 0.5;
  sc.beta2 = 0.0;
  sc.n = 20000;
  auto rng = replicate_engine(5, 0, 0);
  const auto rep = generate(sc, {0, 0, 0}, rng);
  Matrix design(rep.data.x.rows(), 4);
  design << Vector::Ones(rep.data.x.rows()), rep.data.x;
  const auto fit = fit_glm(design, rep.data.y, Family::Gaussian);
  for (Eigen::Index j = 1; j < 4; ++j) CHECK(std::abs(fit.coefficients(j) - 1.0) < 0.05);
}

TEST_CASE("study cardinality, aggregation and invariances") {
  auto grid = small_grid();
  grid.resize(1);
  StudyOptions opt;
  opt.replicates = 2;
  opt.methods = {"prim", "aim"};
  opt.seed = 3;
  const auto table = run_study(grid, opt);
  CHECK(table.rows.size() == 4);

  double total = 0;
  std::size_t m = 0;
  for (const auto& r : table.rows) {
    if (r.method == "prim" && r.scores) {
      total += r.scores->f_score;
      ++m;
    }
  }
  CHECK(mean_f(table, 0, "prim") == doctest::Approx(total / static_cast<double>(m)).epsilon(1e-15));

  const auto summary = summarize(table);
  CHECK(summary.size() == 2);
  for (const auto& s : summary) CHECK(s.fitted + s.failed == 2);
}

TEST_CASE("study output is independent of workers and method order (property)") {
  auto grid = small_grid();
  grid.resize(4);
  StudyOptions opt;
  opt.replicates = 3;
  opt.methods = {"mob", "prim", "aim", "mars"};
  opt.seed = 11;
  const auto serial = run_study(grid, opt);
  opt.workers = 3;
  const auto parallel = run_study(grid, opt);
  std::ostringstream a, b;
  write_scores_csv(a, serial);
  write_scores_csv(b, parallel);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("scenario_id,p,beta2,rho,method,replicate,sensitivity,precision,f_score,status\n", 0) == 0);

  opt.methods = {"aim", "mars", "prim", "mob"};
  const auto reordered = run_study(grid, opt);
  for (const auto& r : serial.rows) {
    const auto match = std::find_if(reordered.rows.begin(), reordered.rows.end(), [&](const ScoreRow& o) {
      return o.scenario == r.scenario && o.replicate == r.replicate && o.method == r.method;
    });
    REQUIRE(match != reordered.rows.end());
    CHECK(match->status == r.status);
    if (r.scores) CHECK(match->scores->f_score == r.scores->f_score);
  }
}

TEST_CASE("year-block bootstrap") {
  const Dataset one = yearly(1, 30);
  const YearBlockBootstrap single(one);
  CHECK(single.years() == 1);
  for (std::size_t b = 0; b < 5; ++b) {
    const auto r = single.replicate(7, b);
    CHECK(r.x == one.x);
    CHECK(r.dates == one.dates);
  }
  const auto quantiles = bootstrap_summary(max_of_first, one, 20, 7);
  CHECK(quantiles.variables[0].q025 == quantiles.variables[0].q975);

  const Dataset four = yearly(4, 10);
  const YearBlockBootstrap boot(four);
  CHECK(boot.years() == 4);
  CHECK(boot.draw_blocks(3, 17) == boot.draw_blocks(3, 17));
  const auto r = boot.replicate(3, 17);
  const auto blocks = boot.draw_blocks(3, 17);
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(r.x(static_cast<Eigen::Index>(10 * k + i), 0) == static_cast<double>(10 * blocks[k] + i));
    }
  }

  std::vector<std::vector<int>> hits(4, std::vector<int>(4, 0));
  std::vector<int> per_year(4, 0);
  for (std::size_t b = 0; b < 10000; ++b) {
    const auto drawn = boot.draw_blocks(42, b);
    for (std::size_t slot = 0; slot < 4; ++slot) {
      ++hits[slot][drawn[slot]];
      ++per_year[drawn[slot]];
    }
  }
  // Pooled over slots the sd is 0.0022; a single slot cell has sd 0.0043.
  for (int h : per_year) CHECK(std::abs(h / 40000.0 - 0.25) <= 0.01);
  for (const auto& slot : hits) {
    for (int h : slot) CHECK(std::abs(h / 10000.0 - 0.25) <= 0.015);
  }
}

TEST_CASE("bootstrap summary partitions the replicates") {
  const Dataset d = yearly(5, 20, 2);
  const ThresholdMethod flaky = [](const Dataset& data) {
    ThresholdSet t("flaky", data.names);
    const double top = data.x.col(0).maxCoeff();
    if (static_cast<int>(top) % 3 == 0) throw std::runtime_error("boom");
    if (static_cast<int>(top) % 3 == 1) t.bounds[0] = top;
    return t;
  };
  const auto res = bootstrap_summary(flaky, d, 200, 9);
  CHECK(res.rows.size() == 200);
  for (const auto& v : res.variables) {
    CHECK(v.selected + v.not_selected + v.failed == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v.selected >= 0);
    CHECK(v.not_selected >= 0);
  }
  CHECK(res.variables[1].selected == 0.0);
  CHECK(std::isnan(res.variables[1].q50));

  const auto again = bootstrap_summary(flaky, d, 200, 9, 3);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(again.variables[j].failed == res.variables[j].failed);
    CHECK(again.variables[j].selected == res.variables[j].selected);
  }
}

TEST_CASE("parallel_for visits every index once") {
  std::vector<int> seen(1000, 0);
  parallel_for(1000, 4, [&](std::size_t i) { seen[i] += 1; });
  CHECK(std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; }));
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 5) throw std::runtime_error("x");
                  }),
                  std::runtime_error);
}
