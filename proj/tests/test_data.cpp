#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/SVD>

#include "helpers.hpp"
#include "hhws/data.hpp"
#include "hhws/error.hpp"

using namespace hhws;
using testing::day;
using testing::temp_file;

namespace {

CsvSchema xy_schema() {
  CsvSchema s;
  s.indicator_columns = {"x1"};
  return s;
}

// R^2 of a least-squares fit of v on the columns of a, by SVD.
double r_squared(const Matrix& a, const Vector& v) {
  const Vector fit = a * a.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(v);
  const double tss = (v.array() - v.mean()).square().sum();
  return 1.0 - (v - fit).squaredNorm() / tss;
}

}  // namespace

TEST_CASE("load_csv reads a well-formed file") {
  const auto path = temp_file("ok.csv", "date,y,x1\n2001-06-01,3,20.5\n2001-06-02,4,21\n2001-06-03,0,19.25\n");
  const Dataset d = load_csv(path, xy_schema());
  CHECK(d.n() == 3);
  CHECK(d.p() == 1);
  CHECK(d.q() == 0);
  CHECK(d.y(1) == 4.0);
  CHECK(d.x(2, 0) == 19.25);
  CHECK(d.names == std::vector<std::string>{"x1"});
}

TEST_CASE("load_csv reports the offending row") {
  const auto path = temp_file("neg.csv", "date,y,x1\n2001-06-01,3,20\n2001-06-02,-2,21\n");
  try {
    (void)load_csv(path, xy_schema());
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 2);
  }
  CHECK_THROWS_AS(load_csv(temp_file("txt.csv", "date,y,x1\n2001-06-01,3,warm\n"), xy_schema()), ParseError);
  CHECK_THROWS_AS(load_csv(temp_file("frac.csv", "date,y,x1\n2001-06-01,2.5,20\n"), xy_schema()), ParseError);
  CHECK_THROWS_AS(load_csv(temp_file("date.csv", "date,y,x1\n2001-02-30,2,20\n"), xy_schema()), ParseError);
}

TEST_CASE("load_csv schema errors") {
  CHECK_THROWS_AS(load_csv(temp_file("nocol.csv", "date,y,tmax\n2001-06-01,3,20\n"), xy_schema()), SchemaError);
  CHECK_THROWS_AS(load_csv(temp_file("dup.csv", "date,y,x1\n2001-06-01,3,20\n2001-06-01,4,21\n"), xy_schema()),
                  SchemaError);
}

TEST_CASE("load_csv drops missing cells and out-of-season days") {
  const auto path = temp_file("gaps.csv",
                              "date,y,x1\n2001-04-30,3,20\n2001-06-01,3,NA\n2001-06-02,,21\n"
                              "2001-06-03,5,22\n2001-10-01,1,10\n");
  const Dataset d = load_csv(path, xy_schema());
  REQUIRE(d.n() == 1);
  CHECK(d.dates[0] == day(2001, 6, 3));
}

TEST_CASE("load_csv sorts shuffled dates") {
  std::mt19937_64 rng(5);
  std::vector<int> offsets(30);
  std::iota(offsets.begin(), offsets.end(), 0);
  for (int rep = 0; rep < 10; ++rep) {
    std::shuffle(offsets.begin(), offsets.end(), rng);
    std::ostringstream csv;
    csv << "date,y,x1\n";
    for (int k : offsets) csv << format_date(day(2003, 6, 1) + std::chrono::days{k}) << ',' << k << ',' << k * 0.5 << '\n';
    const Dataset d = load_csv(temp_file("shuffled.csv", csv.str()), xy_schema());
    REQUIRE(d.n() == 30);
    CHECK(std::is_sorted(d.dates.begin(), d.dates.end()));
    for (Eigen::Index i = 0; i < 30; ++i) {
      CHECK(d.y(i) == static_cast<double>(i));
      CHECK(d.x(i, 0) == 0.5 * static_cast<double>(i));
    }
  }
}

TEST_CASE("lag weights are validated") {
  CHECK_NOTHROW(LagWeights({0.4, 0.4, 0.2}));
  CHECK_THROWS(LagWeights({0.5, 0.4}));
  CHECK_THROWS(LagWeights({1.2, -0.2}));
  CHECK_THROWS(LagWeights({}));
}

TEST_CASE("lagged indicator examples") {
  const LagWeights w({0.4, 0.4, 0.2});
  const std::vector<double> flat(10, 10.0);
  for (double v : lagged_indicator(flat, w)) CHECK(v == doctest::Approx(10.0).epsilon(1e-15));

  const std::vector<double> s{1, 2, 3};
  const auto out = lagged_indicator(s, w);
  REQUIRE(out.size() == 1);
  CHECK(out[0] == doctest::Approx(2.2).epsilon(1e-15));

  const std::vector<double> r{3.5, -1, 8};
  CHECK(lagged_indicator(r, LagWeights({1.0})) == r);
  CHECK_THROWS_AS(lagged_indicator(std::vector<double>{1, 2}, w), LengthError);
}

TEST_CASE("lagged indicator is linear (property)") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> w(1 + rep % 4);
    for (auto& v : w) v = u(rng) + 0.01;
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& v : w) v /= total;
    // Renormalise the last weight so the sum is 1 to rounding.
    w.back() = 1.0 - std::accumulate(w.begin(), w.end() - 1, 0.0);
    const LagWeights lw(w);
    const std::size_t n = 5 + static_cast<std::size_t>(rep % 20);
    std::vector<double> s1(n), s2(n), comb(n);
    const double a = z(rng), b = z(rng);
    for (std::size_t i = 0; i < n; ++i) {
      s1[i] = z(rng);
      s2[i] = z(rng);
      comb[i] = a * s1[i] + b * s2[i];
    }
    const auto l1 = lagged_indicator(s1, lw), l2 = lagged_indicator(s2, lw), lc = lagged_indicator(comb, lw);
    for (std::size_t i = 0; i < lc.size(); ++i) CHECK(std::abs(lc[i] - (a * l1[i] + b * l2[i])) < 1e-10);
  }
}

TEST_CASE("apply_lags trims each run and keeps rows aligned (property)") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> run_len(1, 12);
  std::uniform_int_distribution<int> gap(2, 5);
  for (int rep = 0; rep < 100; ++rep) {
    Dataset d;
    std::vector<Date> dates;
    Date cur = day(2000, 6, 1);
    std::vector<int> runs;
    for (int r = 0; r < 4; ++r) {
      runs.push_back(run_len(rng));
      for (int k = 0; k < runs.back(); ++k) dates.push_back(cur + std::chrono::days{k});
      cur = dates.back() + std::chrono::days{gap(rng)};
    }
    const auto n = static_cast<Eigen::Index>(dates.size());
    d.dates = dates;
    d.y.resize(n);
    d.x.resize(n, 2);
    d.c.resize(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double key = static_cast<double>(dates[static_cast<std::size_t>(i)].time_since_epoch().count());
      d.y(i) = key;
      d.c(i, 0) = -key;
      d.x(i, 0) = key;
      d.x(i, 1) = 2.0;
    }
    d.names = {"a", "b"};
    const std::size_t expected = [&] {
      std::size_t e = 0;
      for (int r : runs) e += r > 2 ? static_cast<std::size_t>(r - 2) : 0;
      return e;
    }();
    if (expected == 0) {
      CHECK_THROWS_AS(apply_lags(d, LagWeights({0.4, 0.4, 0.2})), LengthError);
      continue;
    }
    const Dataset out = apply_lags(d, LagWeights({0.4, 0.4, 0.2}));
    REQUIRE(out.n() == expected);
    for (Eigen::Index i = 0; i < out.y.size(); ++i) {
      const double key = static_cast<double>(out.dates[static_cast<std::size_t>(i)].time_since_epoch().count());
      CHECK(out.y(i) == key);
      CHECK(out.c(i, 0) == -key);
      // x is the date key itself, so its lagged value is key - 0.4 - 2 * 0.2.
      CHECK(out.x(i, 0) == doctest::Approx(key - 0.8).epsilon(1e-12));
      CHECK(out.x(i, 1) == doctest::Approx(2.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("natural spline basis") {
  std::vector<double> x(100);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(static_cast<double>(i)) * 3 + 0.01 * i;

  SUBCASE("df=1 is affine") {
    const Matrix b = natural_spline_basis(x, 1);
    REQUIRE(b.cols() == 1);
    Matrix a(100, 2);
    a.col(0).setOnes();
    a.col(1) = Eigen::Map<const Vector>(x.data(), 100);
    CHECK(r_squared(a, b.col(0)) == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("[1 | basis] has full column rank") {
    for (int df = 1; df <= 8; ++df) {
      const Matrix b = natural_spline_basis(x, df);
      Matrix a(100, df + 1);
      a << Vector::Ones(100), b;
      const auto sv = a.jacobiSvd().singularValues();
      CHECK(sv(sv.size() - 1) > 1e-8 * sv(0));
    }
  }

  SUBCASE("linear beyond the boundary knots") {
    const NaturalSplineBasis basis(x, 4);
    std::vector<double> lo, hi;
    for (int k = 0; k < 3; ++k) {
      lo.push_back(basis.lower_boundary() - 1.0 - k);
      hi.push_back(basis.upper_boundary() + 1.0 + k);
    }
    for (const auto& pts : {lo, hi}) {
      const Matrix e = basis.evaluate(pts);
      for (Eigen::Index j = 0; j < e.cols(); ++j) CHECK(std::abs(e(0, j) - 2 * e(1, j) + e(2, j)) < 1e-6);
    }
  }

  SUBCASE("too few distinct values") {
    CHECK_THROWS_AS(natural_spline_basis(std::vector<double>{1, 2, 3, 1, 2, 3}, 2), RankError);
  }
}

TEST_CASE("spline basis reproduces x (property)") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-5, 40);
  for (int rep = 0; rep < 100; ++rep) {
    const int df = 1 + rep % 6;
    std::vector<double> x(30 + static_cast<std::size_t>(rep));
    for (auto& v : x) v = u(rng);
    const Matrix b = natural_spline_basis(x, df);
    Matrix a(b.rows(), b.cols() + 1);
    a << Vector::Ones(b.rows()), b;
    CHECK(r_squared(a, Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()))) ==
          doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("calendar covariates") {
  SUBCASE("one season drops the year trend") {
    const auto dates = testing::days_from(day(2001, 5, 1), 153);
    const Matrix c = build_covariates(dates, SplineSpec{4, 1.0});
    CHECK(c.cols() == 4);
    CHECK(year_trend_df(dates, SplineSpec{4, 1.0}) == 0);
  }
  SUBCASE("25 seasons with one df per decade") {
    std::vector<Date> dates;
    for (int y = 1990; y <= 2014; ++y) {
      for (const auto d : testing::days_from(day(y, 5, 1), 153)) dates.push_back(d);
    }
    CHECK(year_trend_df(dates, SplineSpec{4, 1.0}) == 3);
    const Matrix c = build_covariates(dates, SplineSpec{4, 1.0});
    CHECK(c.cols() == 7);
    Dataset d;
    d.dates = dates;
    d.c.resize(static_cast<Eigen::Index>(dates.size()), 0);
    const Dataset with = with_calendar_covariates(d, SplineSpec{4, 1.0});
    CHECK(with.covariate_names.size() == 7);
    CHECK(with.covariate_names.front() == "season_ns1");
    CHECK(with.covariate_names.back() == "year_ns3");
  }
  SUBCASE("two seasons give a linear trend") {
    std::vector<Date> dates = testing::days_from(day(2001, 5, 1), 20);
    for (const auto d : testing::days_from(day(2002, 5, 1), 20)) dates.push_back(d);
    const Matrix c = build_covariates(dates, SplineSpec{2, 1.0});
    REQUIRE(c.cols() == 3);
    CHECK(c(0, 2) == doctest::Approx(-0.05));
    CHECK(c(39, 2) == doctest::Approx(0.05));
  }
}
