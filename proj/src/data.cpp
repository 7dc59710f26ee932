#include "hhws/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string_view>
#include <unordered_map>

#include "hhws/error.hpp"

namespace hhws {

void Dataset::validate() const {
  const auto n_rows = y.size();
  if (n_rows < 1) throw std::invalid_argument("dataset is empty");
  if (x.rows() != n_rows || c.rows() != n_rows ||
      dates.size() != static_cast<std::size_t>(n_rows)) {
    throw std::invalid_argument("dataset series have different lengths");
  }
  if (x.cols() < 1) throw std::invalid_argument("dataset has no indicator");
  if (names.size() != static_cast<std::size_t>(x.cols())) {
    throw std::invalid_argument("indicator names do not match indicator columns");
  }
  if (!y.allFinite() || !x.allFinite() || !c.allFinite()) {
    throw std::invalid_argument("dataset contains non-finite values");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.y.resize(m);
  out.x.resize(m, x.cols());
  out.c.resize(m, c.cols());
  out.dates.reserve(rows.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
    out.y(i) = y(r);
    out.x.row(i) = x.row(r);
    out.c.row(i) = c.row(r);
    out.dates.push_back(dates[static_cast<std::size_t>(r)]);
  }
  out.names = names;
  out.covariate_names = covariate_names;
  return out;
}

std::size_t Dataset::indicator_index(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw SchemaError("unknown indicator '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

LagWeights::LagWeights(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw std::invalid_argument("lag weights are empty");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw std::invalid_argument("lag weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("lag weights must sum to 1");
}

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool is_missing(std::string_view cell) { return cell.empty() || cell == "NA" || cell == "NaN"; }

double parse_real(std::string_view cell, std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
    throw ParseError(row, "non-numeric value '" + std::string(cell) + "' in column '" + column + "'");
  }
  return value;
}

double parse_count(std::string_view cell, std::size_t row, const std::string& column) {
  long long value = 0;
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), last, value);
  if (ec != std::errc{} || ptr != last) {
    throw ParseError(row, "count '" + std::string(cell) + "' in column '" + column +
                              "' is not an integer");
  }
  if (value < 0) {
    throw ParseError(row, "negative count " + std::string(cell) + " in column '" + column + "'");
  }
  return static_cast<double>(value);
}

struct RawRow {
  Date date;
  double y;
  std::vector<double> x;
  std::vector<double> c;
};

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema,
                 const SeasonWindow& season) {
  if (schema.indicator_columns.empty()) throw SchemaError("schema maps no indicator column");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw SchemaError("'" + path.string() + "' has no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  std::unordered_map<std::string, std::size_t> header;
  {
    const auto cols = split_csv_line(line);
    for (std::size_t i = 0; i < cols.size(); ++i) header.emplace(std::string(trim(cols[i])), i);
  }
  const auto column = [&](const std::string& name) {
    const auto it = header.find(name);
    if (it == header.end()) throw SchemaError("missing column '" + name + "'");
    return it->second;
  };
  const std::size_t date_col = column(schema.date_column);
  const std::size_t count_col = column(schema.count_column);
  std::vector<std::size_t> x_cols;
  std::vector<std::size_t> c_cols;
  for (const auto& name : schema.indicator_columns) x_cols.push_back(column(name));
  for (const auto& name : schema.covariate_columns) c_cols.push_back(column(name));

  std::vector<RawRow> rows;
  std::size_t row_number = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row_number;
    const auto cells = split_csv_line(line);
    const auto cell = [&](std::size_t i) {
      return i < cells.size() ? trim(cells[i]) : std::string_view{};
    };

    bool missing = is_missing(cell(date_col)) || is_missing(cell(count_col));
    for (auto i : x_cols) missing = missing || is_missing(cell(i));
    for (auto i : c_cols) missing = missing || is_missing(cell(i));
    if (missing) continue;

    RawRow raw;
    try {
      raw.date = parse_date(cell(date_col));
    } catch (const std::invalid_argument& e) {
      throw ParseError(row_number, e.what());
    }
    raw.y = parse_count(cell(count_col), row_number, schema.count_column);
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      raw.x.push_back(parse_real(cell(x_cols[j]), row_number, schema.indicator_columns[j]));
    }
    for (std::size_t j = 0; j < c_cols.size(); ++j) {
      raw.c.push_back(parse_real(cell(c_cols[j]), row_number, schema.covariate_columns[j]));
    }
    if (season.contains(raw.date)) rows.push_back(std::move(raw));
  }
  if (rows.empty()) throw SchemaError("'" + path.string() + "' has no usable rows in the season");

  std::stable_sort(rows.begin(), rows.end(),
                   [](const RawRow& a, const RawRow& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].date == rows[i - 1].date) {
      throw SchemaError("duplicate date " + format_date(rows[i].date));
    }
  }

  Dataset out;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.y.resize(n);
  out.x.resize(n, static_cast<Eigen::Index>(x_cols.size()));
  out.c.resize(n, static_cast<Eigen::Index>(c_cols.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    out.dates.push_back(r.date);
    out.y(i) = r.y;
    for (std::size_t j = 0; j < r.x.size(); ++j) out.x(i, static_cast<Eigen::Index>(j)) = r.x[j];
    for (std::size_t j = 0; j < r.c.size(); ++j) out.c(i, static_cast<Eigen::Index>(j)) = r.c[j];
  }
  out.names = schema.indicator_columns;
  out.covariate_names = schema.covariate_columns;
  return out;
}

std::vector<double> lagged_indicator(std::span<const double> series, const LagWeights& w) {
  const std::size_t lags = w.max_lag();
  if (series.size() < lags + 1) {
    throw LengthError("series of length " + std::to_string(series.size()) +
                      " is shorter than the " + std::to_string(lags + 1) + " lag weights");
  }
  const auto weights = w.weights();
  std::vector<double> out(series.size() - lags);
  for (std::size_t t = lags; t < series.size(); ++t) {
    double acc = 0.0;
    for (std::size_t l = 0; l <= lags; ++l) acc += weights[l] * series[t - l];
    out[t - lags] = acc;
  }
  return out;
}

Dataset apply_lags(const Dataset& data, const LagWeights& w) {
  data.validate();
  const std::size_t lags = w.max_lag();
  const auto weights = w.weights();

  // Runs of consecutive calendar days.
  std::vector<std::size_t> keep;
  std::size_t run_start = 0;
  for (std::size_t t = 0; t < data.n(); ++t) {
    if (t > 0 && (data.dates[t] - data.dates[t - 1]).count() != 1) run_start = t;
    if (t - run_start >= lags) keep.push_back(t);
  }
  if (keep.empty()) throw LengthError("no run of consecutive days is longer than the lag window");

  Dataset out = data.subset(keep);
  for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
    for (std::size_t i = 0; i < keep.size(); ++i) {
      const std::size_t t = keep[i];
      double acc = 0.0;
      for (std::size_t l = 0; l <= lags; ++l) {
        acc += weights[l] * data.x(static_cast<Eigen::Index>(t - l), j);
      }
      out.x(static_cast<Eigen::Index>(i), j) = acc;
    }
  }
  return out;
}

int year_trend_df(std::span<const Date> dates, const SplineSpec& spec) {
  std::set<int> years;
  for (const auto d : dates) years.insert(year_of(d));
  if (years.size() < 2) return 0;
  const double decades = static_cast<double>(years.size()) / 10.0;
  int df = std::max(1, static_cast<int>(std::ceil(decades * spec.df_per_decade - 1e-12)));
  // A natural spline with df columns needs df + 2 distinct knots' worth of data.
  if (df > 1) df = std::min(df, std::max(1, static_cast<int>(years.size()) - 2));
  return df;
}

Matrix build_covariates(std::span<const Date> dates, const SplineSpec& spec,
                        const SeasonWindow& season) {
  if (spec.df_season < 1) throw std::invalid_argument("df_season must be >= 1");
  if (!(spec.df_per_decade > 0.0)) throw std::invalid_argument("df_per_decade must be > 0");
  std::vector<double> day(dates.size());
  std::vector<double> year(dates.size());
  for (std::size_t i = 0; i < dates.size(); ++i) {
    day[i] = season.day_of_season(dates[i]);
    year[i] = year_of(dates[i]);
  }
  const Matrix seasonal = natural_spline_basis(day, spec.df_season);
  const int trend_df = year_trend_df(dates, spec);
  Matrix trend(static_cast<Eigen::Index>(dates.size()), trend_df);
  if (trend_df == 1) {
    const double mean = std::accumulate(year.begin(), year.end(), 0.0) / static_cast<double>(year.size());
    for (std::size_t i = 0; i < year.size(); ++i) {
      trend(static_cast<Eigen::Index>(i), 0) = (year[i] - mean) / 10.0;
    }
  } else if (trend_df > 1) {
    trend = natural_spline_basis(year, trend_df);
  }
  Matrix out(seasonal.rows(), seasonal.cols() + trend.cols());
  out << seasonal, trend;
  return out;
}

Dataset with_calendar_covariates(Dataset data, const SplineSpec& spec, const SeasonWindow& season) {
  const Matrix extra = build_covariates(data.dates, spec, season);
  Matrix c(data.c.rows(), data.c.cols() + extra.cols());
  c << data.c, extra;
  const int trend_df = year_trend_df(data.dates, spec);
  for (int k = 0; k < spec.df_season; ++k) data.covariate_names.push_back("season_ns" + std::to_string(k + 1));
  for (int k = 0; k < trend_df; ++k) data.covariate_names.push_back("year_ns" + std::to_string(k + 1));
  data.c = std::move(c);
  return data;
}

}  // namespace hhws
