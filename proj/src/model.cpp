#include "hhws/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "hhws/error.hpp"

namespace hhws {

SlopeVariable SlopeVariable::bind(std::size_t p) const {
  SlopeVariable out = *this;
  if (out.columns.empty()) {
    out.columns.resize(p);
    for (std::size_t j = 0; j < p; ++j) out.columns[j] = j;
  }
  return out;
}

std::size_t SlopeVariable::width() const {
  if (mean) return 1;
  if (columns.empty()) throw std::logic_error("slope variable is not bound to the indicators");
  return columns.size();
}

Matrix SlopeVariable::values(const Matrix& x) const {
  const SlopeVariable b = bind(static_cast<std::size_t>(x.cols()));
  Matrix out(x.rows(), static_cast<Eigen::Index>(b.columns.size()));
  for (std::size_t j = 0; j < b.columns.size(); ++j) {
    if (b.columns[j] >= static_cast<std::size_t>(x.cols())) {
      throw DimensionError("slope column " + std::to_string(b.columns[j]) + " out of range");
    }
    out.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(b.columns[j]));
  }
  if (mean) return out.rowwise().mean();
  return out;
}

Matrix LocalModel::design(const Dataset& data) const {
  const Matrix s = slope.values(data.x);
  Matrix d(static_cast<Eigen::Index>(data.n()), 1 + s.cols() + data.c.cols());
  d << Vector::Ones(static_cast<Eigen::Index>(data.n())), s, data.c;
  return d;
}

GlmFit LocalModel::fit(const Matrix& full_design, const Vector& y, std::span<const std::size_t> rows,
                       const GlmOptions& options) const {
  return fit_glm(select_rows(full_design, rows), select_rows(y, rows), family, options);
}

double LocalModel::slope_of(const GlmFit& fit) const {
  return fit.coefficients.segment(1, static_cast<Eigen::Index>(slope.width())).sum();
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Vector select_rows(const Vector& v, std::span<const std::size_t> rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

ThresholdSet::ThresholdSet(std::string method_name, std::vector<std::string> indicator_names)
    : method(std::move(method_name)),
      names(std::move(indicator_names)),
      bounds(names.size()) {}

bool ThresholdSet::any_selected() const {
  return std::any_of(bounds.begin(), bounds.end(), [](const auto& b) { return b.has_value(); });
}

bool ThresholdSet::has_flag(const std::string& flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

}  // namespace hhws
