#include "hhws/aim.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "hhws/glm.hpp"

namespace hhws {

namespace {

Matrix intercept_and(const Matrix& c) {
  Matrix d(c.rows(), c.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(c.cols()) = c;
  return d;
}

// Least squares of r on [1, index]; returns {beta0, beta1, t^2}.
struct LineFit {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double t_squared = 0.0;
};

LineFit line_fit(double n, double sx, double sxx, double sy, double syy, double sxy) {
  LineFit f;
  const double vx = sxx - sx * sx / n;
  const double vy = syy - sy * sy / n;
  const double cxy = sxy - sx * sy / n;
  if (vx <= 1e-12 * std::max(1.0, sxx)) {
    f.beta0 = sy / n;
    return f;
  }
  f.beta1 = cxy / vx;
  f.beta0 = (sy - f.beta1 * sx) / n;
  const double rss = std::max(vy - cxy * cxy / vx, 0.0);
  if (n <= 2) return f;
  const double sigma2 = rss / (n - 2);
  const double reg = cxy * cxy / vx;
  f.t_squared = sigma2 > 0 ? reg / sigma2 : (reg > 0 ? std::numeric_limits<double>::infinity() : 0.0);
  return f;
}

}  // namespace

Vector AimModel::index(const Matrix& x) const {
  Vector out = Vector::Zero(x.rows());
  for (const auto& r : rules) {
    const auto col = static_cast<Eigen::Index>(r.var);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (x(i, col) >= r.cut) out(i) += 1.0;
    }
  }
  return out;
}

Vector AimModel::predict(const Matrix& x) const {
  return (beta0 + beta1 * index(x).array()).matrix();
}

Vector covariate_residual(const Dataset& data) {
  GlmOptions opt;
  opt.compute_scores = false;
  const auto fit = fit_glm(intercept_and(data.c), data.y, Family::Gaussian, opt);
  return data.y - fit.fitted;
}

std::vector<AimModel> fit_aim_path(const Matrix& x, const Vector& r, const AimConfig& cfg) {
  if (cfg.max_splits_per_var == 0) throw std::invalid_argument("max_splits_per_var must be positive");
  const auto n = x.rows();
  const auto p = static_cast<std::size_t>(x.cols());
  if (r.size() != n) throw std::invalid_argument("response length differs from indicator rows");
  const double nn = static_cast<double>(n);
  const double sy = r.sum();
  const double syy = r.squaredNorm();

  std::vector<AimModel> path;
  if (n < 3 || syy - sy * sy / nn <= 1e-12 * std::max(1.0, syy)) {
    AimModel empty;
    empty.degenerate = true;
    empty.beta0 = n > 0 ? sy / nn : 0.0;
    path.push_back(empty);
    return path;
  }

  std::vector<std::vector<Eigen::Index>> order(p);
  for (std::size_t j = 0; j < p; ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    order[j].resize(static_cast<std::size_t>(n));
    std::iota(order[j].begin(), order[j].end(), Eigen::Index{0});
    std::stable_sort(order[j].begin(), order[j].end(),
                     [&](Eigen::Index a, Eigen::Index b) { return x(a, col) > x(b, col); });
  }

  Vector idx = Vector::Zero(n);
  std::vector<std::size_t> per_var(p, 0);
  AimModel current;
  const std::size_t k_max = cfg.max_splits_per_var * p;

  while (current.k() < k_max) {
    const double sx = idx.sum();
    const double sxx = idx.squaredNorm();
    const double sxy = idx.dot(r);

    std::optional<AimRule> best;
    LineFit best_fit;
    best_fit.t_squared = -1.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (per_var[j] >= cfg.max_splits_per_var) continue;
      const auto col = static_cast<Eigen::Index>(j);
      const auto& ord = order[j];
      const double xmin = x(ord.back(), col);
      double cnt = 0, zr = 0, zi = 0;
      for (std::size_t pos = 0; pos < ord.size();) {
        const double v = x(ord[pos], col);
        if (v == xmin) break;  // a rule at the minimum is constant
        while (pos < ord.size() && x(ord[pos], col) == v) {
          cnt += 1;
          zr += r(ord[pos]);
          zi += idx(ord[pos]);
          ++pos;
        }
        const bool used = std::any_of(current.rules.begin(), current.rules.end(),
                                      [&](const AimRule& a) { return a.var == j && a.cut == v; });
        if (used) continue;
        const auto f = line_fit(nn, sx + cnt, sxx + 2 * zi + cnt, sy, syy, sxy + zr);
        if (f.t_squared > best_fit.t_squared) {
          best_fit = f;
          best = AimRule{j, v};
        }
      }
    }
    if (!best) break;

    current.rules.push_back(*best);
    current.beta0 = best_fit.beta0;
    current.beta1 = best_fit.beta1;
    current.t_squared = best_fit.t_squared;
    ++per_var[best->var];
    const auto col = static_cast<Eigen::Index>(best->var);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x(i, col) >= best->cut) idx(i) += 1.0;
    }
    path.push_back(current);
  }
  return path;
}

std::vector<AimModel> fit_aim_path(const Dataset& data, const AimConfig& cfg) {
  data.validate();
  return fit_aim_path(data.x, covariate_residual(data), cfg);
}

std::vector<double> cv_errors(const Dataset& data, const AimConfig& cfg) {
  if (cfg.folds < 2) throw std::invalid_argument("folds must be >= 2");
  data.validate();
  const std::size_t n = data.n();
  if (n < 2 * cfg.folds) throw std::invalid_argument("too few rows for the requested folds");
  const std::size_t k_max = cfg.max_splits_per_var * data.p();
  std::vector<double> sse(k_max, 0.0);

  for (std::size_t f = 0; f < cfg.folds; ++f) {
    const std::size_t lo = f * n / cfg.folds;
    const std::size_t hi = (f + 1) * n / cfg.folds;
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < n; ++i) (i >= lo && i < hi ? test : train).push_back(i);
    const Dataset tr = data.subset(train);
    const Dataset te = data.subset(test);

    GlmOptions opt;
    opt.compute_scores = false;
    const auto cfit = fit_glm(intercept_and(tr.c), tr.y, Family::Gaussian, opt);
    const Vector r_train = tr.y - cfit.fitted;
    const Vector r_test = te.y - predict(cfit, intercept_and(te.c));

    const auto path = fit_aim_path(tr.x, r_train, cfg);
    for (std::size_t k = 0; k < k_max; ++k) {
      const AimModel& m = path[std::min(k, path.size() - 1)];
      sse[k] += (r_test - m.predict(te.x)).squaredNorm();
    }
  }
  for (auto& v : sse) v /= static_cast<double>(n);
  return sse;
}

AimModel select_k_cv(const Dataset& data, const AimConfig& cfg) {
  const auto path = fit_aim_path(data, cfg);
  if (path.front().degenerate) return path.front();
  const auto err = cv_errors(data, cfg);
  std::size_t best = 0;
  for (std::size_t k = 1; k < err.size(); ++k) {
    if (err[k] < err[best]) best = k;
  }
  return path[std::min(best, path.size() - 1)];
}

ThresholdSet extract_thresholds_aim(const AimModel& model, const std::vector<std::string>& names) {
  ThresholdSet out("AIM", names);
  for (const auto& r : model.rules) {
    if (r.var >= names.size()) throw std::invalid_argument("rule variable out of range");
    auto& b = out.bounds[r.var];
    if (!b || r.cut > *b) b = r.cut;
  }
  if (model.degenerate) out.flags.push_back("degenerate");
  return out;
}

}  // namespace hhws
