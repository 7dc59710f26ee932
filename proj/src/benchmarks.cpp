#include "hhws/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hhws/error.hpp"
#include "hhws/stats.hpp"

namespace hhws {

double segmented_update(double psi, double gamma, double beta) {
  if (gamma == 0.0) return psi;
  if (beta == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return psi + gamma / beta;
}

namespace {

struct SegDesign {
  Matrix x;
  // Column of each hinge (U) and step (V) term, parallel to the breakpoint lists.
  std::vector<std::vector<Eigen::Index>> u_col, v_col;
};

SegDesign segmented_design(const Dataset& data, const std::vector<std::vector<double>>& psi) {
  const auto n = static_cast<Eigen::Index>(data.n());
  Eigen::Index k = 1 + static_cast<Eigen::Index>(data.p() + data.q());
  for (const auto& v : psi) k += 2 * static_cast<Eigen::Index>(v.size());
  SegDesign d;
  d.x.resize(n, k);
  d.x.col(0).setOnes();
  Eigen::Index c = 1;
  d.u_col.resize(psi.size());
  d.v_col.resize(psi.size());
  for (std::size_t j = 0; j < data.p(); ++j) {
    const auto xj = data.x.col(static_cast<Eigen::Index>(j));
    d.x.col(c++) = xj;
    for (double s : psi[j]) {
      d.u_col[j].push_back(c);
      d.x.col(c++) = (xj.array() - s).max(0.0).matrix();
      d.v_col[j].push_back(c);
      d.x.col(c++) = (xj.array() > s).select(-1.0, Vector::Zero(n));
    }
  }
  d.x.rightCols(static_cast<Eigen::Index>(data.q())) = data.c;
  return d;
}

std::size_t count_above(const Vector& x, double lo, double hi) {
  return static_cast<std::size_t>((x.array() > lo && x.array() <= hi).count());
}

// Keeps breakpoints that are inside the range with enough observations on
// every side, in the original order, skipping any that crossed a kept neighbour.
std::vector<double> admissible(const std::vector<double>& cand, const Vector& x, std::size_t min_obs) {
  const double lo = x.minCoeff();
  const double hi = x.maxCoeff();
  std::vector<double> kept;
  for (double s : cand) {
    if (!std::isfinite(s) || s <= lo || s >= hi) continue;
    const double prev = kept.empty() ? -std::numeric_limits<double>::infinity() : kept.back();
    if (s <= prev) continue;
    if (count_above(x, prev, s) < min_obs || count_above(x, s, hi) < min_obs) continue;
    kept.push_back(s);
  }
  return kept;
}

}  // namespace

SegmentedFit fit_segmented_model(const Dataset& data, const SegmentedConfig& cfg) {
  data.validate();
  const std::size_t p = data.p();
  std::vector<std::vector<double>> psi(p);
  std::vector<double> range(p);
  for (std::size_t j = 0; j < p; ++j) {
    const Vector xj = data.x.col(static_cast<Eigen::Index>(j));
    range[j] = xj.maxCoeff() - xj.minCoeff();
    std::vector<double> init;
    for (std::size_t k = 1; k <= cfg.init_count; ++k) {
      init.push_back(quantile(std::span<const double>(xj.data(), static_cast<std::size_t>(xj.size())),
                              static_cast<double>(k) / static_cast<double>(cfg.init_count + 1)));
    }
    std::sort(init.begin(), init.end());
    init.erase(std::unique(init.begin(), init.end()), init.end());
    psi[j] = admissible(init, xj, cfg.min_obs);
  }

  GlmOptions opt;
  opt.compute_scores = false;
  SegmentedFit out;
  GlmFit fit;
  SegDesign design;
  for (int it = 1;; ++it) {
    out.iterations = it;
    design = segmented_design(data, psi);
    try {
      fit = fit_glm(design.x, data.y, cfg.family, opt);
    } catch (const SingularError&) {
      // Drop the breakpoint leaving the emptiest segment and retry.
      std::size_t bj = p, bk = 0, fewest = std::numeric_limits<std::size_t>::max();
      for (std::size_t j = 0; j < p; ++j) {
        const Vector xj = data.x.col(static_cast<Eigen::Index>(j));
        for (std::size_t k = 0; k < psi[j].size(); ++k) {
          const double prev = k == 0 ? -std::numeric_limits<double>::infinity() : psi[j][k - 1];
          const std::size_t m = count_above(xj, prev, psi[j][k]);
          if (m < fewest) {
            fewest = m;
            bj = j;
            bk = k;
          }
        }
      }
      if (bj == p) throw;
      psi[bj].erase(psi[bj].begin() + static_cast<std::ptrdiff_t>(bk));
      continue;
    }

    // Weakest hinge below the |t| bar is removed, one per iteration.
    std::size_t wj = p, wk = 0;
    double weakest = cfg.min_abs_t;
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t k = 0; k < psi[j].size(); ++k) {
        const auto c = design.u_col[j][k];
        const double se = fit.std_error(c);
        const double t = se > 0 ? std::abs(fit.coefficients(c)) / se : std::numeric_limits<double>::infinity();
        if (t < weakest) {
          weakest = t;
          wj = j;
          wk = k;
        }
      }
    }

    bool changed = false;
    double max_step = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      std::vector<double> next;
      for (std::size_t k = 0; k < psi[j].size(); ++k) {
        if (j == wj && k == wk) continue;
        const double s = segmented_update(psi[j][k], fit.coefficients(design.v_col[j][k]),
                                          fit.coefficients(design.u_col[j][k]));
        if (range[j] > 0) max_step = std::max(max_step, std::abs(s - psi[j][k]) / range[j]);
        next.push_back(s);
      }
      const Vector xj = data.x.col(static_cast<Eigen::Index>(j));
      auto kept = admissible(next, xj, cfg.min_obs);
      if (kept.size() != next.size() || (j == wj)) changed = true;
      psi[j] = std::move(kept);
    }

    if (!changed && max_step < cfg.tolerance) {
      out.converged = true;
      break;
    }
    if (it >= cfg.max_iterations) break;
  }

  // Final fit at the reported breakpoints.
  design = segmented_design(data, psi);
  fit = fit_glm(design.x, data.y, cfg.family, opt);
  out.breakpoints = psi;
  out.slopes.resize(p);
  Eigen::Index c = 1;
  for (std::size_t j = 0; j < p; ++j) {
    out.slopes[j].push_back(fit.coefficients(c));
    for (auto u : design.u_col[j]) out.slopes[j].push_back(fit.coefficients(u));
    c += 1 + 2 * static_cast<Eigen::Index>(psi[j].size());
  }
  return out;
}

ThresholdSet fit_segmented(const Dataset& data, const SegmentedConfig& cfg) {
  const auto fit = fit_segmented_model(data, cfg);
  ThresholdSet out("Segmented", data.names);
  for (std::size_t j = 0; j < data.p(); ++j) {
    if (!fit.breakpoints[j].empty()) out.bounds[j] = fit.breakpoints[j].back();
  }
  if (!fit.converged) out.flags.push_back("not_converged");
  return out;
}

std::vector<CurveCI> fit_curves(const Dataset& data, const CurveConfig& cfg) {
  data.validate();
  if (cfg.grid < 2) throw std::invalid_argument("grid needs at least two points");
  const std::size_t p = data.p();
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto df = static_cast<Eigen::Index>(cfg.df);

  // Constant indicators get no basis and no curve.
  std::vector<std::optional<NaturalSplineBasis>> bases(p);
  std::vector<Vector> cols(p);
  std::vector<Eigen::Index> offset(p, -1);
  Eigen::Index width = 1;
  for (std::size_t j = 0; j < p; ++j) {
    cols[j] = data.x.col(static_cast<Eigen::Index>(j));
    if (cols[j].maxCoeff() - cols[j].minCoeff() < 1e-8) continue;
    bases[j].emplace(std::span<const double>(cols[j].data(), cols[j].size()), cfg.df);
    offset[j] = width;
    width += df;
  }
  Matrix design(n, width + static_cast<Eigen::Index>(data.q()));
  design.col(0).setOnes();
  for (std::size_t j = 0; j < p; ++j) {
    if (!bases[j]) continue;
    design.middleCols(offset[j], df) = bases[j]->evaluate(std::span<const double>(cols[j].data(), cols[j].size()));
  }
  design.rightCols(static_cast<Eigen::Index>(data.q())) = data.c;
  GlmOptions opt;
  opt.compute_scores = false;
  const auto fit = fit_glm(design, data.y, cfg.family, opt);

  std::vector<CurveCI> out(p);
  for (std::size_t j = 0; j < p; ++j) {
    auto& cur = out[j];
    if (!bases[j]) continue;
    const double lo = cols[j].minCoeff(), hi = cols[j].maxCoeff();
    cur.grid.resize(cfg.grid);
    for (std::size_t g = 0; g < cfg.grid; ++g) {
      cur.grid[g] = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(cfg.grid - 1);
    }
    cur.grid.back() = hi;
    const Matrix b = bases[j]->evaluate(cur.grid);
    const Eigen::Index off = offset[j];
    const Vector beta = fit.coefficients.segment(off, df);
    const Matrix cov = fit.cov.block(off, off, df, df);
    const Vector f = b * beta;
    Eigen::Index m = 0;
    f.minCoeff(&m);
    cur.mmt = cur.grid[static_cast<std::size_t>(m)];
    cur.estimate.resize(cfg.grid);
    cur.lower.resize(cfg.grid);
    cur.upper.resize(cfg.grid);
    for (Eigen::Index g = 0; g < b.rows(); ++g) {
      const Vector d = (b.row(g) - b.row(m)).transpose();
      const double est = g == m ? 0.0 : f(g) - f(m);
      const double se = std::sqrt(std::max(d.dot(cov * d), 0.0));
      const auto gi = static_cast<std::size_t>(g);
      cur.estimate[gi] = est;
      cur.lower[gi] = est - cfg.z * se;
      cur.upper[gi] = est + cfg.z * se;
      if (!cur.threshold && g > m && cur.lower[gi] > 0) cur.threshold = cur.grid[gi];
    }
  }
  return out;
}

ThresholdSet curve_ci_threshold(const Dataset& data, const CurveConfig& cfg) {
  const auto curves = fit_curves(data, cfg);
  ThresholdSet out("GAM", data.names);
  for (std::size_t j = 0; j < curves.size(); ++j) out.bounds[j] = curves[j].threshold;
  return out;
}

}  // namespace hhws
