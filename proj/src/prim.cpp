#include "hhws/prim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hhws/error.hpp"
#include "hhws/report.hpp"

namespace hhws {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::optional<double> in_box_slope(const LocalModel& model, const Matrix& design, const Vector& y,
                                   std::span<const std::size_t> rows) {
  GlmOptions options;
  options.compute_scores = false;
  try {
    return model.slope_of(model.fit(design, y, rows, options));
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<std::size_t> members_of(const Matrix& x, const std::vector<double>& lower) {
  std::vector<std::size_t> rows;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    bool inside = true;
    for (Eigen::Index j = 0; j < x.cols() && inside; ++j) {
      inside = x(i, j) >= lower[static_cast<std::size_t>(j)];
    }
    if (inside) rows.push_back(static_cast<std::size_t>(i));
  }
  return rows;
}

double effective_phi0(const PrimConfig& cfg, std::size_t n) {
  return std::max(5.0 / static_cast<double>(n), cfg.phi0);
}

}  // namespace

bool Box::contains(const Matrix& x, Eigen::Index row) const {
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (!(x(row, j) >= lower[static_cast<std::size_t>(j)])) return false;
  }
  return true;
}

PeelingTrajectory peel(const Dataset& data, const PrimConfig& config) {
  PrimConfig cfg = config;
  cfg.model = config.model.bind(data.p());
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw std::invalid_argument("peel fraction must be in (0, 1)");
  if (!(cfg.phi0 >= 0.0 && cfg.phi0 < 1.0)) throw std::invalid_argument("minimum support must be in [0, 1)");
  data.validate();

  const std::size_t n = data.n();
  const std::size_t p = data.p();
  const double phi0 = effective_phi0(cfg, n);
  const Matrix design = cfg.model.design(data);

  PeelingTrajectory traj;
  traj.names = data.names;
  traj.n = n;

  PeelStep current;
  current.box.lower.assign(p, kNegInf);
  current.box.members.resize(n);
  for (std::size_t i = 0; i < n; ++i) current.box.members[i] = i;
  const auto root = in_box_slope(cfg.model, design, data.y, current.box.members);
  if (!root) throw SingularError("box model cannot be fitted on the full data");
  current.slope = *root;
  traj.steps.push_back(current);

  std::vector<double> values;
  while (true) {
    const auto& members = current.box.members;
    const std::size_t m = members.size();
    const auto peel_count = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(cfg.alpha * static_cast<double>(m))));

    std::optional<PeelStep> best;
    bool any_eligible = false;
    for (std::size_t j = 0; j < p; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      values.clear();
      for (auto r : members) values.push_back(data.x(static_cast<Eigen::Index>(r), col));
      if (peel_count >= m) continue;
      std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(peel_count - 1), values.end());
      const double cut = values[peel_count - 1];
      // Smallest retained value: everything tied with the quantile goes.
      double bound = std::numeric_limits<double>::infinity();
      for (double v : values) {
        if (v > cut) bound = std::min(bound, v);
      }
      if (!std::isfinite(bound)) continue;

      PeelStep candidate;
      candidate.box.lower = current.box.lower;
      candidate.box.lower[j] = bound;
      for (auto r : members) {
        if (data.x(static_cast<Eigen::Index>(r), col) >= bound) candidate.box.members.push_back(r);
      }
      candidate.support = static_cast<double>(candidate.box.members.size()) / static_cast<double>(n);
      if (candidate.support < phi0) continue;
      any_eligible = true;
      const auto slope = in_box_slope(cfg.model, design, data.y, candidate.box.members);
      if (!slope) continue;
      candidate.slope = *slope;
      candidate.peeled_variable = j;
      candidate.peeled_count = m - candidate.box.members.size();
      if (!best || candidate.slope > best->slope) best = std::move(candidate);
    }
    if (!best) {
      traj.ended_early = any_eligible;
      break;
    }
    current = std::move(*best);
    traj.steps.push_back(current);
  }
  return traj;
}

std::vector<double> peeling_rates(std::span<const double> support, std::span<const double> slope) {
  if (support.size() != slope.size()) throw std::invalid_argument("support and slope differ in length");
  std::vector<double> rates;
  for (std::size_t k = 1; k < support.size(); ++k) {
    const double drop = support[k - 1] - support[k];
    rates.push_back(drop > 0.0 ? (slope[k] - slope[k - 1]) / drop
                               : -std::numeric_limits<double>::infinity());
  }
  return rates;
}

std::size_t select_step(std::span<const double> support, std::span<const double> slope) {
  if (support.size() < 2) throw std::invalid_argument("trajectory needs at least two steps");
  const auto rates = peeling_rates(support, slope);
  std::size_t best = 0;
  bool any = false;
  for (std::size_t k = 0; k < rates.size(); ++k) {
    if (!std::isfinite(rates[k])) continue;
    if (!any || rates[k] > rates[best]) best = k;
    any = true;
  }
  if (!any) throw std::invalid_argument("degenerate trajectory: no support decrease");
  return best + 1;
}

std::size_t select_step(const PeelingTrajectory& traj) {
  std::vector<double> support;
  std::vector<double> slope;
  for (const auto& s : traj.steps) {
    support.push_back(s.support);
    slope.push_back(s.slope);
  }
  return select_step(support, slope);
}

ThresholdSet thresholds_from_box(const Box& box, const std::vector<std::string>& names,
                                 const std::string& method) {
  ThresholdSet out(method, names);
  for (std::size_t j = 0; j < box.lower.size(); ++j) {
    if (std::isfinite(box.lower[j])) out.bounds[j] = box.lower[j];
  }
  return out;
}

ThresholdSet select_box(const PeelingTrajectory& traj) {
  return thresholds_from_box(traj.steps[select_step(traj)].box, traj.names);
}

Box paste(const Box& box, const Dataset& data, const PrimConfig& config) {
  PrimConfig cfg = config;
  cfg.model = config.model.bind(data.p());
  const Matrix design = cfg.model.design(data);
  Box current = box;
  auto slope = in_box_slope(cfg.model, design, data.y, current.members);
  if (!slope) return current;

  std::vector<std::pair<double, std::size_t>> outside;
  while (true) {
    const auto add = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(cfg.paste_alpha * static_cast<double>(current.members.size()))));
    std::optional<Box> best;
    double best_slope = *slope;
    for (std::size_t j = 0; j < current.lower.size(); ++j) {
      if (!std::isfinite(current.lower[j])) continue;
      const auto col = static_cast<Eigen::Index>(j);
      outside.clear();
      for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
        if (data.x(i, col) >= current.lower[j]) continue;
        bool others = true;
        for (std::size_t l = 0; l < current.lower.size() && others; ++l) {
          if (l != j) others = data.x(i, static_cast<Eigen::Index>(l)) >= current.lower[l];
        }
        if (others) outside.emplace_back(data.x(i, col), static_cast<std::size_t>(i));
      }
      if (outside.empty()) continue;
      std::sort(outside.begin(), outside.end(), std::greater<>{});
      const double bound = outside[std::min(add, outside.size()) - 1].first;

      Box candidate;
      candidate.lower = current.lower;
      candidate.lower[j] = bound;
      candidate.members = members_of(data.x, candidate.lower);
      const auto s = in_box_slope(cfg.model, design, data.y, candidate.members);
      if (s && *s > best_slope) {
        best_slope = *s;
        best = std::move(candidate);
      }
    }
    if (!best) break;
    current = std::move(*best);
    slope = best_slope;
  }
  return current;
}

PrimResult fit_prim(const Dataset& data, const PrimConfig& config) {
  PrimConfig cfg = config;
  cfg.model = config.model.bind(data.p());
  PrimResult result;
  result.trajectory = peel(data, cfg);
  result.selected_step = select_step(result.trajectory);
  const auto& chosen = result.trajectory.steps[result.selected_step];
  result.box = cfg.paste ? paste(chosen.box, data, cfg) : chosen.box;
  result.slope = chosen.slope;
  if (cfg.paste) {
    const Matrix design = cfg.model.design(data);
    if (auto s = in_box_slope(cfg.model, design, data.y, result.box.members)) result.slope = *s;
  }
  result.thresholds = thresholds_from_box(result.box, data.names);
  if (result.trajectory.ended_early) result.thresholds.flags.push_back("trajectory_ended_early");
  return result;
}

void write_trajectory_csv(std::ostream& out, const PeelingTrajectory& traj) {
  out << "step,support,slope,rate,peeled";
  for (const auto& name : traj.names) out << ",lower_" << name;
  out << '\n';
  for (std::size_t k = 0; k < traj.steps.size(); ++k) {
    const auto& s = traj.steps[k];
    out << k << ',' << format_number(s.support) << ',' << format_number(s.slope) << ',';
    if (k > 0) {
      const auto& prev = traj.steps[k - 1];
      out << format_number((s.slope - prev.slope) / (prev.support - s.support));
    }
    out << ',';
    if (s.peeled_variable) out << traj.names[*s.peeled_variable];
    for (double b : s.box.lower) {
      out << ',';
      if (std::isfinite(b)) out << format_number(b);
    }
    out << '\n';
  }
}

}  // namespace hhws
