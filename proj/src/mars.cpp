#include "hhws/mars.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>

#include "hhws/error.hpp"

namespace hhws {

namespace {

constexpr double kCollinear = 1e-8;

// Orthonormal basis grown one column at a time (modified Gram-Schmidt, applied twice).
class OrthoBasis {
 public:
  explicit OrthoBasis(Eigen::Index n) : q_(n, 0) {}

  [[nodiscard]] const Matrix& q() const { return q_; }
  [[nodiscard]] Eigen::Index cols() const { return q_.cols(); }

  /// Appends the normalised component of `column` orthogonal to the basis.
  /// Returns false, leaving the basis unchanged, when that component vanishes.
  bool append(const Vector& column) {
    const double norm0 = column.norm();
    if (norm0 == 0.0) return false;
    Vector v = column;
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < q_.cols(); ++j) v -= q_.col(j).dot(v) * q_.col(j);
    }
    const double norm = v.norm();
    if (norm <= std::sqrt(kCollinear) * norm0) return false;
    q_.conservativeResize(Eigen::NoChange, q_.cols() + 1);
    q_.col(q_.cols() - 1) = v / norm;
    return true;
  }

 private:
  Matrix q_;
};

struct Candidate {
  double reduction = 0.0;
  std::size_t parent = 0;
  std::size_t var = 0;
  double knot = 0.0;
};

// Knot-identity of a hinge term: its parent factors plus (var, knot) of the last one.
using KnotKey = std::tuple<std::vector<std::tuple<std::size_t, double, int>>, std::size_t, double>;

KnotKey knot_key(const MarsTerm& term) {
  std::vector<std::tuple<std::size_t, double, int>> parent;
  for (std::size_t i = 0; i + 1 < term.factors.size(); ++i) {
    parent.emplace_back(term.factors[i].var, term.factors[i].knot, term.factors[i].sign);
  }
  return {parent, term.factors.back().var, term.factors.back().knot};
}

std::size_t count_knots(const std::vector<MarsTerm>& terms) {
  std::set<KnotKey> keys;
  for (const auto& t : terms) {
    if (t.is_hinge()) keys.insert(knot_key(t));
  }
  return keys.size();
}

// Least-squares RSS and coefficients of z on the columns of `basis`.
std::pair<double, Vector> least_squares(const Matrix& basis, const Vector& z) {
  Eigen::ColPivHouseholderQR<Matrix> qr(basis);
  qr.setThreshold(1e-10);
  Vector beta = qr.solve(z);
  if (qr.rank() < basis.cols()) {
    // Zero the coefficients of dependent columns so they stay well defined.
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index i = qr.rank(); i < basis.cols(); ++i) beta(perm(i)) = 0.0;
  }
  return {(z - basis * beta).squaredNorm(), beta};
}

Matrix basis_of(const std::vector<MarsTerm>& terms, const Dataset& data) {
  Matrix out(static_cast<Eigen::Index>(data.n()), static_cast<Eigen::Index>(terms.size()));
  for (std::size_t k = 0; k < terms.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = term_values(terms[k], data);
  return out;
}

void finalise(MarsModel& model, const Dataset& data, const Vector& z, const MarsConfig& cfg) {
  auto [rss, beta] = least_squares(basis_of(model.terms, data), z);
  model.rss = rss;
  model.coefficients = std::move(beta);
  model.gcv = mars_gcv(rss, data.n(), model.terms.size(), count_knots(model.terms), cfg.knot_penalty);
}

}  // namespace

std::size_t MarsModel::knot_count() const { return count_knots(terms); }

Vector term_values(const MarsTerm& term, const Dataset& data) {
  const auto n = static_cast<Eigen::Index>(data.n());
  if (term.covariate) return data.c.col(static_cast<Eigen::Index>(*term.covariate));
  Vector v = Vector::Ones(n);
  for (const auto& h : term.factors) {
    const auto col = static_cast<Eigen::Index>(h.var);
    for (Eigen::Index i = 0; i < n; ++i) v(i) *= h(data.x(i, col));
  }
  return v;
}

Matrix basis_matrix(const MarsModel& model, const Dataset& data) { return basis_of(model.terms, data); }

Vector working_response(const Dataset& data, Family family) {
  if (family == Family::Gaussian) return data.y;
  return (data.y.array() + 0.5).log().matrix();
}

double mars_gcv(double rss, std::size_t n, std::size_t terms, std::size_t knots, double penalty) {
  const double nn = static_cast<double>(n);
  const double c = static_cast<double>(terms) + penalty * static_cast<double>(knots);
  if (c >= nn) return std::numeric_limits<double>::infinity();
  const double shrink = 1.0 - c / nn;
  return rss / nn / (shrink * shrink);
}

MarsModel forward_pass(const Dataset& data, const MarsConfig& cfg) {
  if (cfg.max_terms < 3) throw std::invalid_argument("max_terms must be >= 3");
  if (cfg.degree != 1 && cfg.degree != 2) throw std::invalid_argument("degree must be 1 or 2");
  data.validate();
  const std::size_t n = data.n();
  if (n <= cfg.max_terms) throw std::invalid_argument("MARS needs more rows than max_terms");

  const Vector z = working_response(data, cfg.family);
  const auto rows = static_cast<Eigen::Index>(n);
  OrthoBasis basis(rows);
  MarsModel model;
  std::vector<Vector> values;

  model.terms.push_back(MarsTerm{});
  basis.append(Vector::Ones(rows));
  values.push_back(Vector::Ones(rows));
  for (std::size_t j = 0; j < data.q(); ++j) {
    MarsTerm t;
    t.covariate = j;
    if (basis.append(data.c.col(static_cast<Eigen::Index>(j)))) {
      model.terms.push_back(t);
      values.push_back(data.c.col(static_cast<Eigen::Index>(j)));
    }
  }
  Vector resid = z - basis.q() * (basis.q().transpose() * z);
  const double rss0 = resid.squaredNorm();
  model.rss_path.push_back(rss0);

  std::vector<std::vector<std::size_t>> sorted(data.p());
  for (std::size_t j = 0; j < data.p(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    sorted[j].resize(n);
    std::iota(sorted[j].begin(), sorted[j].end(), std::size_t{0});
    std::stable_sort(sorted[j].begin(), sorted[j].end(), [&](std::size_t a, std::size_t b) {
      return data.x(static_cast<Eigen::Index>(a), col) < data.x(static_cast<Eigen::Index>(b), col);
    });
  }

  const auto hinge_count = [&] {
    return static_cast<std::size_t>(std::count_if(model.terms.begin(), model.terms.end(),
                                                  [](const MarsTerm& t) { return !t.covariate; }));
  };

  std::vector<std::size_t> active;
  while (hinge_count() + 2 <= cfg.max_terms && rss0 > 0.0) {
    const Matrix& q = basis.q();
    const auto m = q.cols();
    std::optional<Candidate> best;

    for (std::size_t parent = 0; parent < model.terms.size(); ++parent) {
      const auto& pt = model.terms[parent];
      if (pt.covariate || pt.degree() >= static_cast<std::size_t>(cfg.degree)) continue;
      const Vector& b = values[parent];
      for (std::size_t var = 0; var < data.p(); ++var) {
        if (std::any_of(pt.factors.begin(), pt.factors.end(), [&](const Hinge& h) { return h.var == var; })) {
          continue;
        }
        const auto col = static_cast<Eigen::Index>(var);
        active.clear();
        for (auto r : sorted[var]) {
          if (b(static_cast<Eigen::Index>(r)) != 0.0) active.push_back(r);
        }
        const std::size_t count = active.size();
        if (count < 2 * cfg.min_span + 1) continue;

        // Totals over the parent's support.
        Vector a0_total = Vector::Zero(m), a1_total = Vector::Zero(m);
        double p0_total = 0, p1_total = 0, p2_total = 0, r0_total = 0, r1_total = 0;
        for (auto r : active) {
          const auto i = static_cast<Eigen::Index>(r);
          const double bi = b(i), xi = data.x(i, col);
          a0_total.noalias() += bi * q.row(i).transpose();
          a1_total.noalias() += (bi * xi) * q.row(i).transpose();
          p0_total += bi * bi;
          p1_total += bi * bi * xi;
          p2_total += bi * bi * xi * xi;
          r0_total += bi * resid(i);
          r1_total += bi * xi * resid(i);
        }

        Vector a0 = Vector::Zero(m), a1 = Vector::Zero(m);
        double p0 = 0, p1 = 0, p2 = 0, r0 = 0, r1 = 0;
        std::size_t next = 0;  // first active position not yet accumulated
        double last_knot = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t pos = cfg.min_span; pos + cfg.min_span < count; pos += cfg.min_span) {
          const double t = data.x(static_cast<Eigen::Index>(active[pos]), col);
          if (t == last_knot) continue;
          last_knot = t;
          // Accumulate every row with x <= t.
          while (next < count && data.x(static_cast<Eigen::Index>(active[next]), col) <= t) {
            const auto i = static_cast<Eigen::Index>(active[next]);
            const double bi = b(i), xi = data.x(i, col);
            a0.noalias() += bi * q.row(i).transpose();
            a1.noalias() += (bi * xi) * q.row(i).transpose();
            p0 += bi * bi;
            p1 += bi * bi * xi;
            p2 += bi * bi * xi * xi;
            r0 += bi * resid(i);
            r1 += bi * xi * resid(i);
            ++next;
          }
          if (next >= count) break;

          // Up hinge b (x - t)_+ lives on x > t, down hinge b (t - x)_+ on x <= t.
          const Vector qc_up = (a1_total - a1) - t * (a0_total - a0);
          const double cc_up = (p2_total - p2) - 2 * t * (p1_total - p1) + t * t * (p0_total - p0);
          const double rc_up = (r1_total - r1) - t * (r0_total - r0);
          const Vector qc_down = t * a0 - a1;
          const double cc_down = t * t * p0 - 2 * t * p1 + p2;
          const double rc_down = t * r0 - r1;

          const double uu_up = cc_up - qc_up.squaredNorm();
          const double uu_down = cc_down - qc_down.squaredNorm();
          const double ud = -qc_up.dot(qc_down);
          const bool up_ok = cc_up > 0 && uu_up > kCollinear * cc_up;
          const bool down_ok = cc_down > 0 && uu_down > kCollinear * cc_down;

          double reduction = 0.0;
          const double det = uu_up * uu_down - ud * ud;
          if (up_ok && down_ok && det > kCollinear * uu_up * uu_down) {
            reduction = (uu_down * rc_up * rc_up - 2 * ud * rc_up * rc_down + uu_up * rc_down * rc_down) / det;
          } else {
            if (up_ok) reduction = std::max(reduction, rc_up * rc_up / uu_up);
            if (down_ok) reduction = std::max(reduction, rc_down * rc_down / uu_down);
          }
          if (!best || reduction > best->reduction) best = Candidate{reduction, parent, var, t};
        }
      }
    }

    if (!best || best->reduction < 1e-10 * rss0) break;

    const MarsTerm parent_term = model.terms[best->parent];
    const Vector parent_values = values[best->parent];
    bool added = false;
    for (int sign : {+1, -1}) {
      MarsTerm term = parent_term;
      term.factors.push_back(Hinge{best->var, best->knot, sign});
      Vector v = parent_values;
      const auto col = static_cast<Eigen::Index>(best->var);
      for (Eigen::Index i = 0; i < rows; ++i) v(i) *= term.factors.back()(data.x(i, col));
      if (basis.append(v)) {
        const auto& qn = basis.q().col(basis.cols() - 1);
        resid -= qn.dot(resid) * qn;
        model.terms.push_back(std::move(term));
        values.push_back(std::move(v));
        added = true;
      }
    }
    if (!added) break;
    model.rss_path.push_back(resid.squaredNorm());
  }

  finalise(model, data, z, cfg);
  return model;
}

MarsModel backward_pass(const MarsModel& model, const Dataset& data, const MarsConfig& cfg) {
  const Vector z = working_response(data, cfg.family);
  const Matrix full = basis_of(model.terms, data);
  const std::size_t n = data.n();

  std::vector<std::size_t> current(model.terms.size());
  std::iota(current.begin(), current.end(), std::size_t{0});
  const auto evaluate = [&](const std::vector<std::size_t>& subset) {
    Matrix b(full.rows(), static_cast<Eigen::Index>(subset.size()));
    std::vector<MarsTerm> terms;
    for (std::size_t k = 0; k < subset.size(); ++k) {
      b.col(static_cast<Eigen::Index>(k)) = full.col(static_cast<Eigen::Index>(subset[k]));
      terms.push_back(model.terms[subset[k]]);
    }
    const double rss = least_squares(b, z).first;
    return mars_gcv(rss, n, subset.size(), count_knots(terms), cfg.knot_penalty);
  };

  std::vector<std::size_t> best_subset = current;
  double best_gcv = evaluate(current);
  while (true) {
    std::optional<std::size_t> drop;
    double drop_gcv = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < current.size(); ++k) {
      if (!model.terms[current[k]].is_hinge()) continue;
      std::vector<std::size_t> trial = current;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(k));
      const double g = evaluate(trial);
      if (!drop || g < drop_gcv) {
        drop = k;
        drop_gcv = g;
      }
    }
    if (!drop) break;
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(*drop));
    if (drop_gcv < best_gcv) {
      best_gcv = drop_gcv;
      best_subset = current;
    }
  }

  MarsModel out;
  out.rss_path = model.rss_path;
  for (auto k : best_subset) out.terms.push_back(model.terms[k]);
  finalise(out, data, z, cfg);
  return out;
}

MarsRefit refit_response(const MarsModel& model, const Dataset& data, Family family) {
  if (model.terms.empty()) throw std::invalid_argument("MARS model has no term");
  MarsRefit out;
  out.model = model;
  Matrix basis = basis_of(out.model.terms, data);
  Eigen::ColPivHouseholderQR<Matrix> qr(basis);
  qr.setThreshold(1e-10);
  if (qr.rank() < basis.cols()) {
    // Keep the intercept and the pivoted independent columns, in their original order.
    std::vector<bool> keep(static_cast<std::size_t>(basis.cols()), false);
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index i = 0; i < qr.rank(); ++i) keep[static_cast<std::size_t>(perm(i))] = true;
    keep[0] = true;
    std::vector<MarsTerm> terms;
    for (std::size_t k = 0; k < keep.size(); ++k) {
      if (keep[k]) terms.push_back(out.model.terms[k]);
    }
    out.model.terms = std::move(terms);
    basis = basis_of(out.model.terms, data);
  }
  GlmOptions options;
  options.compute_scores = false;
  while (true) {
    try {
      out.fit = fit_glm(basis, data.y, family, options);
      break;
    } catch (const SingularError&) {
      if (out.model.terms.size() <= 1) throw;
      out.model.terms.pop_back();
      basis = basis_of(out.model.terms, data);
    }
  }
  return out;
}

ThresholdSet extract_thresholds_mars(const MarsModel& model, const Dataset& data, const MarsConfig& cfg) {
  ThresholdSet out("MARS", data.names);
  const std::size_t p = data.p();
  std::vector<std::vector<double>> knots(p);
  for (const auto& term : model.terms) {
    for (const auto& h : term.factors) {
      if (h.sign > 0) knots[h.var].push_back(h.knot);
    }
  }
  std::vector<std::size_t> vars;
  for (std::size_t j = 0; j < p; ++j) {
    auto& k = knots[j];
    std::sort(k.begin(), k.end(), std::greater<>{});
    k.erase(std::unique(k.begin(), k.end()), k.end());
    if (!k.empty()) vars.push_back(j);
  }

  const auto joint = [&](const std::vector<std::size_t>& vs, const std::vector<double>& bounds,
                         double& sum) {
    std::size_t m = 0;
    sum = 0.0;
    for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
      bool in = true;
      for (std::size_t a = 0; a < vs.size() && in; ++a) in = data.x(i, static_cast<Eigen::Index>(vs[a])) >= bounds[a];
      if (in) {
        ++m;
        sum += data.y(i);
      }
    }
    return m;
  };

  while (!vars.empty()) {
    std::vector<double> bounds;
    for (auto j : vars) bounds.push_back(knots[j].front());
    double sum = 0.0;
    if (joint(vars, bounds, sum) >= cfg.min_box) {
      for (std::size_t a = 0; a < vars.size(); ++a) out.bounds[vars[a]] = bounds[a];
      return out;
    }

    // Exhaustive search over the descending knot grid.
    std::optional<std::vector<double>> best;
    double best_mean = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> idx(vars.size(), 0);
    while (true) {
      for (std::size_t a = 0; a < vars.size(); ++a) bounds[a] = knots[vars[a]][idx[a]];
      const std::size_t m = joint(vars, bounds, sum);
      if (m >= cfg.min_box && sum / static_cast<double>(m) > best_mean) {
        best_mean = sum / static_cast<double>(m);
        best = bounds;
      }
      // Odometer increment; done once the first digit wraps.
      std::size_t a = vars.size();
      bool done = true;
      while (a > 0) {
        --a;
        if (++idx[a] < knots[vars[a]].size()) {
          done = false;
          break;
        }
        idx[a] = 0;
      }
      if (done) break;
    }
    if (best) {
      for (std::size_t a = 0; a < vars.size(); ++a) out.bounds[vars[a]] = (*best)[a];
      if (!out.has_flag("fallback")) out.flags.push_back("fallback");
      return out;
    }

    // Relax: drop the variable with the fewest knots (the later one on ties).
    std::size_t drop = 0;
    for (std::size_t a = 1; a < vars.size(); ++a) {
      if (knots[vars[a]].size() <= knots[vars[drop]].size()) drop = a;
    }
    vars.erase(vars.begin() + static_cast<std::ptrdiff_t>(drop));
    if (!out.has_flag("relaxed")) out.flags.push_back("relaxed");
  }
  return out;
}

MarsResult fit_mars(const Dataset& data, const MarsConfig& cfg) {
  MarsResult result;
  result.forward = forward_pass(data, cfg);
  const MarsModel pruned = backward_pass(result.forward, data, cfg);
  result.refit = refit_response(pruned, data, cfg.family);
  result.thresholds = extract_thresholds_mars(result.refit.model, data, cfg);
  return result;
}

}  // namespace hhws
