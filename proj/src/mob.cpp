#include "hhws/mob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hhws/error.hpp"

namespace hhws {

double brownian_bridge_sup_sf(double x) {
  if (x <= 0.0) return 1.0;
  constexpr double pi = 3.14159265358979323846;
  if (x < 1.0) {
    // Small-x form of the Kolmogorov distribution.
    double cdf = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double odd = 2.0 * k - 1.0;
      cdf += std::exp(-odd * odd * pi * pi / (8.0 * x * x));
    }
    cdf *= std::sqrt(2.0 * pi) / x;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sf = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sf += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-300) break;
  }
  return std::clamp(sf, 0.0, 1.0);
}

InstabilityTest instability_test(const Matrix& scores, std::span<const std::size_t> order,
                                 std::size_t min_node) {
  const auto n = static_cast<std::size_t>(scores.rows());
  if (order.size() != n) throw DimensionError("ordering length does not match score rows");
  InstabilityTest result;
  if (n < 2 * min_node || n < 2) return result;

  const Matrix centred = scores.rowwise() - scores.colwise().mean();
  const Matrix cov = centred.transpose() * centred / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const Vector& lambda = eig.eigenvalues();
  const double top = lambda.size() > 0 ? lambda.maxCoeff() : 0.0;
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > 1e-10 * top && lambda(i) > 0.0) kept.push_back(i);
  }
  result.dropped_components = static_cast<std::size_t>(lambda.size()) - kept.size();
  if (kept.empty()) return result;

  Matrix transform;  // rows map a score vector to decorrelated components
  const Matrix& v = eig.eigenvectors();
  if (result.dropped_components == 0) {
    transform = v * lambda.cwiseInverse().cwiseSqrt().asDiagonal() * v.transpose();
  } else {
    transform.resize(static_cast<Eigen::Index>(kept.size()), scores.cols());
    for (std::size_t c = 0; c < kept.size(); ++c) {
      transform.row(static_cast<Eigen::Index>(c)) = v.col(kept[c]).transpose() / std::sqrt(lambda(kept[c]));
    }
  }
  const Matrix z = centred * transform.transpose();
  const auto comps = z.cols();

  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Vector partial = Vector::Zero(comps);
  Vector sup = Vector::Zero(comps);
  for (std::size_t i = 0; i + min_node < n; ++i) {
    partial += z.row(static_cast<Eigen::Index>(order[i])).transpose();
    if (i + 1 >= min_node) sup = sup.cwiseMax(partial.cwiseAbs2() * scale * scale);
  }

  double p_min = 1.0;
  for (Eigen::Index c = 0; c < comps; ++c) p_min = std::min(p_min, brownian_bridge_sup_sf(std::sqrt(sup(c))));
  result.statistic = sup.maxCoeff();
  result.p_value = std::min(1.0, static_cast<double>(comps) * p_min);
  return result;
}

std::vector<std::size_t> MobTree::terminal_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].terminal()) out.push_back(i);
  }
  return out;
}

namespace {

struct Cut {
  double value = 0.0;
  double deviance = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
};

// Residual sum of squares of y on X from accumulated cross products.
std::optional<double> gaussian_rss(const Matrix& xtx, const Vector& xty, double yty) {
  Eigen::LDLT<Matrix> ldlt(xtx);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  const Vector d = ldlt.vectorD().cwiseAbs();
  if (d.minCoeff() <= 1e-10 * d.maxCoeff()) return std::nullopt;
  const Vector beta = ldlt.solve(xty);
  return std::max(0.0, yty - xty.dot(beta));
}

class SplitSearch {
 public:
  SplitSearch(const Dataset& data, const MobConfig& cfg) : data_(data), cfg_(cfg) {
    design_ = cfg.model.design(data);
    y_ = data.y;
    if (cfg.model.family == Family::Gaussian) {
      // Centering keeps cross-product sums well conditioned.
      centred_ = design_;
      for (Eigen::Index j = 1; j < centred_.cols(); ++j) {
        centred_.col(j).array() -= centred_.col(j).mean();
      }
      y_centred_ = (y_.array() - y_.mean()).matrix();
    }
  }

  [[nodiscard]] const Matrix& design() const { return design_; }

  std::optional<Cut> best_cut(const std::vector<std::size_t>& rows, std::size_t var,
                              const GlmFit& parent) const {
    const auto col = static_cast<Eigen::Index>(var);
    std::vector<std::size_t> sorted = rows;
    std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
      return data_.x(static_cast<Eigen::Index>(a), col) < data_.x(static_cast<Eigen::Index>(b), col);
    });
    const std::size_t m = sorted.size();
    const std::size_t lo = cfg_.min_node;
    if (m < 2 * lo) return std::nullopt;

    std::optional<Cut> best;
    const auto value = [&](std::size_t i) { return data_.x(static_cast<Eigen::Index>(sorted[i]), col); };
    const auto consider = [&](std::size_t i, double dev) {
      if (!best || dev < best->deviance) {
        best = Cut{};
        best->deviance = dev;
        best->value = 0.5 * (value(i - 1) + value(i));
        best->left.assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(i));
        best->right.assign(sorted.begin() + static_cast<std::ptrdiff_t>(i), sorted.end());
      }
    };

    if (cfg_.model.family == Family::Gaussian) {
      const auto k = design_.cols();
      Matrix xtx_total = Matrix::Zero(k, k);
      Vector xty_total = Vector::Zero(k);
      double yty_total = 0.0;
      for (auto r : sorted) {
        const auto row = centred_.row(static_cast<Eigen::Index>(r)).transpose();
        const double yr = y_centred_(static_cast<Eigen::Index>(r));
        xtx_total.noalias() += row * row.transpose();
        xty_total += row * yr;
        yty_total += yr * yr;
      }
      Matrix xtx = Matrix::Zero(k, k);
      Vector xty = Vector::Zero(k);
      double yty = 0.0;
      for (std::size_t i = 1; i + lo <= m; ++i) {
        const auto row = centred_.row(static_cast<Eigen::Index>(sorted[i - 1])).transpose();
        const double yr = y_centred_(static_cast<Eigen::Index>(sorted[i - 1]));
        xtx.noalias() += row * row.transpose();
        xty += row * yr;
        yty += yr * yr;
        if (i < lo || !(value(i - 1) < value(i))) continue;
        const auto left = gaussian_rss(xtx, xty, yty);
        const auto right = gaussian_rss(xtx_total - xtx, xty_total - xty, yty_total - yty);
        if (left && right) consider(i, *left + *right);
      }
    } else {
      GlmOptions options;
      options.compute_scores = false;
      options.start = parent.coefficients;
      for (std::size_t i = lo; i + lo <= m; ++i) {
        if (!(value(i - 1) < value(i))) continue;
        const std::span<const std::size_t> left(sorted.data(), i);
        const std::span<const std::size_t> right(sorted.data() + i, m - i);
        try {
          const double dev = cfg_.model.fit(design_, y_, left, options).deviance +
                             cfg_.model.fit(design_, y_, right, options).deviance;
          consider(i, dev);
        } catch (const Error&) {
        }
      }
    }
    return best;
  }

 private:
  const Dataset& data_;
  const MobConfig& cfg_;
  Matrix design_;
  Matrix centred_;
  Vector y_;
  Vector y_centred_;
};

}  // namespace

MobTree grow(const Dataset& data, const MobConfig& config) {
  MobConfig cfg = config;
  cfg.model = config.model.bind(data.p());
  if (!(cfg.alpha_test > 0.0 && cfg.alpha_test < 1.0)) throw std::invalid_argument("alpha_test must be in (0, 1)");
  if (cfg.min_node < 2) throw std::invalid_argument("min_node must be >= 2");
  data.validate();

  MobTree tree;
  tree.names = data.names;
  tree.split_vars = cfg.split_vars;
  if (tree.split_vars.empty()) {
    tree.split_vars.resize(data.p());
    std::iota(tree.split_vars.begin(), tree.split_vars.end(), std::size_t{0});
  }
  for (auto j : tree.split_vars) {
    if (j >= data.p()) throw std::invalid_argument("split variable out of range");
  }

  const SplitSearch search(data, cfg);
  MobNode root;
  root.rows.resize(data.n());
  std::iota(root.rows.begin(), root.rows.end(), std::size_t{0});
  root.fit = cfg.model.fit(search.design(), data.y, root.rows);
  root.slope = cfg.model.slope_of(*root.fit);
  tree.nodes.push_back(std::move(root));

  std::vector<std::size_t> pending{0};
  std::vector<std::size_t> order;
  while (!pending.empty()) {
    const std::size_t id = pending.back();
    pending.pop_back();
    // Copy what we need: push_back below may reallocate `tree.nodes`.
    const std::vector<std::size_t> rows = tree.nodes[id].rows;
    if (!tree.nodes[id].fit || rows.size() < 2 * cfg.min_node) continue;
    const GlmFit parent_fit = *tree.nodes[id].fit;
    // An exact fit leaves only rounding noise in the scores; nothing to test.
    const Vector node_y = select_rows(data.y, rows);
    const double null_dev = deviance(cfg.model.family, node_y, Vector::Constant(node_y.size(), node_y.mean()));
    if (parent_fit.deviance <= 1e-12 * null_dev) continue;

    std::optional<std::size_t> chosen;
    double best_p = 1.0;
    for (auto j : tree.split_vars) {
      const auto col = static_cast<Eigen::Index>(j);
      order.resize(rows.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data.x(static_cast<Eigen::Index>(rows[a]), col) < data.x(static_cast<Eigen::Index>(rows[b]), col);
      });
      const auto test = instability_test(parent_fit.scores, order, cfg.min_node);
      tree.nodes[id].tests.push_back(test);
      if (test.p_value < best_p) {
        best_p = test.p_value;
        chosen = j;
      }
    }
    if (!chosen || best_p >= cfg.alpha_test) continue;

    const auto cut = search.best_cut(rows, *chosen, parent_fit);
    if (!cut) continue;

    MobNode left;
    MobNode right;
    left.rows = cut->left;
    right.rows = cut->right;
    try {
      left.fit = cfg.model.fit(search.design(), data.y, left.rows);
      right.fit = cfg.model.fit(search.design(), data.y, right.rows);
    } catch (const Error&) {
      continue;
    }
    left.slope = cfg.model.slope_of(*left.fit);
    right.slope = cfg.model.slope_of(*right.fit);
    left.depth = right.depth = tree.nodes[id].depth + 1;
    left.parent = right.parent = static_cast<int>(id);

    const int left_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(std::move(left));
    tree.nodes.push_back(std::move(right));
    auto& node = tree.nodes[id];
    node.split_var = *chosen;
    node.split_value = cut->value;
    node.left = left_id;
    node.right = left_id + 1;
    pending.push_back(static_cast<std::size_t>(left_id + 1));
    pending.push_back(static_cast<std::size_t>(left_id));
  }
  return tree;
}

ThresholdSet extract_thresholds(const MobTree& tree) {
  ThresholdSet out("MOB", tree.names);
  std::optional<std::size_t> steepest;
  for (auto id : tree.terminal_nodes()) {
    const auto& node = tree.nodes[id];
    if (!node.fit) continue;
    if (!steepest || node.slope > tree.nodes[*steepest].slope) steepest = id;
  }
  if (!steepest) return out;
  for (int child = static_cast<int>(*steepest); tree.nodes[static_cast<std::size_t>(child)].parent >= 0;) {
    const int parent = tree.nodes[static_cast<std::size_t>(child)].parent;
    const auto& node = tree.nodes[static_cast<std::size_t>(parent)];
    if (node.right == child) {
      auto& bound = out.bounds[*node.split_var];
      bound = bound ? std::max(*bound, node.split_value) : node.split_value;
    }
    child = parent;
  }
  return out;
}

}  // namespace hhws
