#include "hhws/glm.hpp"

#include <cmath>
#include <string>

#include "hhws/error.hpp"

namespace hhws {

namespace {

constexpr double kRankTolerance = 1e-10;
constexpr double kDispersionFloor = 1e-8;
constexpr double kMinMean = 1e-10;

struct WeightedSolve {
  Vector beta;
  Matrix xtwx_inverse;
};

// Least squares of sqrt(w) * z on sqrt(w) * X through column-pivoted QR.
WeightedSolve weighted_solve(const Matrix& x, const Vector& z, const Vector& w, bool want_inverse) {
  const Vector sw = w.cwiseSqrt();
  const Matrix xw = x.array().colwise() * sw.array();
  Eigen::ColPivHouseholderQR<Matrix> qr(xw);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < x.cols()) {
    throw SingularError("design matrix has rank " + std::to_string(qr.rank()) + " < " +
                        std::to_string(x.cols()) + " columns");
  }
  WeightedSolve out;
  out.beta = qr.solve((z.array() * sw.array()).matrix());
  if (want_inverse) {
    const auto k = x.cols();
    const Matrix r = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
    const Matrix r_inv = r.template triangularView<Eigen::Upper>().solve(Matrix::Identity(k, k));
    const Matrix unpermuted = r_inv * r_inv.transpose();
    const auto& perm = qr.colsPermutation();
    out.xtwx_inverse = perm * unpermuted * perm.transpose();
  }
  return out;
}

}  // namespace

std::string_view to_string(Family f) {
  switch (f) {
    case Family::QuasiPoisson:
      return "quasipoisson";
    case Family::Gaussian:
      return "gaussian";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  if (name == "quasipoisson" || name == "poisson") return Family::QuasiPoisson;
  if (name == "gaussian") return Family::Gaussian;
  throw std::invalid_argument("unknown family '" + std::string(name) + "'");
}

double deviance(Family family, const Vector& y, const Vector& mu) {
  if (family == Family::Gaussian) return (y - mu).squaredNorm();
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double yi = y(i);
    const double term = yi > 0.0 ? yi * std::log(yi / mu(i)) : 0.0;
    dev += 2.0 * (term - (yi - mu(i)));
  }
  return std::max(dev, 0.0);
}

GlmFit fit_glm(const Matrix& design, const Vector& y, Family family, const GlmOptions& options) {
  const auto n = design.rows();
  const auto k = design.cols();
  if (y.size() != n) throw DimensionError("response length does not match design rows");
  if (n <= k) {
    throw DimensionError("need more observations (" + std::to_string(n) + ") than coefficients (" +
                         std::to_string(k) + ")");
  }

  GlmFit fit;
  fit.family = family;
  Matrix xtwx_inverse;

  if (family == Family::Gaussian) {
    auto solved = weighted_solve(design, y, Vector::Ones(n), true);
    fit.coefficients = std::move(solved.beta);
    xtwx_inverse = std::move(solved.xtwx_inverse);
    fit.fitted = design * fit.coefficients;
    fit.deviance = deviance(family, y, fit.fitted);
    fit.converged = true;
    fit.iterations = 1;
  } else {
    if ((y.array() < 0.0).any()) throw std::invalid_argument("quasi-Poisson response must be >= 0");
    Vector eta;
    Vector mu;
    if (options.start && options.start->size() == k) {
      eta = design * *options.start;
      mu = eta.array().exp().max(kMinMean);
    } else {
      mu = (y.array() + 0.5).matrix();
      eta = mu.array().log();
    }
    double dev_old = deviance(family, y, mu);
    Vector beta = Vector::Zero(k);
    bool have_beta = false;
    for (int iter = 1; iter <= options.max_iterations; ++iter) {
      const Vector z = eta.array() + (y.array() - mu.array()) / mu.array();
      auto solved = weighted_solve(design, z, mu, false);
      Vector beta_new = std::move(solved.beta);

      Vector eta_new = design * beta_new;
      Vector mu_new = eta_new.array().min(700.0).exp().max(kMinMean);
      double dev = deviance(family, y, mu_new);
      // Step halving when the update overshoots.
      for (int half = 0; have_beta && (!std::isfinite(dev) || dev > dev_old * (1 + 1e-7) + 1e-10) && half < 20;
           ++half) {
        beta_new = 0.5 * (beta_new + beta);
        eta_new = design * beta_new;
        mu_new = eta_new.array().min(700.0).exp().max(kMinMean);
        dev = deviance(family, y, mu_new);
      }
      beta = std::move(beta_new);
      have_beta = true;
      eta = std::move(eta_new);
      mu = std::move(mu_new);
      fit.iterations = iter;
      const double change = std::abs(dev - dev_old) / (std::abs(dev) + 0.1);
      dev_old = dev;
      if (change < options.tolerance) {
        fit.converged = true;
        break;
      }
    }
    fit.coefficients = beta;
    fit.fitted = mu;
    fit.deviance = dev_old;
    xtwx_inverse = weighted_solve(design, eta, mu, true).xtwx_inverse;
  }

  const Vector resid = y - fit.fitted;
  if (options.unit_dispersion) {
    fit.dispersion = 1.0;
  } else {
    const double dof = static_cast<double>(n - k);
    const double pearson = family == Family::Gaussian
                               ? resid.squaredNorm()
                               : (resid.array().square() / fit.fitted.array()).sum();
    fit.dispersion = std::max(pearson / dof, kDispersionFloor);
  }
  fit.cov = fit.dispersion * xtwx_inverse;
  fit.cov = 0.5 * (fit.cov + fit.cov.transpose()).eval();
  if (options.compute_scores) fit.scores = design.array().colwise() * resid.array();
  return fit;
}

Vector predict(const GlmFit& fit, const Matrix& design) {
  if (design.cols() != fit.coefficients.size()) {
    throw DimensionError("design has " + std::to_string(design.cols()) + " columns, fit has " +
                         std::to_string(fit.coefficients.size()));
  }
  Vector eta = design * fit.coefficients;
  if (fit.family == Family::Gaussian) return eta;
  return eta.array().exp();
}

}  // namespace hhws
