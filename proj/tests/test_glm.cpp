#include "doctest.h"

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "hhws/error.hpp"
#include "hhws/glm.hpp"

using namespace hhws;

namespace {

Matrix random_design(Eigen::Index n, Eigen::Index k, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Matrix x(n, k);
  x.col(0).setOnes();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 1; j < k; ++j) x(i, j) = z(rng);
  }
  return x;
}

}  // namespace

TEST_CASE("intercept-only Poisson is the log mean") {
  const Matrix one = Matrix::Ones(3, 1);
  const Vector y = (Vector(3) << 1, 2, 3).finished();
  const auto fit = fit_glm(one, y, Family::QuasiPoisson);
  CHECK(fit.converged);
  CHECK(fit.coefficients(0) == doctest::Approx(std::log(2.0)).epsilon(1e-10));
}

TEST_CASE("exact Gaussian fit") {
  Matrix x(4, 2);
  x << 1, 0, 1, 1, 1, 2, 1, 3;
  const Vector y = 2.0 * x.col(1);
  const auto fit = fit_glm(x, y, Family::Gaussian);
  CHECK(std::abs(fit.coefficients(0)) < 1e-12);
  CHECK(fit.coefficients(1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.deviance < 1e-20);
  CHECK(fit.dispersion == 1e-8);  // floored

  Matrix at(1, 2);
  at << 1, 3;
  CHECK(predict(fit, at)(0) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK_THROWS_AS(predict(fit, Matrix::Ones(1, 3)), DimensionError);
}

TEST_CASE("prediction with zero coefficients on the log link is one") {
  GlmFit fit;
  fit.family = Family::QuasiPoisson;
  fit.coefficients = Vector::Zero(2);
  CHECK(predict(fit, Matrix::Ones(2, 2))(1) == 1.0);
}

TEST_CASE("Poisson estimates are consistent (50 seeds)") {
  int inside = 0;
  for (int seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const Matrix x = random_design(10000, 2, rng);
    const Vector mu = (0.5 + 0.3 * x.col(1).array()).exp().matrix();
    const Vector y = testing::poisson_draws(mu, rng);
    const auto fit = fit_glm(x, y, Family::QuasiPoisson);
    const bool ok = std::abs(fit.coefficients(0) - 0.5) < 3 * fit.std_error(0) &&
                    std::abs(fit.coefficients(1) - 0.3) < 3 * fit.std_error(1);
    inside += ok ? 1 : 0;
  }
  CHECK(inside >= 48);
}

TEST_CASE("Gaussian IRLS matches the normal equations (property)") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index k = 2 + rep % 5;
    const Eigen::Index n = k + 5 + rep;
    const Matrix x = random_design(n, k, rng);
    Vector y(n);
    for (auto& v : y) v = z(rng) * 3;
    const auto fit = fit_glm(x, y, Family::Gaussian);
    const Matrix gram = x.transpose() * x;
    const Vector beta = gram.llt().solve(x.transpose() * y);
    CHECK((fit.coefficients - beta).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, beta.cwiseAbs().maxCoeff()));
    // Residual MSE dispersion.
    CHECK(fit.dispersion == doctest::Approx((y - x * beta).squaredNorm() / static_cast<double>(n - k)).epsilon(1e-9));
  }
}

TEST_CASE("intercept-only Poisson equals ln(mean y) (property)") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> rate(0.2, 80);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index n = 5 + rep;
    const Vector y = testing::poisson_draws(Vector::Constant(n, rate(rng)), rng);
    if (y.sum() == 0) continue;
    const auto fit = fit_glm(Matrix::Ones(n, 1), y, Family::QuasiPoisson);
    CHECK(std::abs(fit.coefficients(0) - std::log(y.mean())) < 1e-10);
  }
}

TEST_CASE("quasi-Poisson invariants (property)") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index k = 2 + rep % 4;
    const Eigen::Index n = 60 + 7 * rep;
    const Matrix x = random_design(n, k, rng);
    Vector beta(k);
    for (auto& b : beta) b = 0.2 * z(rng);
    beta(0) = 1.5;
    const Vector y = testing::poisson_draws((x * beta).array().exp().matrix(), rng);
    const auto fit = fit_glm(x, y, Family::QuasiPoisson);
    REQUIRE(fit.converged);

    // Scores vanish at the optimum.
    CHECK(fit.scores.colwise().sum().cwiseAbs().maxCoeff() < 1e-6 * static_cast<double>(n));
    // Dispersion only rescales the covariance.
    GlmOptions unit;
    unit.unit_dispersion = true;
    const auto f1 = fit_glm(x, y, Family::QuasiPoisson, unit);
    CHECK((f1.coefficients - fit.coefficients).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((f1.cov * fit.dispersion - fit.cov).cwiseAbs().maxCoeff() < 1e-10 * fit.cov.cwiseAbs().maxCoeff());
    // Pearson dispersion.
    const double pearson = ((y - fit.fitted).array().square() / fit.fitted.array()).sum() / static_cast<double>(n - k);
    CHECK(fit.dispersion == doctest::Approx(pearson).epsilon(1e-10));
    // Symmetric positive semi-definite covariance.
    CHECK((fit.cov - fit.cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(fit.cov).eigenvalues().minCoeff() >= -1e-12);
    // Prediction at training rows reproduces the fitted values.
    CHECK((predict(fit, x) - fit.fitted).cwiseAbs().maxCoeff() < 1e-10 * fit.fitted.maxCoeff());
    CHECK(fit.fitted.minCoeff() > 0);
  }
}

TEST_CASE("GLM errors") {
  Matrix x(5, 2);
  x << 1, 1, 1, 1, 1, 1, 1, 1, 1, 1;
  const Vector y = Vector::Ones(5);
  CHECK_THROWS_AS(fit_glm(x, y, Family::Gaussian), SingularError);
  CHECK_THROWS_AS(fit_glm(Matrix::Ones(2, 2), Vector::Ones(2), Family::Gaussian), DimensionError);
  CHECK_THROWS_AS(fit_glm(Matrix::Ones(3, 1), Vector::Ones(4), Family::Gaussian), DimensionError);
  CHECK_THROWS_AS(fit_glm(Matrix::Ones(3, 1), -Vector::Ones(3), Family::QuasiPoisson), std::invalid_argument);
  CHECK(parse_family("gaussian") == Family::Gaussian);
  CHECK(parse_family("quasipoisson") == Family::QuasiPoisson);
  CHECK_THROWS(parse_family("binomial"));
}
