#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "hhws/data.hpp"

namespace testing {

inline std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
  const auto dir = std::filesystem::temp_directory_path() / "hhws_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << contents;
  return path;
}

inline hhws::Date day(int y, unsigned m, unsigned d) {
  return std::chrono::sys_days{std::chrono::year{y} / m / d};
}

/// Consecutive dates starting at `start`.
inline std::vector<hhws::Date> days_from(hhws::Date start, std::size_t n) {
  std::vector<hhws::Date> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(start + std::chrono::days{static_cast<int>(i)});
  return out;
}

/// Dataset with p uniform indicators on [lo, hi], no covariates, y left at zero.
inline hhws::Dataset uniform_dataset(std::size_t n, std::size_t p, std::mt19937_64& rng, double lo = 0.0,
                                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  hhws::Dataset d;
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.x.cols(); ++j) d.x(i, j) = u(rng);
  }
  d.y = hhws::Vector::Zero(static_cast<Eigen::Index>(n));
  d.c.resize(static_cast<Eigen::Index>(n), 0);
  d.dates = days_from(day(2000, 1, 1), n);
  for (std::size_t j = 0; j < p; ++j) d.names.push_back("x" + std::to_string(j + 1));
  return d;
}

/// Poisson draws with the given means.
inline hhws::Vector poisson_draws(const hhws::Vector& mu, std::mt19937_64& rng) {
  hhws::Vector y(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) y(i) = std::poisson_distribution<int>(mu(i))(rng);
  return y;
}

}  // namespace testing
