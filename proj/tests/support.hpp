// Fixtures shared by the unit tests.
#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "rfms/datamodel.hpp"

namespace rfms::testing {

/// Two Gaussian classes in p dims; positives shifted by `gap` along every axis.
inline Dataset two_class_gaussians(std::size_t n_neg, std::size_t n_pos, std::size_t p, double gap,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n_neg + n_pos), static_cast<Eigen::Index>(p));
  std::vector<Label> y;
  for (std::size_t i = 0; i < n_neg + n_pos; ++i) {
    const bool pos = i >= n_neg;
    for (std::size_t j = 0; j < p; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = normal(rng) + (pos ? gap : 0.0);
    y.push_back(pos ? Label::positive : Label::negative);
  }
  return Dataset(std::move(x), std::move(y));
}

inline Dataset from_rows(std::initializer_list<std::initializer_list<double>> rows, std::vector<int> labels) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) x(r, c++) = v;
    ++r;
  }
  std::vector<Label> y;
  for (int l : labels) y.push_back(l ? Label::positive : Label::negative);
  return Dataset(std::move(x), std::move(y));
}

}  // namespace rfms::testing
