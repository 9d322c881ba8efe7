// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "beacon/core.hpp"

#include <random>

namespace beacon::test {

inline MatrixXd gaussian_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

inline VectorXd gaussian_vector(std::mt19937_64& rng, Index n) {
  return gaussian_matrix(rng, n, 1).col(0);
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)});
}

}  // namespace beacon::test
