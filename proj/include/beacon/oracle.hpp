// SPDX-License-Identifier: Apache-2.0
//
// Brute-force ground truth for toy instances and the RTN-with-refit baseline.
#pragma once

#include "beacon/geometry.hpp"
#include "beacon/grid.hpp"

#include <cstdint>
#include <limits>

namespace beacon {

struct OracleResult {
  Codes q_star;
  double c_star = 0.0;
  double cos_star = 0.0;
  std::uint64_t enumerated = 0;
};

inline constexpr std::uint64_t kDefaultOracleLimit = 1'000'000;

// Number of codes in grid^n, or limit + 1 if it exceeds `limit`.
std::uint64_t candidate_count(const IntegerGrid& grid, Index n, std::uint64_t limit);

// Visits every q in grid^n in mixed-radix order with q_0 varying fastest and
// calls visit(q, cos(X w, X~ q)); candidates with X~ q == 0 are passed as
// NaN. Returns the number of candidates visited.
template <typename Visitor>
std::uint64_t enumerate_cosines(const CalibrationView& calib, const VectorXd& w,
                                const IntegerGrid& grid, Visitor&& visit);

// Global maximizer of cos(X w, X~ q) over grid^n. Ties go to the
// lexicographically smallest q. Throws TooLarge past `limit` candidates.
OracleResult exhaustive_best(const CalibrationView& calib, const VectorXd& w,
                             const IntegerGrid& grid,
                             std::uint64_t limit = kDefaultOracleLimit);

// |c - <X w, X~ q> / ||X~ q||^2| <= 1e-12 * max(1, |c|).
bool verify_fixed_point(const CalibrationView& calib, const VectorXd& w, const Codes& q,
                        double c);

struct RefitResult {
  Codes q;
  double scale = 0.0;
  int zero_point = 0;
};

// RTN codes (alpha = beta = 1) with the scale replaced by the optimal one.
RefitResult rtn_refit(const VectorXd& w, const CalibrationView& calib, int levels);

template <typename Visitor>
std::uint64_t enumerate_cosines(const CalibrationView& calib, const VectorXd& w,
                                const IntegerGrid& grid, Visitor&& visit) {
  const MatrixXd& xt = calib.quantized_side();
  const VectorXd y = calib.x * w;
  const Index n = w.size();
  Codes q = Codes::Constant(n, grid.min());
  std::uint64_t count = 0;
  while (true) {
    const VectorXd v = xt * q.cast<double>();
    double value = std::numeric_limits<double>::quiet_NaN();
    if (v.squaredNorm() > 0.0 && y.squaredNorm() > 0.0) value = cosine(y, v);
    visit(static_cast<const Codes&>(q), value);
    ++count;
    Index i = 0;
    while (i < n && q[i] == grid.max()) q[i++] = grid.min();
    if (i == n) break;
    ++q[i];
  }
  return count;
}

}  // namespace beacon
