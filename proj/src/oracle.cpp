// SPDX-License-Identifier: Apache-2.0

#include "beacon/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace beacon {

namespace {

void check_dims(const CalibrationView& calib, const VectorXd& w) {
  if (calib.x.cols() != w.size())
    throw Error(Errc::DimMismatch, "channel length does not match calibration");
  if (calib.x_tilde && (calib.x_tilde->rows() != calib.x.rows() ||
                        calib.x_tilde->cols() != calib.x.cols()))
    throw Error(Errc::DimMismatch, "X and X~ must have the same shape");
}

constexpr double kOracleTieTol = 1e-13;

bool lex_less(const Codes& a, const Codes& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

std::uint64_t candidate_count(const IntegerGrid& grid, Index n, std::uint64_t limit) {
  std::uint64_t total = 1;
  for (Index i = 0; i < n; ++i) {
    total *= static_cast<std::uint64_t>(grid.levels);
    if (total > limit) return limit + 1;
  }
  return total;
}

OracleResult exhaustive_best(const CalibrationView& calib, const VectorXd& w,
                             const IntegerGrid& grid, std::uint64_t limit) {
  check_dims(calib, w);
  if (candidate_count(grid, w.size(), limit) > limit)
    throw Error(Errc::TooLarge, "grid^N exceeds the oracle limit of " + std::to_string(limit));

  // cos_star is the exact maximum; q_star is the lexicographically smallest
  // candidate within round-off of it
  OracleResult best;
  bool found = false;
  double top = -2.0;
  best.enumerated = enumerate_cosines(calib, w, grid, [&](const Codes&, double value) {
    if (std::isnan(value)) return;
    top = std::max(top, value);
    found = true;
  });
  if (found) {
    enumerate_cosines(calib, w, grid, [&](const Codes& q, double value) {
      if (!(value >= top - kOracleTieTol)) return;
      if (best.q_star.size() == 0 || lex_less(q, best.q_star)) best.q_star = q;
    });
    best.cos_star = top;
  }
  if (!found) {
    best.q_star = Codes::Constant(w.size(), grid.nearest_to_zero());
    return best;
  }
  const VectorXd v = calib.quantized_side() * best.q_star.cast<double>();
  best.c_star = optimal_scale(calib.x * w, v);
  return best;
}

bool verify_fixed_point(const CalibrationView& calib, const VectorXd& w, const Codes& q,
                        double c) {
  check_dims(calib, w);
  const VectorXd v = calib.quantized_side() * q.cast<double>();
  const double expected = optimal_scale(calib.x * w, v);
  return std::abs(c - expected) <= 1e-12 * std::max(1.0, std::abs(c));
}

RefitResult rtn_refit(const VectorXd& w, const CalibrationView& calib, int levels) {
  check_dims(calib, w);
  const RTNResult rtn = rtn_quantize(w, {levels, 1.0, 1.0});
  RefitResult out{rtn.q, 0.0, rtn.zero_point};
  const VectorXd v = calib.quantized_side() * rtn.q.cast<double>();
  if (v.squaredNorm() > 0.0) out.scale = optimal_scale(calib.x * w, v);
  return out;
}

}  // namespace beacon
