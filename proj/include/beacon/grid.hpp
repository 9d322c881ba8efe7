// SPDX-License-Identifier: Apache-2.0
//
// Unscaled integer grids and the min-max round-to-nearest baseline.
//
// A grid with `levels` codes and zero point z is {z, z+1, ..., z+levels-1}.
// For a b-bit grid levels = 2^b; the ternary "1.58-bit" grid uses levels = 3.
// Rounding is half-to-even throughout.
#pragma once

#include "beacon/core.hpp"

namespace beacon {

struct IntegerGrid {
  int levels = 2;
  int zero_point = 0;

  static IntegerGrid from_bits(int bits, int zero_point);

  int min() const { return zero_point; }
  int max() const { return zero_point + levels - 1; }
  bool contains(int q) const { return q >= min() && q <= max(); }
  // Grid element closest to zero; ties go to the smaller element.
  int nearest_to_zero() const;
};

// Number of levels of a b-bit grid; throws UnsupportedBits outside [1, 8].
int levels_for_bits(int bits);
// Smallest b with 2^b >= levels.
int storage_bits(int levels);

double round_half_even(double x);

// z = round(min(w) / (max(w) - min(w)) * (levels - 1)); 0 for constant w.
int zero_point(const VectorXd& w, int levels);

IntegerGrid make_grid(const VectorXd& w, int levels);

struct RTNConfig {
  int levels = 16;
  double alpha = 1.0;
  double beta = 1.0;
};

struct RTNResult {
  Codes q;
  double scale = 0.0;
  int zero_point = 0;
};

// q_i = clip(round(w_i / c - z); 0, levels-1) + z on a fixed scale c.
Codes rtn_codes(const VectorXd& w, double scale, const IntegerGrid& grid);

// Min-max RTN: c = (alpha*max(w) - beta*min(w)) / (levels - 1). A constant
// channel maps to z = 0, q = 1 and c = w_0 (exact reconstruction).
RTNResult rtn_quantize(const VectorXd& w, const RTNConfig& cfg);

template <typename Derived>
VectorXd dequantize(const Eigen::MatrixBase<Derived>& q, double scale) {
  return scale * q.template cast<double>();
}

}  // namespace beacon
