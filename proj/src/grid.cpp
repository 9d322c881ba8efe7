// SPDX-License-Identifier: Apache-2.0

#include "beacon/grid.hpp"

#include <cfenv>
#include <cmath>
#include <string>

namespace beacon {

IntegerGrid IntegerGrid::from_bits(int bits, int zero_point) {
  return {levels_for_bits(bits), zero_point};
}

int IntegerGrid::nearest_to_zero() const {
  if (min() > 0) return min();
  if (max() < 0) return max();
  return 0;
}

int levels_for_bits(int bits) {
  if (bits < 1 || bits > 8)
    throw Error(Errc::UnsupportedBits, "bits must be in [1, 8], got " + std::to_string(bits));
  return 1 << bits;
}

int storage_bits(int levels) {
  int bits = 1;
  while ((1 << bits) < levels) ++bits;
  return bits;
}

double round_half_even(double x) {
  // nearbyint honours the current rounding mode; the default is to-nearest-even.
  const int saved = std::fegetround();
  if (saved != FE_TONEAREST) std::fesetround(FE_TONEAREST);
  const double r = std::nearbyint(x);
  if (saved != FE_TONEAREST) std::fesetround(saved);
  return r;
}

namespace {

void check_channel(const VectorXd& w) {
  if (w.size() == 0) throw Error(Errc::EmptyInput, "empty channel");
  if (!w.allFinite()) throw Error(Errc::NonFinite, "channel contains NaN or Inf");
}

void check_levels(int levels) {
  if (levels < 2 || levels > 256)
    throw Error(Errc::UnsupportedBits,
                "grid levels must be in [2, 256], got " + std::to_string(levels));
}

}  // namespace

int zero_point(const VectorXd& w, int levels) {
  check_channel(w);
  check_levels(levels);
  const double lo = w.minCoeff();
  const double hi = w.maxCoeff();
  if (hi == lo) return 0;
  return static_cast<int>(round_half_even(lo / (hi - lo) * (levels - 1)));
}

IntegerGrid make_grid(const VectorXd& w, int levels) { return {levels, zero_point(w, levels)}; }

Codes rtn_codes(const VectorXd& w, double scale, const IntegerGrid& grid) {
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw Error(Errc::NonPositiveScale, "RTN scale must be positive and finite");
  Codes q(w.size());
  for (Index i = 0; i < w.size(); ++i) {
    double k = round_half_even(w[i] / scale - grid.zero_point);
    k = std::min(std::max(k, 0.0), static_cast<double>(grid.levels - 1));
    q[i] = static_cast<int>(k) + grid.zero_point;
  }
  return q;
}

RTNResult rtn_quantize(const VectorXd& w, const RTNConfig& cfg) {
  check_channel(w);
  check_levels(cfg.levels);
  if (!(cfg.alpha > 0.0) || !(cfg.beta > 0.0) || !std::isfinite(cfg.alpha) ||
      !std::isfinite(cfg.beta))
    throw Error(Errc::InvalidArgument, "alpha and beta must be finite and positive");

  const double lo = w.minCoeff();
  const double hi = w.maxCoeff();
  if (hi == lo) return {Codes::Ones(w.size()), lo, 0};

  const double scale = (cfg.alpha * hi - cfg.beta * lo) / (cfg.levels - 1);
  if (!(scale > 0.0))
    throw Error(Errc::NonPositiveScale, "min-max scale is not positive for this alpha/beta");
  const IntegerGrid grid = make_grid(w, cfg.levels);
  return {rtn_codes(w, scale, grid), scale, grid.zero_point};
}

}  // namespace beacon
