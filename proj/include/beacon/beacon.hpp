// SPDX-License-Identifier: Apache-2.0
//
// Beacon: per-channel quantization on an unscaled integer grid.
//
// Each channel w is quantized by choosing integer codes q that maximize
// cos(X w, X~ q), first greedily coordinate by coordinate, then by cyclic
// coordinate-wise refinement sweeps. The scale is recovered afterwards in
// closed form, c = <X w, X~ q> / ||X~ q||^2. All inner loops run on the
// square factors of a ReducedPair instead of the tall calibration matrices.
#pragma once

#include "beacon/geometry.hpp"
#include "beacon/grid.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <vector>

namespace beacon {

enum class Ordering { NormSorted, Natural };

struct BeaconConfig {
  int bits = 4;
  // Overrides 2^bits when non-zero (3 gives the ternary grid).
  int levels = 0;
  int max_loops = 6;
  Ordering ordering = Ordering::NormSorted;
  bool error_correction = false;
  bool early_stop = true;
  // 0 = hardware concurrency. Never changes the result.
  int threads = 1;

  int alphabet_size() const;
  int stored_bits() const;
  void validate() const;
};

struct ChannelResult {
  Codes q;  // original coordinate order
  double scale = 0.0;
  int zero_point = 0;
  std::vector<double> e_trace;      // e_0 (greedy) then one entry per sweep
  std::optional<int> converged_at;  // first sweep that changed nothing
  std::vector<Index> permutation;   // visit order used, in original indices
  bool degenerate = false;          // ||X~ q|| == 0, scale forced to 0

  int sweeps() const { return static_cast<int>(e_trace.size()) - 1; }
  double final_cosine() const { return e_trace.empty() ? 0.0 : e_trace.back(); }
};

struct QuantizedMatrix {
  int levels = 0;
  int bits = 0;
  std::vector<ChannelResult> channels;
  bool rank_deficient_calibration = false;

  Index rows() const { return channels.empty() ? 0 : channels.front().q.size(); }
  Index cols() const { return static_cast<Index>(channels.size()); }
  // Q Diag(s) as a dense N x N' matrix.
  MatrixXd dequantize() const;
};

// Calibration factors shared by all channels of one layer: the column
// permutation and the ReducedPair of the permuted matrices.
struct PreparedLayer {
  ReducedPair pair;
  std::vector<Index> permutation;  // permuted position -> original column
  std::vector<Index> refine_order;  // positions (permuted) visited by sweeps
};

// Stable sort of column indices by increasing l2 norm.
std::vector<Index> order_columns(const MatrixXd& source);

PreparedLayer prepare_layer(const CalibrationView& calib, const BeaconConfig& cfg);

// Greedy first pass: q_t maximizes cos(L_{<=t} w_{<=t}, L~_{<t} q_{<t} + L~_t p).
// `w` is in the pair's (permuted) coordinate order.
Codes greedy_init(const ReducedPair& pair, const VectorXd& w, const IntegerGrid& grid);

struct SweepOutcome {
  double cosine = 0.0;
  int changed = 0;
};

// One cyclic pass of coordinate-wise argmax of cos(y, L~ q) over the grid.
// A coordinate moves only when the move strictly improves the cosine.
SweepOutcome refine_sweep(const ReducedPair& pair, const VectorXd& y, Codes& q,
                          const IntegerGrid& grid, std::span<const Index> visit_order);

// Quantizes one channel given in original coordinate order.
ChannelResult beacon_channel(const PreparedLayer& layer, const VectorXd& w,
                             const BeaconConfig& cfg);

// Quantizes every column of W (N x N'). X~ is used only when
// cfg.error_correction is set. Output is independent of cfg.threads.
QuantizedMatrix beacon_matrix(const MatrixXd& x, const MatrixXd* x_tilde, const MatrixXd& w,
                              const BeaconConfig& cfg);

// [{"col": j, "c": scale, "z": zero point, "b": bits}, ...] in column order.
nlohmann::json export_scales(const QuantizedMatrix& qm);

}  // namespace beacon
