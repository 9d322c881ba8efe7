// SPDX-License-Identifier: Apache-2.0

#include "beacon/beacon.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

namespace beacon {

namespace {

// A candidate must beat the incumbent by this much to replace it. Keeps
// exact ties (several codes with cosine 1, say) on the smallest code and
// makes every accepted move a real improvement, so sweeps cannot cycle.
constexpr double kTieTol = 1e-13;

// Squared candidate norms at or below this fraction of their uncancelled
// magnitude are treated as a zero quantized output.
constexpr double kZeroOutput = 1e-24;

struct Candidate {
  int p = 0;
  double value = 0.0;
  bool defined = false;
};

// Scans p over the grid for the best cos between a fixed target and the
// vector base + p * col, given the inner products of its parts.
// target_sq = ||target||^2, tb = <target, base>, tc = <target, col>,
// bb = ||base||^2, bc = <base, col>, cc = ||col||^2.
Candidate best_candidate(const IntegerGrid& grid, double target_sq, double tb, double tc,
                         double bb, double bc, double cc) {
  Candidate best;
  for (int p = grid.min(); p <= grid.max(); ++p) {
    const double pd = p;
    const double den2 = bb + 2.0 * pd * bc + pd * pd * cc;
    if (!(den2 > kZeroOutput * (bb + pd * pd * cc))) continue;
    const double value = (tb + pd * tc) / std::sqrt(target_sq * den2);
    if (!best.defined || value > best.value + kTieTol) best = {p, value, true};
  }
  return best;
}

double channel_cosine(const VectorXd& y, const VectorXd& v) {
  if (!(y.squaredNorm() > 0.0) || !(v.squaredNorm() > 0.0)) return 0.0;
  return cosine(y, v);
}

VectorXd quantized_output(const ReducedPair& pair, const Codes& q) {
  return pair.L_tilde.triangularView<Eigen::Upper>() * q.cast<double>();
}

}  // namespace

int BeaconConfig::alphabet_size() const { return levels != 0 ? levels : levels_for_bits(bits); }

int BeaconConfig::stored_bits() const { return storage_bits(alphabet_size()); }

void BeaconConfig::validate() const {
  if (levels == 0) {
    levels_for_bits(bits);
  } else if (levels < 2 || levels > 256) {
    throw Error(Errc::UnsupportedBits,
                "levels must be in [2, 256], got " + std::to_string(levels));
  }
  if (max_loops < 0) throw Error(Errc::InvalidArgument, "max_loops must be >= 0");
  if (threads < 0) throw Error(Errc::InvalidArgument, "threads must be >= 0");
}

MatrixXd QuantizedMatrix::dequantize() const {
  MatrixXd out(rows(), cols());
  for (Index j = 0; j < cols(); ++j) {
    const auto& ch = channels[static_cast<std::size_t>(j)];
    out.col(j) = beacon::dequantize(ch.q, ch.scale);
  }
  return out;
}

std::vector<Index> order_columns(const MatrixXd& source) {
  const VectorXd norms = source.colwise().norm().transpose();
  std::vector<Index> perm(static_cast<std::size_t>(source.cols()));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::stable_sort(perm.begin(), perm.end(), [&](Index a, Index b) { return norms[a] < norms[b]; });
  return perm;
}

PreparedLayer prepare_layer(const CalibrationView& calib, const BeaconConfig& cfg) {
  const MatrixXd& source = calib.quantized_side();
  PreparedLayer layer;
  const auto n = static_cast<std::size_t>(calib.x.cols());
  if (cfg.ordering == Ordering::NormSorted) {
    layer.permutation = order_columns(source);
    layer.refine_order.resize(n);
    std::iota(layer.refine_order.rbegin(), layer.refine_order.rend(), Index{0});
  } else {
    layer.permutation.resize(n);
    std::iota(layer.permutation.begin(), layer.permutation.end(), Index{0});
    layer.refine_order = layer.permutation;
  }
  const MatrixXd x = calib.x(Eigen::all, layer.permutation);
  if (calib.x_tilde) {
    const MatrixXd x_tilde = (*calib.x_tilde)(Eigen::all, layer.permutation);
    layer.pair = reduce_inputs(x, x_tilde);
  } else {
    layer.pair = reduce_inputs(x);
  }
  return layer;
}

Codes greedy_init(const ReducedPair& pair, const VectorXd& w, const IntegerGrid& grid) {
  const Index n = pair.size();
  if (w.size() != n) throw Error(Errc::DimMismatch, "channel length does not match calibration");
  Codes q = Codes::Zero(n);
  VectorXd target = VectorXd::Zero(pair.L.rows());
  VectorXd partial = VectorXd::Zero(n);
  for (Index t = 0; t < n; ++t) {
    target += w[t] * pair.L.col(t);
    const auto col = pair.L_tilde.col(t).head(t + 1);
    const double target_sq = target.squaredNorm();
    Candidate best;
    if (target_sq > 0.0) {
      best = best_candidate(grid, target_sq, target.dot(partial), target.head(t + 1).dot(col),
                            partial.squaredNorm(), partial.head(t + 1).dot(col),
                            pair.col_norms[t] * pair.col_norms[t]);
    }
    q[t] = best.defined ? best.p : grid.nearest_to_zero();
    partial.head(t + 1) += q[t] * col;
  }
  return q;
}

SweepOutcome refine_sweep(const ReducedPair& pair, const VectorXd& y, Codes& q,
                          const IntegerGrid& grid, std::span<const Index> visit_order) {
  const double yy = y.squaredNorm();
  VectorXd u = quantized_output(pair, q);
  SweepOutcome out;
  if (!(yy > 0.0)) return out;

  const VectorXd y_cols = pair.L_tilde.transpose() * y;
  for (Index t : visit_order) {
    const auto col = pair.L_tilde.col(t).head(t + 1);
    const int current = q[t];
    u.head(t + 1) -= current * col;
    const double yb = y.dot(u);
    const double bb = u.squaredNorm();
    const double bc = u.head(t + 1).dot(col);
    const double cc = pair.col_norms[t] * pair.col_norms[t];

    const Candidate best = best_candidate(grid, yy, yb, y_cols[t], bb, bc, cc);
    const double cur_den2 = bb + 2.0 * current * bc + double(current) * current * cc;
    const bool cur_defined = cur_den2 > kZeroOutput * (bb + double(current) * current * cc);
    const double cur_value = cur_defined ? (yb + current * y_cols[t]) / std::sqrt(yy * cur_den2) : 0.0;

    int next = current;
    if (best.defined && (!cur_defined || best.value > cur_value + kTieTol)) next = best.p;
    if (next != current) ++out.changed;
    q[t] = next;
    u.head(t + 1) += next * col;
  }
  out.cosine = channel_cosine(y, quantized_output(pair, q));
  return out;
}

ChannelResult beacon_channel(const PreparedLayer& layer, const VectorXd& w,
                             const BeaconConfig& cfg) {
  const ReducedPair& pair = layer.pair;
  const Index n = pair.size();
  if (w.size() != n) throw Error(Errc::DimMismatch, "channel length does not match calibration");

  ChannelResult result;
  const IntegerGrid grid = make_grid(w, cfg.alphabet_size());
  result.zero_point = grid.zero_point;
  result.permutation = layer.permutation;

  const VectorXd w_perm = w(layer.permutation);
  Codes q = greedy_init(pair, w_perm, grid);
  const VectorXd y = pair.L * w_perm;
  result.e_trace.push_back(channel_cosine(y, quantized_output(pair, q)));

  for (int sweep = 1; sweep <= cfg.max_loops; ++sweep) {
    const SweepOutcome s = refine_sweep(pair, y, q, grid, layer.refine_order);
    result.e_trace.push_back(s.cosine);
    if (s.changed == 0) {
      result.converged_at = sweep;
      if (cfg.early_stop) break;
    }
  }

  const VectorXd v = quantized_output(pair, q);
  if (v.squaredNorm() > 0.0) {
    result.scale = optimal_scale(y, v);
  } else {
    result.scale = 0.0;
    result.degenerate = true;
  }

  result.q.resize(n);
  for (Index i = 0; i < n; ++i) result.q[layer.permutation[static_cast<std::size_t>(i)]] = q[i];
  return result;
}

QuantizedMatrix beacon_matrix(const MatrixXd& x, const MatrixXd* x_tilde, const MatrixXd& w,
                              const BeaconConfig& cfg) {
  cfg.validate();
  if (x.cols() != w.rows())
    throw Error(Errc::DimMismatch, "calibration has " + std::to_string(x.cols()) +
                                       " columns but weights have " + std::to_string(w.rows()) +
                                       " rows");
  if (cfg.error_correction && !x_tilde)
    throw Error(Errc::InvalidArgument, "error correction requires a perturbed calibration set");
  if (!w.allFinite()) throw Error(Errc::NonFinite, "weights contain NaN or Inf");

  const CalibrationView calib{x, cfg.error_correction ? x_tilde : nullptr};
  const PreparedLayer layer = prepare_layer(calib, cfg);

  QuantizedMatrix qm;
  qm.levels = cfg.alphabet_size();
  qm.bits = cfg.stored_bits();
  qm.rank_deficient_calibration = layer.pair.rank_deficient;
  qm.channels.resize(static_cast<std::size_t>(w.cols()));

  unsigned workers = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                     : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<Index>(w.cols(), 1)));

  std::atomic<Index> next{0};
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](unsigned id) {
    try {
      for (Index j = next++; j < w.cols(); j = next++)
        qm.channels[static_cast<std::size_t>(j)] = beacon_channel(layer, w.col(j), cfg);
    } catch (...) {
      errors[id] = std::current_exception();
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned id = 0; id < workers; ++id) pool.emplace_back(work, id);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return qm;
}

nlohmann::json export_scales(const QuantizedMatrix& qm) {
  auto out = nlohmann::json::array();
  for (std::size_t j = 0; j < qm.channels.size(); ++j) {
    const auto& ch = qm.channels[j];
    out.push_back({{"col", j}, {"c", ch.scale}, {"z", ch.zero_point}, {"b", qm.bits}});
  }
  return out;
}

}  // namespace beacon
