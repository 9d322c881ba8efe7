// SPDX-License-Identifier: Apache-2.0
//
// Synthetic layers, baselines over whole layers, and evaluation reports.
#pragma once

#include "beacon/beacon.hpp"
#include "beacon/tensor_io.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace beacon {

enum class WeightDist { Gaussian, Laplace, Uniform };
enum class CalibDist { Gaussian, Correlated };

struct SyntheticSpec {
  std::uint64_t seed = 42;
  Index m = 256;
  Index n = 64;
  Index n_prime = 64;
  WeightDist weight_dist = WeightDist::Gaussian;
  CalibDist calib_dist = CalibDist::Correlated;
  double rho = 0.5;
  // X~ = X + sigma * noise
  double sigma = 0.01;

  void validate() const;
};

// Tensors hold f32 values; the matrices are the same values widened.
struct SyntheticLayer {
  Tensor w_tensor, x_tensor, x_tilde_tensor;
  MatrixXd w, x, x_tilde;
};

SyntheticLayer gen_synthetic(const SyntheticSpec& spec);

// Writes w.bcn, x.bcn and xt.bcn into `dir`.
void write_synthetic(const SyntheticLayer& layer, const std::filesystem::path& dir);

// Min-max RTN (alpha = beta = 1) on every column.
QuantizedMatrix rtn_matrix(const MatrixXd& w, int levels);
// RTN codes with the optimal per-channel scale against the calibration.
QuantizedMatrix rtn_refit_matrix(const CalibrationView& calib, const MatrixXd& w, int levels);

QuantizedMatrixFile to_file(const QuantizedMatrix& qm);
QuantizedMatrix from_file(const QuantizedMatrixFile& file);

struct EvalReport {
  double rel_error = 0.0;  // ||X W - X~ Q Diag(s)||_F / ||X W||_F
  double mean_cos = 0.0;
  double min_cos = 0.0;
  std::vector<double> channel_cos;
  std::vector<double> channel_residual;  // ||X w_j - c_j X~ q_j||^2
  int levels = 0;
  int bits = 0;
  double effective_bits = 0.0;
  double bits_per_weight = 0.0;  // storage incl. per-channel z and scale
  int negative_scale_channels = 0;
  int degenerate_channels = 0;
  std::map<int, int> sweep_histogram;  // sweeps executed -> channel count
  // Max over channels of the deviation from
  // ||y - c v||^2 = ||y||^2 (1 - cos^2) + (c - c*)^2 ||v||^2, relative to ||y||^2.
  double identity_max_rel_dev = 0.0;
  double wall_ms = 0.0;
};

EvalReport evaluate(const MatrixXd& w, const CalibrationView& calib, const QuantizedMatrix& qm);

nlohmann::json to_json(const EvalReport& report);

struct CompareRow {
  std::string method;
  double effective_bits = 0.0;
  double rel_error = 0.0;
  double mean_cos = 0.0;
  double wall_ms = 0.0;
};

// beacon, rtn_refit and rtn on the same layer, in that order.
std::vector<CompareRow> compare_methods(const MatrixXd& w, const CalibrationView& calib,
                                        const BeaconConfig& cfg);

std::string to_csv(const std::vector<CompareRow>& rows);

}  // namespace beacon
