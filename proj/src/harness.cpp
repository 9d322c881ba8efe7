// SPDX-License-Identifier: Apache-2.0

#include "beacon/harness.hpp"

#include "beacon/oracle.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace beacon {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (m <= 0 || n <= 0 || n_prime <= 0)
    throw Error(Errc::InvalidArgument, "synthetic dims must be positive");
  if (m < n) throw Error(Errc::ShortCalibration, "synthetic layer needs m >= n");
  if (!std::isfinite(sigma) || sigma < 0.0)
    throw Error(Errc::InvalidArgument, "sigma must be finite and >= 0");
  if (!(std::abs(rho) < 1.0)) throw Error(Errc::InvalidArgument, "rho must lie in (-1, 1)");
}

SyntheticLayer gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::exponential_distribution<double> exponential(1.0);

  MatrixXd w(spec.n, spec.n_prime);
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = 0; j < w.cols(); ++j) {
      switch (spec.weight_dist) {
        case WeightDist::Gaussian: w(i, j) = normal(rng); break;
        case WeightDist::Uniform: w(i, j) = uniform(rng); break;
        case WeightDist::Laplace: {
          const double a = exponential(rng);
          w(i, j) = a - exponential(rng);
          break;
        }
      }
    }

  // AR(1) across columns keeps every column at unit variance.
  MatrixXd x(spec.m, spec.n);
  const double rho = spec.calib_dist == CalibDist::Correlated ? spec.rho : 0.0;
  const double innovation = std::sqrt(1.0 - rho * rho);
  for (Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = normal(rng);
    for (Index j = 1; j < x.cols(); ++j) x(i, j) = rho * x(i, j - 1) + innovation * normal(rng);
  }

  SyntheticLayer layer;
  layer.w_tensor = from_matrix(w);
  layer.x_tensor = from_matrix(x);
  layer.w = to_matrix(layer.w_tensor);
  layer.x = to_matrix(layer.x_tensor);
  if (spec.sigma > 0.0) {
    MatrixXd noise(spec.m, spec.n);
    for (Index i = 0; i < noise.rows(); ++i)
      for (Index j = 0; j < noise.cols(); ++j) noise(i, j) = normal(rng);
    layer.x_tilde_tensor = from_matrix(layer.x + spec.sigma * noise);
  } else {
    layer.x_tilde_tensor = layer.x_tensor;
  }
  layer.x_tilde = to_matrix(layer.x_tilde_tensor);
  return layer;
}

void write_synthetic(const SyntheticLayer& layer, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_tensor(dir / "w.bcn", layer.w_tensor);
  write_tensor(dir / "x.bcn", layer.x_tensor);
  write_tensor(dir / "xt.bcn", layer.x_tilde_tensor);
}

QuantizedMatrix rtn_matrix(const MatrixXd& w, int levels) {
  QuantizedMatrix qm{levels, storage_bits(levels), {}};
  for (Index j = 0; j < w.cols(); ++j) {
    const RTNResult r = rtn_quantize(w.col(j), {levels, 1.0, 1.0});
    ChannelResult ch;
    ch.q = r.q;
    ch.scale = r.scale;
    ch.zero_point = r.zero_point;
    qm.channels.push_back(std::move(ch));
  }
  return qm;
}

QuantizedMatrix rtn_refit_matrix(const CalibrationView& calib, const MatrixXd& w, int levels) {
  QuantizedMatrix qm{levels, storage_bits(levels), {}};
  for (Index j = 0; j < w.cols(); ++j) {
    RefitResult r = rtn_refit(w.col(j), calib, levels);
    ChannelResult ch;
    ch.q = std::move(r.q);
    ch.scale = r.scale;
    ch.zero_point = r.zero_point;
    qm.channels.push_back(std::move(ch));
  }
  return qm;
}

QuantizedMatrixFile to_file(const QuantizedMatrix& qm) {
  QuantizedMatrixFile file;
  file.bits = qm.bits;
  file.n_rows = static_cast<std::uint64_t>(qm.rows());
  file.n_cols = static_cast<std::uint64_t>(qm.cols());
  const int max_code = (1 << qm.bits) - 1;
  for (const auto& ch : qm.channels) {
    QuantizedColumn col;
    col.zero_point = ch.zero_point;
    col.scale = ch.scale;
    col.codes.reserve(static_cast<std::size_t>(ch.q.size()));
    for (Index i = 0; i < ch.q.size(); ++i) {
      const int k = ch.q[i] - ch.zero_point;
      if (k < 0 || k > max_code)
        throw Error(Errc::CodeOutOfRange, "code outside the channel grid");
      col.codes.push_back(static_cast<std::uint8_t>(k));
    }
    file.columns.push_back(std::move(col));
  }
  return file;
}

QuantizedMatrix from_file(const QuantizedMatrixFile& file) {
  QuantizedMatrix qm{1 << file.bits, file.bits, {}};
  for (const auto& col : file.columns) {
    ChannelResult ch;
    ch.zero_point = col.zero_point;
    ch.scale = col.scale;
    ch.q.resize(static_cast<Index>(col.codes.size()));
    for (std::size_t i = 0; i < col.codes.size(); ++i)
      ch.q[static_cast<Index>(i)] = col.codes[i] + col.zero_point;
    qm.channels.push_back(std::move(ch));
  }
  return qm;
}

EvalReport evaluate(const MatrixXd& w, const CalibrationView& calib, const QuantizedMatrix& qm) {
  const MatrixXd& xt = calib.quantized_side();
  if (calib.x.cols() != w.rows() || xt.rows() != calib.x.rows() || xt.cols() != calib.x.cols())
    throw Error(Errc::DimMismatch, "calibration and weight shapes are inconsistent");
  if (qm.cols() != w.cols() || (qm.cols() > 0 && qm.rows() != w.rows()))
    throw Error(Errc::DimMismatch, "quantized layer shape does not match the weights");

  EvalReport r;
  r.levels = qm.levels;
  r.bits = qm.bits;
  r.effective_bits = std::log2(static_cast<double>(qm.levels));
  const double n = static_cast<double>(w.rows());
  r.bits_per_weight = n > 0 ? (n * qm.bits + 32.0 + 64.0) / n : 0.0;

  const MatrixXd target = calib.x * w;
  double total_residual = 0.0;
  double cos_sum = 0.0;
  r.min_cos = qm.channels.empty() ? 0.0 : 1.0;
  for (Index j = 0; j < qm.cols(); ++j) {
    const auto& ch = qm.channels[static_cast<std::size_t>(j)];
    const VectorXd y = target.col(j);
    const VectorXd v = xt * ch.q.cast<double>();
    const double residual = (y - ch.scale * v).squaredNorm();
    const double yy = y.squaredNorm();
    const double vv = v.squaredNorm();
    const double cos = (yy > 0.0 && vv > 0.0) ? cosine(y, v) : 0.0;

    if (yy > 0.0) {
      const double c_star = vv > 0.0 ? y.dot(v) / vv : 0.0;
      const double predicted = yy * (1.0 - cos * cos) + (ch.scale - c_star) * (ch.scale - c_star) * vv;
      r.identity_max_rel_dev = std::max(r.identity_max_rel_dev, std::abs(residual - predicted) / yy);
    }
    r.channel_cos.push_back(cos);
    r.channel_residual.push_back(residual);
    total_residual += residual;
    cos_sum += cos;
    r.min_cos = std::min(r.min_cos, cos);
    if (ch.scale < 0.0) ++r.negative_scale_channels;
    if (ch.degenerate || vv == 0.0) ++r.degenerate_channels;
    if (!ch.e_trace.empty()) ++r.sweep_histogram[ch.sweeps()];
  }
  const double target_norm = target.norm();
  r.rel_error = target_norm > 0.0 ? std::sqrt(total_residual) / target_norm
                                  : (total_residual > 0.0 ? INFINITY : 0.0);
  r.mean_cos = qm.channels.empty() ? 0.0 : cos_sum / static_cast<double>(qm.channels.size());
  return r;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [sweeps, count] : report.sweep_histogram) hist[std::to_string(sweeps)] = count;
  return {
      {"rel_error", report.rel_error},
      {"mean_cos", report.mean_cos},
      {"min_cos", report.min_cos},
      {"levels", report.levels},
      {"bits", report.bits},
      {"effective_bits", report.effective_bits},
      {"bits_per_weight", report.bits_per_weight},
      {"negative_scale_channels", report.negative_scale_channels},
      {"degenerate_channels", report.degenerate_channels},
      {"sweep_histogram", hist},
      {"identity_max_rel_dev", report.identity_max_rel_dev},
      {"channel_cos", report.channel_cos},
      {"wall_ms", report.wall_ms},
  };
}

std::vector<CompareRow> compare_methods(const MatrixXd& w, const CalibrationView& calib,
                                        const BeaconConfig& cfg) {
  const int levels = cfg.alphabet_size();
  std::vector<CompareRow> rows;
  auto record = [&](const char* name, auto&& run) {
    const auto start = std::chrono::steady_clock::now();
    const QuantizedMatrix qm = run();
    const double ms = elapsed_ms(start);
    const EvalReport r = evaluate(w, calib, qm);
    rows.push_back({name, r.effective_bits, r.rel_error, r.mean_cos, ms});
  };
  record("beacon", [&] { return beacon_matrix(calib.x, calib.x_tilde, w, cfg); });
  record("rtn_refit", [&] { return rtn_refit_matrix(calib, w, levels); });
  record("rtn", [&] { return rtn_matrix(w, levels); });
  return rows;
}

std::string to_csv(const std::vector<CompareRow>& rows) {
  std::ostringstream out;
  out << "method,bits,rel_error,mean_cos,wall_ms\n";
  for (const auto& row : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s,%s,%.10g,%.10g,%.3f\n", row.method.c_str(),
                  format_g(row.effective_bits).c_str(), row.rel_error, row.mean_cos, row.wall_ms);
    out << buf;
  }
  return out.str();
}

}  // namespace beacon
