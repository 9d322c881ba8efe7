// SPDX-License-Identifier: Apache-2.0

#include "beacon/cli.hpp"

#include "beacon/harness.hpp"
#include "beacon/oracle.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>

namespace beacon::cli {

namespace {

struct Inputs {
  std::string weights;
  std::string calib;
  std::string calib_tilde;
};

struct GridOpts {
  int bits = 4;
  int levels = 0;
};

struct Layer {
  MatrixXd w;
  MatrixXd x;
  std::optional<MatrixXd> x_tilde;

  CalibrationView view() const { return {x, x_tilde ? &*x_tilde : nullptr}; }
};

void add_inputs(CLI::App* cmd, Inputs& in, bool with_tilde = true) {
  cmd->add_option("--weights", in.weights, "weight tensor W (N x N'), BCN1")->required();
  cmd->add_option("--calib", in.calib, "calibration tensor X (m x N), BCN1")->required();
  if (with_tilde)
    cmd->add_option("--calib-tilde", in.calib_tilde,
                    "perturbed calibration X~ (m x N); enables error correction");
}

void add_grid(CLI::App* cmd, GridOpts& g) {
  auto* bits = cmd->add_option("--bits", g.bits, "bit width b, grid of 2^b codes")
                   ->check(CLI::Range(1, 8))
                   ->capture_default_str();
  cmd->add_option("--levels", g.levels, "number of grid codes (3 = ternary), overrides --bits")
      ->check(CLI::Range(2, 256))
      ->excludes(bits);
}

MatrixXd load_matrix(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error(Errc::Io, "missing file: " + path);
  return to_matrix(read_tensor(path));
}

Layer load_layer(const Inputs& in) {
  Layer layer{load_matrix(in.weights), load_matrix(in.calib), std::nullopt};
  if (!in.calib_tilde.empty()) layer.x_tilde = load_matrix(in.calib_tilde);
  if (layer.x.cols() != layer.w.rows())
    throw Error(Errc::DimMismatch, "calibration has " + std::to_string(layer.x.cols()) +
                                       " columns but weights have " +
                                       std::to_string(layer.w.rows()) + " rows");
  if (layer.x_tilde &&
      (layer.x_tilde->rows() != layer.x.rows() || layer.x_tilde->cols() != layer.x.cols()))
    throw Error(Errc::DimMismatch, "--calib-tilde must have the same shape as --calib");
  if (layer.x.rows() < layer.x.cols())
    throw Error(Errc::ShortCalibration, "calibration needs at least N rows");
  return layer;
}

int resolve_threads(const CLI::Option* opt, int value) {
  if (opt->count() > 0) return value;
  if (const char* env = std::getenv("BEACON_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 0) return static_cast<int>(n);
  }
  return 0;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(Errc::Io, "cannot open " + path + " for writing");
  f << text;
  if (!f) throw Error(Errc::Io, "write failed for " + path);
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::Io: return kIo;
    case Errc::BadMagic:
    case Errc::Truncated:
    case Errc::NonFinite:
    case Errc::UnsupportedDtype:
    case Errc::CodeOutOfRange: return kBadFormat;
    case Errc::DimMismatch:
    case Errc::ShortCalibration: return kBadShape;
    case Errc::UnsupportedBits:
    case Errc::InvalidArgument:
    case Errc::TooLarge: return kUsage;
    default: return kFailure;
  }
}

const char* ordering_name(Ordering o) { return o == Ordering::NormSorted ? "norm" : "natural"; }

nlohmann::json config_json(const BeaconConfig& cfg) {
  return {{"bits", cfg.stored_bits()},      {"levels", cfg.alphabet_size()},
          {"loops", cfg.max_loops},         {"ordering", ordering_name(cfg.ordering)},
          {"error_correction", cfg.error_correction}, {"early_stop", cfg.early_stop}};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Beacon per-channel post-training quantization", "beacon"};
  app.require_subcommand(1);

  // gen
  SyntheticSpec spec;
  std::string gen_dir;
  std::string weight_dist = "gaussian";
  std::string calib_dist = "correlated";
  auto* gen = app.add_subcommand("gen", "write a synthetic layer (w.bcn, x.bcn, xt.bcn)");
  gen->add_option("--seed", spec.seed)->capture_default_str();
  gen->add_option("--m", spec.m, "calibration rows")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--n", spec.n, "input features N")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--n-prime", spec.n_prime, "channels N'")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--weight-dist", weight_dist)
      ->check(CLI::IsMember({"gaussian", "laplace", "uniform"}))
      ->capture_default_str();
  gen->add_option("--calib-dist", calib_dist)
      ->check(CLI::IsMember({"gaussian", "correlated"}))
      ->capture_default_str();
  gen->add_option("--rho", spec.rho, "AR(1) column correlation")->capture_default_str();
  gen->add_option("--sigma", spec.sigma, "noise level of X~ = X + sigma * noise")->capture_default_str();
  gen->add_option("--out-dir", gen_dir)->required();

  // quantize / compare share the Beacon knobs
  Inputs q_in;
  GridOpts q_grid;
  BeaconConfig cfg;
  std::string ordering = "norm";
  bool no_early_stop = false;
  int threads = 0;
  std::string q_out, q_report, q_scales;
  auto* quantize = app.add_subcommand("quantize", "quantize a layer with Beacon");
  add_inputs(quantize, q_in);
  add_grid(quantize, q_grid);
  quantize->add_option("--loops", cfg.max_loops, "refinement sweeps K")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  quantize->add_option("--ordering", ordering)->check(CLI::IsMember({"norm", "natural"}))->capture_default_str();
  quantize->add_flag("--no-early-stop", no_early_stop, "always run all K sweeps");
  auto* q_threads = quantize->add_option("--threads", threads, "worker threads (0 = all cores)")
                        ->check(CLI::NonNegativeNumber);
  quantize->add_option("--out", q_out, "output BCNQ file")->required();
  quantize->add_option("--report", q_report, "JSON evaluation report");
  quantize->add_option("--scales", q_scales, "JSON per-channel scale export");

  Inputs e_in;
  std::string e_quant, e_report;
  auto* eval = app.add_subcommand("eval", "evaluate a BCNQ layer against its calibration");
  add_inputs(eval, e_in);
  eval->add_option("--quantized", e_quant, "BCNQ file")->required();
  eval->add_option("--report", e_report, "write the JSON report here instead of stdout");

  Inputs o_in;
  GridOpts o_grid;
  long long o_column = -1;
  std::uint64_t o_limit = kDefaultOracleLimit;
  auto* oracle = app.add_subcommand("oracle", "exhaustive optimum for small layers");
  add_inputs(oracle, o_in);
  add_grid(oracle, o_grid);
  oracle->add_option("--column", o_column, "only this channel");
  oracle->add_option("--limit", o_limit, "maximum number of candidates")->capture_default_str();

  Inputs c_in;
  GridOpts c_grid;
  BeaconConfig c_cfg;
  int c_threads = 0;
  std::string c_out;
  auto* compare = app.add_subcommand("compare", "beacon vs rtn_refit vs rtn as CSV");
  add_inputs(compare, c_in);
  add_grid(compare, c_grid);
  compare->add_option("--loops", c_cfg.max_loops)->check(CLI::NonNegativeNumber)->capture_default_str();
  auto* c_threads_opt = compare->add_option("--threads", c_threads)->check(CLI::NonNegativeNumber);
  compare->add_option("--out", c_out, "CSV path (default stdout)");

  std::vector<const char*> argv{"beacon"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (gen->parsed()) {
      spec.weight_dist = weight_dist == "laplace"   ? WeightDist::Laplace
                         : weight_dist == "uniform" ? WeightDist::Uniform
                                                    : WeightDist::Gaussian;
      spec.calib_dist = calib_dist == "gaussian" ? CalibDist::Gaussian : CalibDist::Correlated;
      write_synthetic(gen_synthetic(spec), gen_dir);
      out << "wrote " << gen_dir << "/{w,x,xt}.bcn\n";
      return kOk;
    }

    if (quantize->parsed()) {
      const Layer layer = load_layer(q_in);
      cfg.bits = q_grid.bits;
      cfg.levels = q_grid.levels;
      cfg.ordering = ordering == "natural" ? Ordering::Natural : Ordering::NormSorted;
      cfg.early_stop = !no_early_stop;
      cfg.error_correction = layer.x_tilde.has_value();
      cfg.threads = resolve_threads(q_threads, threads);

      const auto start = std::chrono::steady_clock::now();
      const QuantizedMatrix qm =
          beacon_matrix(layer.x, layer.x_tilde ? &*layer.x_tilde : nullptr, layer.w, cfg);
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      if (qm.rank_deficient_calibration)
        err << "warning: calibration matrix is rank deficient\n";

      write_quantized(q_out, to_file(qm));
      EvalReport report = evaluate(layer.w, layer.view(), qm);
      report.wall_ms = ms;
      if (!q_report.empty()) {
        const nlohmann::json doc{{"command", "quantize"}, {"config", config_json(cfg)},
                                 {"report", to_json(report)}};
        write_text(q_report, doc.dump(2) + "\n");
      }
      if (!q_scales.empty()) write_text(q_scales, export_scales(qm).dump(2) + "\n");
      out << "rel_error " << report.rel_error << " mean_cos " << report.mean_cos << "\n";
      return kOk;
    }

    if (eval->parsed()) {
      const Layer layer = load_layer(e_in);
      if (!std::filesystem::exists(e_quant)) throw Error(Errc::Io, "missing file: " + e_quant);
      const QuantizedMatrix qm = from_file(read_quantized(e_quant));
      const std::string doc = to_json(evaluate(layer.w, layer.view(), qm)).dump(2) + "\n";
      if (e_report.empty())
        out << doc;
      else
        write_text(e_report, doc);
      return kOk;
    }

    if (oracle->parsed()) {
      const Layer layer = load_layer(o_in);
      const int levels = o_grid.levels != 0 ? o_grid.levels : levels_for_bits(o_grid.bits);
      Index first = 0;
      Index last = layer.w.cols();
      if (o_column >= 0) {
        if (o_column >= layer.w.cols())
          throw Error(Errc::InvalidArgument, "--column out of range");
        first = static_cast<Index>(o_column);
        last = first + 1;
      }
      for (Index j = first; j < last; ++j) {
        const VectorXd w = layer.w.col(j);
        const OracleResult r = exhaustive_best(layer.view(), w, make_grid(w, levels), o_limit);
        char buf[128];
        std::snprintf(buf, sizeof buf, "col %lld cos* %.17g c* %.17g enumerated %llu q*",
                      static_cast<long long>(j), r.cos_star, r.c_star,
                      static_cast<unsigned long long>(r.enumerated));
        out << buf;
        for (Index i = 0; i < r.q_star.size(); ++i) out << ' ' << r.q_star[i];
        out << '\n';
      }
      return kOk;
    }

    if (compare->parsed()) {
      const Layer layer = load_layer(c_in);
      c_cfg.bits = c_grid.bits;
      c_cfg.levels = c_grid.levels;
      c_cfg.error_correction = layer.x_tilde.has_value();
      c_cfg.threads = resolve_threads(c_threads_opt, c_threads);
      const std::string csv = to_csv(compare_methods(layer.w, layer.view(), c_cfg));
      if (c_out.empty())
        out << csv;
      else
        write_text(c_out, csv);
      return kOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << " [" << to_string(e.code()) << "]\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace beacon::cli
