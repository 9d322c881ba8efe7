// SPDX-License-Identifier: Apache-2.0

#include "beacon/cli.hpp"

#include "beacon/harness.hpp"
#include "beacon/oracle.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

using namespace beacon;

namespace {

const std::filesystem::path kDir = std::filesystem::path(BEACON_TEST_TMP) / "cli";

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string p(const std::string& name) { return (kDir / name).string(); }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void ensure_layer() {
  static bool done = false;
  if (done) return;
  std::filesystem::create_directories(kDir);
  REQUIRE(run({"gen", "--seed", "3", "--m", "64", "--n", "16", "--n-prime", "12", "--out-dir",
               kDir.string()})
              .code == 0);
  REQUIRE(run({"gen", "--seed", "4", "--m", "16", "--n", "4", "--n-prime", "3", "--out-dir",
               p("small")})
              .code == 0);
  done = true;
}

}  // namespace

TEST_CASE("quantize happy path writes the BCNQ file and report") {
  ensure_layer();
  const Run r = run({"quantize", "--weights", p("w.bcn"), "--calib", p("x.bcn"), "--bits", "2",
                     "--loops", "6", "--out", p("q.bcnq"), "--report", p("r.json"), "--scales",
                     p("s.json")});
  CHECK(r.code == 0);
  REQUIRE(std::filesystem::exists(p("q.bcnq")));
  REQUIRE(std::filesystem::exists(p("r.json")));
  const QuantizedMatrixFile q = read_quantized(p("q.bcnq"));
  CHECK(q.bits == 2);
  CHECK(q.n_rows == 16);
  CHECK(q.n_cols == 12);

  const auto report = nlohmann::json::parse(slurp(p("r.json")));
  CHECK(report["config"]["loops"] == 6);
  CHECK(report["config"]["error_correction"] == false);
  const auto scales = nlohmann::json::parse(slurp(p("s.json")));
  REQUIRE(scales.size() == 12);
  for (std::size_t j = 0; j < 12; ++j) CHECK(scales[j]["c"].get<double>() == q.columns[j].scale);

  // eval on the written file reproduces the report
  const Run e = run({"eval", "--weights", p("w.bcn"), "--calib", p("x.bcn"), "--quantized",
                     p("q.bcnq")});
  CHECK(e.code == 0);
  const auto eval = nlohmann::json::parse(e.out);
  CHECK(eval["rel_error"].get<double>() == report["report"]["rel_error"].get<double>());
}

TEST_CASE("quantize output does not depend on the thread count") {
  ensure_layer();
  for (const char* t : {"1", "8"})
    REQUIRE(run({"quantize", "--weights", p("w.bcn"), "--calib", p("x.bcn"), "--calib-tilde",
                 p("xt.bcn"), "--bits", "3", "--threads", t, "--out", p(std::string("t") + t + ".bcnq"),
                 "--report", p(std::string("t") + t + ".json")})
                .code == 0);
  CHECK(slurp(p("t1.bcnq")) == slurp(p("t8.bcnq")));
  auto a = nlohmann::json::parse(slurp(p("t1.json")));
  auto b = nlohmann::json::parse(slurp(p("t8.json")));
  a["report"].erase("wall_ms");
  b["report"].erase("wall_ms");
  CHECK(a == b);
  CHECK(a["config"]["error_correction"] == true);

  setenv("BEACON_THREADS", "3", 1);
  CHECK(run({"quantize", "--weights", p("w.bcn"), "--calib", p("x.bcn"), "--calib-tilde",
             p("xt.bcn"), "--bits", "3", "--out", p("tenv.bcnq")})
            .code == 0);
  unsetenv("BEACON_THREADS");
  CHECK(slurp(p("t1.bcnq")) == slurp(p("tenv.bcnq")));
}

TEST_CASE("usage errors exit with code 2") {
  ensure_layer();
  const Run bits = run({"quantize", "--weights", p("w.bcn"), "--calib", p("x.bcn"), "--bits", "9",
                        "--out", p("bad.bcnq")});
  CHECK(bits.code == cli::kUsage);
  CHECK(bits.err.find("[1 - 8]") != std::string::npos);

  CHECK(run({"quantize", "--bogus"}).code == cli::kUsage);
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"quantize", "--weights", p("w.bcn"), "--calib", p("x.bcn"), "--bits", "2",
             "--levels", "3", "--out", p("bad.bcnq")})
            .code == cli::kUsage);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("file and shape errors have distinct exit codes") {
  ensure_layer();
  const Run missing = run({"quantize", "--weights", p("nope.bcn"), "--calib", p("x.bcn"), "--out",
                           p("bad.bcnq")});
  CHECK(missing.code == cli::kIo);
  CHECK(missing.err.find("nope.bcn") != std::string::npos);

  // W from the small layer has 4 rows, X has 16 columns
  const Run shape = run({"quantize", "--weights", p("small/w.bcn"), "--calib", p("x.bcn"),
                         "--out", p("bad.bcnq")});
  CHECK(shape.code == cli::kBadShape);
  CHECK(shape.err.find("DimMismatch") != std::string::npos);

  {
    std::ofstream junk(p("junk.bcn"), std::ios::binary);
    junk << "XXXXjunk";
  }
  const Run format = run({"quantize", "--weights", p("junk.bcn"), "--calib", p("x.bcn"), "--out",
                          p("bad.bcnq")});
  CHECK(format.code == cli::kBadFormat);
  CHECK(format.err.find("BadMagic") != std::string::npos);
}

TEST_CASE("oracle subcommand matches the library") {
  ensure_layer();
  const Run r = run({"oracle", "--weights", p("small/w.bcn"), "--calib", p("small/x.bcn"),
                     "--bits", "2", "--column", "1"});
  REQUIRE(r.code == 0);
  const MatrixXd w = to_matrix(read_tensor(p("small/w.bcn")));
  const MatrixXd x = to_matrix(read_tensor(p("small/x.bcn")));
  const VectorXd col = w.col(1);
  const OracleResult expected = exhaustive_best({x, nullptr}, col, make_grid(col, 4));
  char buf[64];
  std::snprintf(buf, sizeof buf, "cos* %.17g", expected.cos_star);
  CHECK(r.out.find(buf) != std::string::npos);
  CHECK(r.out.find("enumerated 256") != std::string::npos);

  const Run all = run({"oracle", "--weights", p("small/w.bcn"), "--calib", p("small/x.bcn"),
                       "--levels", "3"});
  CHECK(all.code == 0);
  CHECK(std::count(all.out.begin(), all.out.end(), '\n') == 3);
}

TEST_CASE("compare subcommand emits the CSV table") {
  ensure_layer();
  const Run r = run({"compare", "--weights", p("w.bcn"), "--calib", p("x.bcn"), "--bits", "2"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("method,bits,rel_error,mean_cos,wall_ms\n", 0) == 0);
  CHECK(r.out.find("\nbeacon,2,") != std::string::npos);
  CHECK(r.out.find("\nrtn_refit,2,") != std::string::npos);
  CHECK(r.out.find("\nrtn,2,") != std::string::npos);

  CHECK(run({"compare", "--weights", p("w.bcn"), "--calib", p("x.bcn"), "--levels", "3", "--out",
             p("cmp.csv")})
            .code == 0);
  CHECK(slurp(p("cmp.csv")).find("\nbeacon,1.58496,") != std::string::npos);
}
