// SPDX-License-Identifier: Apache-2.0

#include "beacon/tensor_io.hpp"

#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

using namespace beacon;

namespace {

std::filesystem::path tmp_path(const std::string& name) {
  std::filesystem::create_directories(BEACON_TEST_TMP);
  return std::filesystem::path(BEACON_TEST_TMP) / name;
}

Errc error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Io;
}

Tensor random_tensor(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ndim_dist(0, 4);
  std::uniform_int_distribution<std::uint64_t> extent(1, 6);
  std::uniform_int_distribution<std::uint32_t> raw;
  Tensor t;
  t.dims.resize(static_cast<std::size_t>(ndim_dist(rng)));
  for (auto& d : t.dims) d = extent(rng);
  t.data.resize(t.element_count());
  for (auto& v : t.data) {
    // arbitrary finite bit patterns, including subnormals and -0
    do {
      v = std::bit_cast<float>(raw(rng));
    } while (!std::isfinite(v));
  }
  return t;
}

}  // namespace

TEST_CASE("tensor decode of a hand-written 2x2 file") {
  const std::vector<std::uint8_t> bytes = {
      0x42, 0x43, 0x4E, 0x31, 0x00, 0x02,                    // magic, f32, ndim
      2,    0,    0,    0,    0,    0,    0,    0,           // dim 0
      2,    0,    0,    0,    0,    0,    0,    0,           // dim 1
      0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0x40,        // 1, 2
      0x00, 0x00, 0x40, 0x40, 0x00, 0x00, 0x80, 0x40};       // 3, 4
  const Tensor t = decode_tensor(bytes);
  CHECK(t.dims == std::vector<std::uint64_t>{2, 2});
  CHECK(t.data == std::vector<float>{1, 2, 3, 4});
  CHECK(encode_tensor(t) == bytes);

  const MatrixXd m = to_matrix(t);
  CHECK(m(0, 1) == 2.0);
  CHECK(m(1, 0) == 3.0);
}

TEST_CASE("tensor file sizes follow the header arithmetic") {
  CHECK(encode_tensor({{1}, {0.0f}}).size() == 4 + 1 + 1 + 8 + 4);
  CHECK(encode_tensor({{2, 3}, std::vector<float>(6, 1.5f)}).size() == 46);
}

TEST_CASE("tensor decode errors are distinct") {
  auto good = encode_tensor({{2, 2}, {1, 2, 3, 4}});

  auto bad_magic = good;
  bad_magic[0] = 'X';
  bad_magic[1] = 'X';
  bad_magic[2] = 'X';
  bad_magic[3] = 'X';
  CHECK(error_of([&] { decode_tensor(bad_magic); }) == Errc::BadMagic);

  auto truncated = good;
  truncated.resize(truncated.size() - 3);
  CHECK(error_of([&] { decode_tensor(truncated); }) == Errc::Truncated);

  auto header_only = good;
  header_only.resize(10);
  CHECK(error_of([&] { decode_tensor(header_only); }) == Errc::Truncated);

  auto trailing = good;
  trailing.push_back(0);
  CHECK(error_of([&] { decode_tensor(trailing); }) == Errc::DimMismatch);

  auto nan = encode_tensor({{2}, {1.0f, std::numeric_limits<float>::quiet_NaN()}});
  CHECK(error_of([&] { decode_tensor(nan); }) == Errc::NonFinite);
  auto inf = encode_tensor({{1}, {-std::numeric_limits<float>::infinity()}});
  CHECK(error_of([&] { decode_tensor(inf); }) == Errc::NonFinite);

  auto dtype = good;
  dtype[4] = 1;
  CHECK(error_of([&] { decode_tensor(dtype); }) == Errc::UnsupportedDtype);

  CHECK(error_of([&] { encode_tensor({{3}, {1.0f}}); }) == Errc::DimMismatch);
  CHECK(error_of([&] { read_tensor(tmp_path("does_not_exist.bcn")); }) == Errc::Io);
}

TEST_CASE("random tensors round trip through files bit-exactly") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const Tensor t = random_tensor(rng);
    const auto path = tmp_path("roundtrip.bcn");
    write_tensor(path, t);
    const Tensor back = read_tensor(path);
    REQUIRE(back.dims == t.dims);
    REQUIRE(std::memcmp(back.data.data(), t.data.data(), t.data.size() * sizeof(float)) == 0);
    REQUIRE(encode_tensor(back) == encode_tensor(t));
  }
}

TEST_CASE("single-column quantized file round trip") {
  QuantizedMatrixFile qm{2, 2, 1, {{-1, 0.5, {0, 3}}}};
  const auto path = tmp_path("single.bcnq");
  write_quantized(path, qm);
  CHECK(std::filesystem::file_size(path) == 26 + 4 + 8 + 1);
  const auto back = read_quantized(path);
  CHECK(back == qm);
  const MatrixXd d = back.dequantize();
  CHECK(d(0, 0) == -0.5);
  CHECK(d(1, 0) == 1.0);
}

TEST_CASE("quantized codes pack LSB-first") {
  const std::vector<std::uint8_t> codes = {1, 2, 3, 0, 1};
  const auto packed = pack_codes(codes, 2);
  REQUIRE(packed.size() == 2);
  CHECK(packed[0] == (1 | 2 << 2 | 3 << 4 | 0 << 6));
  CHECK(packed[1] == 1);

  // 3-bit codes straddle byte boundaries
  const std::vector<std::uint8_t> c3 = {7, 0, 5, 6, 1};
  CHECK(unpack_codes(pack_codes(c3, 3), c3.size(), 3) == c3);
}

TEST_CASE("quantized file validation") {
  CHECK(error_of([] { encode_quantized({9, 1, 1, {{0, 1.0, {0}}}}); }) == Errc::UnsupportedBits);
  CHECK(error_of([] { encode_quantized({0, 1, 1, {{0, 1.0, {0}}}}); }) == Errc::UnsupportedBits);
  CHECK(error_of([] { encode_quantized({2, 1, 1, {{0, 1.0, {4}}}}); }) == Errc::CodeOutOfRange);
  CHECK(error_of([] { encode_quantized({2, 2, 1, {{0, 1.0, {1}}}}); }) == Errc::DimMismatch);
  CHECK(error_of([] { encode_quantized({2, 1, 2, {{0, 1.0, {1}}}}); }) == Errc::DimMismatch);

  auto bytes = encode_quantized({2, 2, 1, {{-1, 0.5, {0, 3}}}});
  auto bits9 = bytes;
  bits9[5] = 9;
  CHECK(error_of([&] { decode_quantized(bits9); }) == Errc::UnsupportedBits);
  auto bad = bytes;
  bad[3] = 0x31;
  CHECK(error_of([&] { decode_quantized(bad); }) == Errc::BadMagic);
  bytes.pop_back();
  CHECK(error_of([&] { decode_quantized(bytes); }) == Errc::Truncated);
}

TEST_CASE("random quantized matrices round trip and match the size formula") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> bits_dist(1, 8);
  std::uniform_int_distribution<std::uint64_t> dim(1, 13);
  std::uniform_int_distribution<std::int32_t> zp(-200, 200);
  std::normal_distribution<double> scale;
  for (int i = 0; i < 100; ++i) {
    QuantizedMatrixFile qm;
    qm.bits = bits_dist(rng);
    qm.n_rows = dim(rng);
    qm.n_cols = dim(rng);
    std::uniform_int_distribution<int> code(0, (1 << qm.bits) - 1);
    for (std::uint64_t j = 0; j < qm.n_cols; ++j) {
      QuantizedColumn col{zp(rng), scale(rng), {}};
      for (std::uint64_t r = 0; r < qm.n_rows; ++r)
        col.codes.push_back(static_cast<std::uint8_t>(code(rng)));
      qm.columns.push_back(std::move(col));
    }
    const auto bytes = encode_quantized(qm);
    REQUIRE(bytes.size() == 26 + qm.n_cols * (12 + (qm.n_rows * qm.bits + 7) / 8));
    const auto back = decode_quantized(bytes);
    REQUIRE(back == qm);
    REQUIRE(encode_quantized(back) == bytes);
  }
}
