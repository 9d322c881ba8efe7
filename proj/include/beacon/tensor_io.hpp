// SPDX-License-Identifier: Apache-2.0
//
// Binary persistence for dense f32 tensors ("BCN1") and bit-packed
// quantized layers ("BCNQ"). All multi-byte fields are little-endian.
//
//   BCN1: magic[4] dtype:u8(0=f32) ndim:u8 dims:u64[ndim] data:f32[prod(dims)]
//   BCNQ: magic[4] version:u8(1) bits:u8 reserved:u32(0) n_rows:u64 n_cols:u64
//         then per column: zero_point:i32 scale:f64 codes:u8[ceil(n_rows*bits/8)]
//
// Codes are stored as k = q - z in [0, 2^bits - 1], packed LSB-first: code i
// of a column occupies bits [i*bits, (i+1)*bits) of that column's byte run.
#pragma once

#include "beacon/core.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace beacon {

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> data;

  std::uint64_t element_count() const;
  bool operator==(const Tensor&) const = default;
};

// 2-D row-major tensor <-> Eigen matrix. Values widen to double on the way in
// and narrow to f32 on the way out.
MatrixXd to_matrix(const Tensor& t);
Tensor from_matrix(const MatrixXd& m);

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const Tensor& t);

struct QuantizedColumn {
  std::int32_t zero_point = 0;
  double scale = 0.0;
  std::vector<std::uint8_t> codes;  // k = q - z, one per row

  bool operator==(const QuantizedColumn&) const = default;
};

struct QuantizedMatrixFile {
  int bits = 0;
  std::uint64_t n_rows = 0;
  std::uint64_t n_cols = 0;
  std::vector<QuantizedColumn> columns;

  // c_j * (k + z_j) as an n_rows x n_cols matrix.
  MatrixXd dequantize() const;
  bool operator==(const QuantizedMatrixFile&) const = default;
};

std::size_t packed_code_bytes(std::uint64_t n_rows, int bits);
std::vector<std::uint8_t> pack_codes(std::span<const std::uint8_t> codes, int bits);
std::vector<std::uint8_t> unpack_codes(std::span<const std::uint8_t> packed,
                                       std::uint64_t count, int bits);

std::vector<std::uint8_t> encode_quantized(const QuantizedMatrixFile& qm);
QuantizedMatrixFile decode_quantized(std::span<const std::uint8_t> bytes);

QuantizedMatrixFile read_quantized(const std::filesystem::path& path);
void write_quantized(const std::filesystem::path& path,
                     const QuantizedMatrixFile& qm);

}  // namespace beacon
