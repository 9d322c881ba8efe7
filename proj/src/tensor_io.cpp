// SPDX-License-Identifier: Apache-2.0

#include "beacon/tensor_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

namespace beacon {

namespace {

constexpr std::array<std::uint8_t, 4> kTensorMagic{0x42, 0x43, 0x4E, 0x31};
constexpr std::array<std::uint8_t, 4> kQuantMagic{0x42, 0x43, 0x4E, 0x51};
constexpr std::uint8_t kDtypeF32 = 0;
constexpr std::uint8_t kQuantVersion = 1;

class Writer {
 public:
  template <typename UInt>
  void put_le(UInt v) {
    for (std::size_t i = 0; i < sizeof(UInt); ++i)
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void put_u8(std::uint8_t v) { out_.push_back(v); }
  void put_f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void put_f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
  void put_bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename UInt>
  UInt get_le() {
    need(sizeof(UInt));
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i)
      v |= static_cast<UInt>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(UInt);
    return v;
  }
  std::uint8_t get_u8() { return get_le<std::uint8_t>(); }
  float get_f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }
  double get_f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }
  std::span<const std::uint8_t> get_bytes(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw Error(Errc::Truncated, "unexpected end of data");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void check_magic(Reader& r, const std::array<std::uint8_t, 4>& magic) {
  if (r.remaining() < magic.size()) throw Error(Errc::BadMagic, "file too short for magic");
  auto got = r.get_bytes(magic.size());
  if (!std::equal(got.begin(), got.end(), magic.begin()))
    throw Error(Errc::BadMagic, "bad magic bytes");
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

void check_bits(int bits) {
  if (bits < 1 || bits > 8)
    throw Error(Errc::UnsupportedBits,
                "bits must be in [1, 8], got " + std::to_string(bits));
}

void validate(const QuantizedMatrixFile& qm) {
  check_bits(qm.bits);
  if (qm.columns.size() != qm.n_cols)
    throw Error(Errc::DimMismatch, "column count does not match n_cols");
  const unsigned max_code = (1u << qm.bits) - 1;
  for (const auto& col : qm.columns) {
    if (col.codes.size() != qm.n_rows)
      throw Error(Errc::DimMismatch, "column length does not match n_rows");
    for (auto k : col.codes)
      if (k > max_code)
        throw Error(Errc::CodeOutOfRange,
                    "code " + std::to_string(k) + " exceeds 2^bits - 1");
  }
}

}  // namespace

std::uint64_t Tensor::element_count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

MatrixXd to_matrix(const Tensor& t) {
  if (t.dims.size() != 2)
    throw Error(Errc::DimMismatch, "expected a 2-D tensor, got ndim=" +
                                       std::to_string(t.dims.size()));
  using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajorF> view(t.data.data(), static_cast<Index>(t.dims[0]),
                                   static_cast<Index>(t.dims[1]));
  return view.cast<double>();
}

Tensor from_matrix(const MatrixXd& m) {
  Tensor t;
  t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.data.resize(static_cast<std::size_t>(m.size()));
  using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<RowMajorF>(t.data.data(), m.rows(), m.cols()) = m.cast<float>();
  return t;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.dims.size() > 255) throw Error(Errc::DimMismatch, "ndim exceeds 255");
  if (t.data.size() != t.element_count())
    throw Error(Errc::DimMismatch, "data length does not match dims");
  Writer w;
  w.put_bytes(kTensorMagic);
  w.put_u8(kDtypeF32);
  w.put_u8(static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) w.put_le<std::uint64_t>(d);
  for (float v : t.data) w.put_f32(v);
  return w.take();
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  check_magic(r, kTensorMagic);
  const auto dtype = r.get_u8();
  if (dtype != kDtypeF32)
    throw Error(Errc::UnsupportedDtype, "unsupported dtype code " + std::to_string(dtype));
  Tensor t;
  t.dims.resize(r.get_u8());
  std::uint64_t count = 1;
  for (auto& d : t.dims) {
    d = r.get_le<std::uint64_t>();
    if (d == 0) throw Error(Errc::DimMismatch, "zero-length dimension");
    if (count > std::numeric_limits<std::uint64_t>::max() / d)
      throw Error(Errc::DimMismatch, "dims overflow");
    count *= d;
  }
  if (count > r.remaining() / 4) throw Error(Errc::Truncated, "payload shorter than dims imply");
  if (r.remaining() != count * 4)
    throw Error(Errc::DimMismatch, "payload longer than dims imply");
  t.data.resize(count);
  for (auto& v : t.data) {
    v = r.get_f32();
    if (!std::isfinite(v)) throw Error(Errc::NonFinite, "tensor contains NaN or Inf");
  }
  return t;
}

Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(slurp(path)); }

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  dump(path, encode_tensor(t));
}

std::size_t packed_code_bytes(std::uint64_t n_rows, int bits) {
  return static_cast<std::size_t>((n_rows * static_cast<std::uint64_t>(bits) + 7) / 8);
}

std::vector<std::uint8_t> pack_codes(std::span<const std::uint8_t> codes, int bits) {
  std::vector<std::uint8_t> out(packed_code_bytes(codes.size(), bits), 0);
  std::size_t bit = 0;
  for (auto k : codes) {
    for (int b = 0; b < bits; ++b, ++bit)
      if ((k >> b) & 1u) out[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
  }
  return out;
}

std::vector<std::uint8_t> unpack_codes(std::span<const std::uint8_t> packed,
                                       std::uint64_t count, int bits) {
  std::vector<std::uint8_t> out(count, 0);
  std::size_t bit = 0;
  for (auto& k : out) {
    for (int b = 0; b < bits; ++b, ++bit)
      if ((packed[bit / 8] >> (bit % 8)) & 1u) k |= static_cast<std::uint8_t>(1u << b);
  }
  return out;
}

MatrixXd QuantizedMatrixFile::dequantize() const {
  MatrixXd out(static_cast<Index>(n_rows), static_cast<Index>(n_cols));
  for (Index j = 0; j < out.cols(); ++j) {
    const auto& col = columns[static_cast<std::size_t>(j)];
    for (Index i = 0; i < out.rows(); ++i)
      out(i, j) = col.scale * static_cast<double>(col.codes[static_cast<std::size_t>(i)] +
                                                  col.zero_point);
  }
  return out;
}

std::vector<std::uint8_t> encode_quantized(const QuantizedMatrixFile& qm) {
  validate(qm);
  Writer w;
  w.put_bytes(kQuantMagic);
  w.put_u8(kQuantVersion);
  w.put_u8(static_cast<std::uint8_t>(qm.bits));
  w.put_le<std::uint32_t>(0);
  w.put_le<std::uint64_t>(qm.n_rows);
  w.put_le<std::uint64_t>(qm.n_cols);
  for (const auto& col : qm.columns) {
    w.put_le<std::uint32_t>(static_cast<std::uint32_t>(col.zero_point));
    w.put_f64(col.scale);
    w.put_bytes(pack_codes(col.codes, qm.bits));
  }
  return w.take();
}

QuantizedMatrixFile decode_quantized(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  check_magic(r, kQuantMagic);
  const auto version = r.get_u8();
  if (version != kQuantVersion)
    throw Error(Errc::UnsupportedDtype, "unsupported BCNQ version " + std::to_string(version));
  QuantizedMatrixFile qm;
  qm.bits = r.get_u8();
  check_bits(qm.bits);
  if (r.get_le<std::uint32_t>() != 0)
    throw Error(Errc::InvalidArgument, "reserved header field is not zero");
  qm.n_rows = r.get_le<std::uint64_t>();
  qm.n_cols = r.get_le<std::uint64_t>();
  const std::size_t col_bytes = 4 + 8 + packed_code_bytes(qm.n_rows, qm.bits);
  if (qm.n_cols > r.remaining() / col_bytes)
    throw Error(Errc::Truncated, "payload shorter than n_cols columns");
  if (r.remaining() != qm.n_cols * col_bytes)
    throw Error(Errc::DimMismatch, "payload longer than n_cols columns");
  qm.columns.resize(qm.n_cols);
  for (auto& col : qm.columns) {
    col.zero_point = static_cast<std::int32_t>(r.get_le<std::uint32_t>());
    col.scale = r.get_f64();
    if (!std::isfinite(col.scale)) throw Error(Errc::NonFinite, "non-finite scale");
    col.codes = unpack_codes(r.get_bytes(packed_code_bytes(qm.n_rows, qm.bits)),
                             qm.n_rows, qm.bits);
  }
  return qm;
}

QuantizedMatrixFile read_quantized(const std::filesystem::path& path) {
  return decode_quantized(slurp(path));
}

void write_quantized(const std::filesystem::path& path, const QuantizedMatrixFile& qm) {
  dump(path, encode_quantized(qm));
}

}  // namespace beacon
