// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace beacon {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

// Integer grid codes q; one entry per row of a weight channel.
using Codes = Eigen::VectorXi;

using Eigen::Index;

enum class Errc {
  BadMagic,
  Truncated,
  NonFinite,
  DimMismatch,
  UnsupportedDtype,
  UnsupportedBits,
  CodeOutOfRange,
  Io,
  EmptyInput,
  NonPositiveScale,
  ZeroVector,
  ZeroQuantizedOutput,
  ShortCalibration,
  TooLarge,
  InvalidArgument,
  IdentityViolation,
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Non-owning view over the calibration inputs of one layer. `x` multiplies
// the full-precision weights; `x_tilde`, when set, multiplies the quantized
// weights (error correction). Without it both sides use `x`.
struct CalibrationView {
  const MatrixXd& x;
  const MatrixXd* x_tilde = nullptr;

  const MatrixXd& quantized_side() const { return x_tilde ? *x_tilde : x; }
  bool error_correction() const { return x_tilde != nullptr; }
};

}  // namespace beacon
