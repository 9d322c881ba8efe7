// SPDX-License-Identifier: Apache-2.0
//
// Linear-algebra kernel: thin QR, cosine alignment, the closed-form optimal
// scale, and the reduction of tall calibration matrices to square factors.
#pragma once

#include "beacon/core.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <optional>

namespace beacon {

template <typename Scalar>
struct QrFactors {
  Matrix<Scalar> U;  // m x n, orthonormal columns
  Matrix<Scalar> R;  // n x n, upper triangular, diag(R) >= 0
  bool rank_deficient = false;
};

// Householder thin QR with the sign convention diag(R) >= 0. A diagonal entry
// below 1e-12 * max|R_ii| marks the factorization rank deficient; the factors
// are still returned.
template <typename Derived>
QrFactors<typename Derived::Scalar> thin_qr(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Index m = x.rows();
  const Index n = x.cols();
  if (m < n)
    throw Error(Errc::ShortCalibration, "calibration needs at least as many rows as columns");
  if (!x.allFinite()) throw Error(Errc::NonFinite, "calibration contains NaN or Inf");

  Eigen::HouseholderQR<Matrix<Scalar>> qr(x);
  QrFactors<Scalar> out;
  out.R = qr.matrixQR().topRows(n).template triangularView<Eigen::Upper>();
  out.U = qr.householderQ() * Matrix<Scalar>::Identity(m, n);
  for (Index i = 0; i < n; ++i) {
    if (out.R(i, i) < Scalar(0)) {
      out.R.row(i) *= Scalar(-1);
      out.U.col(i) *= Scalar(-1);
    }
  }
  if (n > 0) {
    const Scalar largest = out.R.diagonal().cwiseAbs().maxCoeff();
    out.rank_deficient = !(out.R.diagonal().cwiseAbs().minCoeff() > Scalar(1e-12) * largest);
  }
  return out;
}

// Inner-product ratio clamped to [-1, 1]. Throws ZeroVector for a zero input.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine(const Eigen::MatrixBase<DerivedA>& a,
                                 const Eigen::MatrixBase<DerivedB>& v) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar na = a.stableNorm();
  const Scalar nv = v.stableNorm();
  if (!(na > Scalar(0)) || !(nv > Scalar(0)))
    throw Error(Errc::ZeroVector, "cosine of a zero-norm vector is undefined");
  return std::clamp(a.dot(v) / (na * nv), Scalar(-1), Scalar(1));
}

// argmin_c ||y - c v||^2 = <y, v> / ||v||^2.
template <typename DerivedY, typename DerivedV>
typename DerivedY::Scalar optimal_scale(const Eigen::MatrixBase<DerivedY>& y,
                                        const Eigen::MatrixBase<DerivedV>& v) {
  const auto vv = v.squaredNorm();
  if (!(vv > 0)) throw Error(Errc::ZeroQuantizedOutput, "quantized output is zero");
  return y.dot(v) / vv;
}

// ||y - c v||^2, checked against ||y||^2 (1 - cos^2(y, v)) to 1e-6 relative.
// Only meaningful for the optimal c; throws IdentityViolation otherwise.
template <typename DerivedY, typename DerivedV>
typename DerivedY::Scalar residual_identity(const Eigen::MatrixBase<DerivedY>& y,
                                            const Eigen::MatrixBase<DerivedV>& v,
                                            typename DerivedY::Scalar c) {
  using Scalar = typename DerivedY::Scalar;
  const Scalar residual = (y - c * v).squaredNorm();
  const Scalar yy = y.squaredNorm();
  if (yy == Scalar(0)) return residual;
  const Scalar cos = v.squaredNorm() > Scalar(0) ? cosine(y, v) : Scalar(0);
  const Scalar projected = yy * (Scalar(1) - cos * cos);
  if (std::abs(residual - projected) > Scalar(1e-6) * yy)
    throw Error(Errc::IdentityViolation, "residual does not match the projection identity");
  return residual;
}

// Square stand-ins for the calibration matrices: cos(L w, L~ q) equals
// cos(X w, X~ q) for every w and q.
template <typename Scalar>
struct BasicReducedPair {
  Matrix<Scalar> L;        // U^T X  (R itself without error correction)
  Matrix<Scalar> L_tilde;  // R from X~ = U R
  Vector<Scalar> col_norms;
  bool rank_deficient = false;

  Index size() const { return L_tilde.cols(); }
};

using ReducedPair = BasicReducedPair<double>;

template <typename Derived>
BasicReducedPair<typename Derived::Scalar> reduce_inputs(const Eigen::MatrixBase<Derived>& x) {
  auto qr = thin_qr(x);
  BasicReducedPair<typename Derived::Scalar> pair;
  pair.L = qr.R;
  pair.L_tilde = std::move(qr.R);
  pair.col_norms = pair.L_tilde.colwise().norm().transpose();
  pair.rank_deficient = qr.rank_deficient;
  return pair;
}

template <typename DerivedX, typename DerivedT>
BasicReducedPair<typename DerivedX::Scalar> reduce_inputs(const Eigen::MatrixBase<DerivedX>& x,
                                                          const Eigen::MatrixBase<DerivedT>& x_tilde) {
  if (x.rows() != x_tilde.rows() || x.cols() != x_tilde.cols())
    throw Error(Errc::DimMismatch, "X and X~ must have the same shape");
  if (!x.allFinite()) throw Error(Errc::NonFinite, "calibration contains NaN or Inf");
  auto qr = thin_qr(x_tilde);
  BasicReducedPair<typename DerivedX::Scalar> pair;
  pair.L = qr.U.transpose() * x;
  pair.L_tilde = std::move(qr.R);
  pair.col_norms = pair.L_tilde.colwise().norm().transpose();
  pair.rank_deficient = qr.rank_deficient;
  return pair;
}

inline ReducedPair reduce_inputs(const CalibrationView& calib) {
  return calib.x_tilde ? reduce_inputs(calib.x, *calib.x_tilde) : reduce_inputs(calib.x);
}

}  // namespace beacon
