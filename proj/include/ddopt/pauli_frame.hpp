#pragma once

// Exact products of (i^k sigma^a) (x) I_B with dense operators. Multiplying
// by 0, +-1 and +-i never rounds, which is what lets the propagator carry an
// ideal Pauli frame separately from a small deviation.

#include "ddopt/linalg.hpp"
#include "ddopt/model.hpp"

namespace ddopt {

inline PauliOp inverse(PauliOp p) { return {p.axis, (4 - (p.phase & 3)) & 3}; }

/// (p (x) I_B) * m for a (2 d_b)-dimensional m. Works for any complex
/// scalar type constructible from (re, im).
template <class Mat>
Mat pauli_left(PauliOp p, const Mat& m, Eigen::Index d_b) {
  using Scalar = typename Mat::Scalar;
  const CMatrix c = p.matrix();
  Mat out = Mat::Zero(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < 2; ++r) {
    for (Eigen::Index k = 0; k < 2; ++k) {
      if (c(r, k) == Complex{}) continue;
      const Scalar f(c(r, k).real(), c(r, k).imag());
      out.middleRows(r * d_b, d_b) += f * m.middleRows(k * d_b, d_b);
    }
  }
  return out;
}

/// m * (p (x) I_B).
template <class Mat>
Mat pauli_right(const Mat& m, PauliOp p, Eigen::Index d_b) {
  using Scalar = typename Mat::Scalar;
  const CMatrix c = p.matrix();
  Mat out = Mat::Zero(m.rows(), m.cols());
  for (Eigen::Index k = 0; k < 2; ++k) {
    for (Eigen::Index col = 0; col < 2; ++col) {
      if (c(k, col) == Complex{}) continue;
      const Scalar f(c(k, col).real(), c(k, col).imag());
      out.middleCols(col * d_b, d_b) += f * m.middleCols(k * d_b, d_b);
    }
  }
  return out;
}

/// p^dagger m p.
template <class Mat>
Mat pauli_conjugate(PauliOp p, const Mat& m, Eigen::Index d_b) {
  if (p.axis == 0) return m;
  return pauli_right(pauli_left(inverse(p), m, d_b), p, d_b);
}

}  // namespace ddopt
