#pragma once

#include "memgeom/core.hpp"

#include <cmath>
#include <numbers>

namespace memgeom::detail {

/// cos and sin of 2*pi*m/d with m reduced mod d first, so large index products stay exact.
inline std::pair<double, double> unit_root(Index m, Index d) {
  const Index r = ((m % d) + d) % d;
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(d);
  return {std::cos(angle), std::sin(angle)};
}

/// y_r = (1/d) sum_k v_k exp(2 pi i r k / d). Returns the real part; the largest absolute
/// imaginary component is written to `imag_residue`.
template <typename Derived>
Vec<typename Derived::Scalar> inverse_dft_real(const Eigen::MatrixBase<Derived>& v, double& imag_residue) {
  using Scalar = typename Derived::Scalar;
  const Index d = v.size();
  Vec<Scalar> out(d);
  imag_residue = 0.0;
  for (Index r = 0; r < d; ++r) {
    Scalar re = 0, im = 0;
    for (Index k = 0; k < d; ++k) {
      const auto [c, s] = unit_root(r * k, d);
      re += v[k] * c;
      im += v[k] * s;
    }
    out[r] = re / static_cast<Scalar>(d);
    imag_residue = std::max(imag_residue, static_cast<double>(std::abs(im / static_cast<Scalar>(d))));
  }
  return out;
}

/// True when v_k == v_{d-k} for every k (the spectrum of a real symmetric circulant).
template <typename Derived>
bool conjugate_symmetric(const Eigen::MatrixBase<Derived>& v, double tol = 0.0) {
  const Index d = v.size();
  for (Index k = 1; k < d; ++k) {
    if (std::abs(v[k] - v[d - k]) > tol) return false;
  }
  return true;
}

}  // namespace memgeom::detail
