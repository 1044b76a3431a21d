#pragma once

#include "memgeom/core.hpp"
#include "memgeom/denoise.hpp"

#include <optional>
#include <string>
#include <vector>

namespace memgeom {

/// Stationary covariance on Z_d: circulant with DFT eigenvalues lambda_k.
class CirculantModel {
 public:
  /// Requires lambda_k >= 0 and lambda_k = lambda_{d-k}.
  static CirculantModel from_spectrum(Vector spectrum);

  Index dim() const { return spectrum_.size(); }
  const Vector& spectrum() const { return spectrum_; }
  /// c_r = (1/d) sum_k lambda_k omega^{rk}; Sigma_{ij} = c_{(j - i) mod d}.
  const Vector& first_row() const { return first_row_; }

  Matrix dense() const;
  GaussianModel gaussian(const Vector& mean) const;

 private:
  CirculantModel(Vector spectrum, Vector first_row) : spectrum_(std::move(spectrum)), first_row_(std::move(first_row)) {}
  Vector spectrum_;
  Vector first_row_;
};

struct SensitivityProfile {
  double sigma = 0.0;
  /// h_k = sigma^2 / (lambda_k + sigma^2)
  Vector h;
  /// q_r = (1/d) sum_k h_k omega^{rk}
  Vector q;
  double imag_residue = 0.0;
  /// Cyclic total variation of h.
  double tv = 0.0;
  /// bounds[n - 1] = tv / (4 n) for n = 1..floor(d/2).
  Vector bounds;
};

/// Throws NumericalError when the kernel's imaginary part exceeds 1e-10.
SensitivityProfile sensitivity_profile(const CirculantModel& model, double sigma);

Index wraparound_distance(Index i, Index j, Index d);

/// |d m_i / d x_j| = |q_n| with n the wrap-around distance; i != j.
double offdiag_sensitivity(const CirculantModel& model, double sigma, Index i, Index j);

/// lambda_k proportional to (1 + min(k, d - k))^{-p}, scaled so lambda_0 = scale.
Vector power_law_spectrum(Index d, double p, double scale = 1.0);
/// lambda_0 = spike, every other entry floor.
Vector spike_spectrum(Index d, double spike, double floor);
/// Inverse participation ratio d * sum lambda^2 / (sum lambda)^2, in [1, d].
double spectral_concentration(const Vector& spectrum);

struct SweepRow {
  std::string label;
  double concentration = 0.0;
  double tv = 0.0;
  /// Smallest n >= 1 with |q_m| < cutoff for all m in [n, floor(d/2)]; empty if none.
  std::optional<Index> decay_index;
  /// sum_{n >= 1} n |q_n| / tv over n = 1..floor(d/2); 0 when tv = 0.
  double decay_moment = 0.0;
};

struct LabeledSpectrum {
  std::string label;
  Vector spectrum;
};

/// One row per spectrum, ordered by increasing concentration.
std::vector<SweepRow> spectrum_concentration_sweep(const std::vector<LabeledSpectrum>& family, double sigma, double cutoff = 1e-3);

}  // namespace memgeom
