#include "memgeom/spectral.hpp"

#include "memgeom/dft.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace memgeom {

CirculantModel CirculantModel::from_spectrum(Vector spectrum) {
  require(spectrum.size() >= 2, "circulant model needs d >= 2");
  require(spectrum.allFinite(), "spectrum has non-finite entries");
  require(spectrum.minCoeff() >= 0.0, "spectrum has a negative eigenvalue");
  require(detail::conjugate_symmetric(spectrum), "spectrum must satisfy lambda_k = lambda_{d-k}");
  double residue = 0.0;
  Vector row = detail::inverse_dft_real(spectrum, residue);
  if (residue > 1e-10 * std::max(1.0, spectrum.maxCoeff())) throw NumericalError("circulant first row is not real");
  return CirculantModel(std::move(spectrum), std::move(row));
}

Matrix CirculantModel::dense() const {
  const Index d = dim();
  Matrix m(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) m(i, j) = first_row_[((j - i) % d + d) % d];
  return m;
}

GaussianModel CirculantModel::gaussian(const Vector& mean) const { return GaussianModel(mean, dense()); }

SensitivityProfile sensitivity_profile(const CirculantModel& model, double sigma) {
  require(sigma > 0.0 && std::isfinite(sigma), "sigma must be positive");
  const Index d = model.dim();
  SensitivityProfile p;
  p.sigma = sigma;
  const double s2 = sigma * sigma;
  p.h = model.spectrum().unaryExpr([s2](double lambda) { return s2 / (lambda + s2); });
  p.q = detail::inverse_dft_real(p.h, p.imag_residue);
  if (p.imag_residue > 1e-10) throw NumericalError("sensitivity kernel has an imaginary part (asymmetric spectrum)");
  for (Index k = 0; k < d; ++k) p.tv += std::abs(p.h[(k + 1) % d] - p.h[k]);
  p.bounds.resize(d / 2);
  for (Index n = 1; n <= d / 2; ++n) p.bounds[n - 1] = p.tv / (4.0 * static_cast<double>(n));
  return p;
}

Index wraparound_distance(Index i, Index j, Index d) {
  require(d >= 1 && i >= 0 && j >= 0 && i < d && j < d, "index out of range");
  const Index diff = std::abs(i - j);
  return std::min(diff, d - diff);
}

double offdiag_sensitivity(const CirculantModel& model, double sigma, Index i, Index j) {
  require(i != j, "off-diagonal sensitivity needs i != j");
  const auto p = sensitivity_profile(model, sigma);
  return std::abs(p.q[wraparound_distance(i, j, model.dim())]);
}

Vector power_law_spectrum(Index d, double p, double scale) {
  require(d >= 2 && p >= 0.0 && scale > 0.0, "power-law spectrum needs d >= 2, p >= 0, scale > 0");
  Vector s(d);
  for (Index k = 0; k < d; ++k) s[k] = scale * std::pow(1.0 + static_cast<double>(std::min(k, d - k)), -p);
  return s;
}

Vector spike_spectrum(Index d, double spike, double floor) {
  require(d >= 2 && spike >= 0.0 && floor >= 0.0, "spike spectrum needs nonnegative entries");
  Vector s = Vector::Constant(d, floor);
  s[0] = spike;
  return s;
}

double spectral_concentration(const Vector& spectrum) {
  const double total = spectrum.sum();
  require(total > 0.0, "spectrum is identically zero");
  return static_cast<double>(spectrum.size()) * spectrum.squaredNorm() / (total * total);
}

std::vector<SweepRow> spectrum_concentration_sweep(const std::vector<LabeledSpectrum>& family, double sigma, double cutoff) {
  require(!family.empty(), "sweep needs at least one spectrum");
  const Index d = family.front().spectrum.size();
  std::vector<SweepRow> rows;
  for (const auto& member : family) {
    require(member.spectrum.size() == d, "sweep spectra must share d");
    const auto model = CirculantModel::from_spectrum(member.spectrum);
    const auto p = sensitivity_profile(model, sigma);
    SweepRow row;
    row.label = member.label;
    row.concentration = spectral_concentration(member.spectrum);
    row.tv = p.tv;
    for (Index n = d / 2; n >= 1; --n) {
      if (std::abs(p.q[n]) >= cutoff) break;
      row.decay_index = n;
    }
    if (p.tv > 0.0) {
      double moment = 0.0;
      for (Index n = 1; n <= d / 2; ++n) moment += static_cast<double>(n) * std::abs(p.q[n]);
      row.decay_moment = moment / p.tv;
    }
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.concentration < b.concentration; });
  return rows;
}

}  // namespace memgeom
