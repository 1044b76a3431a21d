#pragma once

#include "memgeom/core.hpp"
#include "memgeom/curve.hpp"
#include "memgeom/data.hpp"
#include "memgeom/schedule.hpp"
#include "memgeom/stats.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <variant>
#include <vector>

namespace memgeom {

/// Softmax of the logits, shifted by their maximum before exponentiation.
template <typename Derived>
Vec<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using std::exp;
  const auto top = logits.maxCoeff();
  Vec<typename Derived::Scalar> w = (logits.array() - top).unaryExpr([](auto v) { return exp(v); }).matrix();
  return w / w.sum();
}

/// Logits -||x - scale * x_i||^2 / (2 width^2) for each row x_i.
template <typename DerivedRows, typename DerivedX>
Vec<typename DerivedRows::Scalar> gaussian_logits(const Eigen::MatrixBase<DerivedRows>& rows, const Eigen::MatrixBase<DerivedX>& x,
                                                  typename DerivedRows::Scalar width,
                                                  typename DerivedRows::Scalar scale = typename DerivedRows::Scalar(1)) {
  using Scalar = typename DerivedRows::Scalar;
  const Scalar denom = Scalar(2) * width * width;
  Vec<Scalar> logits(rows.rows());
  for (Index i = 0; i < rows.rows(); ++i) {
    Scalar acc(0);
    for (Index k = 0; k < rows.cols(); ++k) {
      const Scalar diff = x(k) - scale * rows(i, k);
      acc += diff * diff;
    }
    logits[i] = -acc / denom;
  }
  return logits;
}

/// w_i(x, sigma) = softmax_i(-||x - x_i||^2 / (2 sigma^2)).
template <typename DerivedRows, typename DerivedX>
Vec<typename DerivedRows::Scalar> softmax_weights(const Eigen::MatrixBase<DerivedRows>& rows, const Eigen::MatrixBase<DerivedX>& x,
                                                  typename DerivedRows::Scalar sigma) {
  return softmax(gaussian_logits(rows, x, sigma));
}

struct PosteriorWeights {
  Vector weights;
  Index argmax_index = 0;
  double max_weight = 1.0;
};

PosteriorWeights posterior_weights(const Dataset& dataset, const Eigen::Ref<const Vector>& x, double sigma);

/// m_sigma(x) = sum_i w_i x_i.
Vector empirical_denoise(const Dataset& dataset, const Eigen::Ref<const Vector>& x, double sigma);

/// Gaussian with mean mu and PSD covariance Sigma. Tiny negative eigenvalues (>= -1e-10)
/// are clamped to zero; anything more negative is rejected.
class GaussianModel {
 public:
  GaussianModel(Vector mean, Matrix covariance);
  static GaussianModel from_dataset(const Dataset& dataset);

  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return covariance_; }
  Index dim() const { return mean_.size(); }

  /// mu + Sigma (Sigma + sigma^2 I)^{-1} (x - mu) via a Cholesky solve.
  Vector denoise(const Eigen::Ref<const Vector>& x, double sigma) const;
  /// Sigma (Sigma + sigma^2 I)^{-1}.
  Matrix jacobian(double sigma) const;

 private:
  Vector mean_;
  Matrix covariance_;
};

struct DenoiserSpec;
using DenoiserPtr = std::shared_ptr<const DenoiserSpec>;

struct EmpiricalDenoiser {
  DatasetPtr dataset;
};
struct GaussianDenoiser {
  std::shared_ptr<const GaussianModel> model;
};
struct ConstantDenoiser {
  Vector value;
};

/// Band [lo, hi) of a composite; the topmost band is closed at hi.
struct NoiseBand {
  double lo = 0.0;
  double hi = 0.0;
  DenoiserPtr denoiser;
};

/// Contiguous bands ordered from high to low noise.
struct CompositeDenoiser {
  std::vector<NoiseBand> bands;

  double sigma_hi() const { return bands.front().hi; }
  double sigma_lo() const { return bands.back().lo; }
  /// Index of the band holding sigma; throws InputError when sigma is not covered.
  std::size_t band_for(double sigma) const;
};

struct DenoiserSpec {
  std::variant<EmpiricalDenoiser, GaussianDenoiser, ConstantDenoiser, CompositeDenoiser> kind;

  Index dim() const;
  std::string kind_name() const;
};

DenoiserPtr make_empirical(DatasetPtr dataset);
DenoiserPtr make_gaussian(GaussianModel model);
DenoiserPtr make_constant(Vector value);
/// Validates ordering, contiguity and dimension agreement of the bands.
DenoiserPtr make_composite(std::vector<NoiseBand> bands);

Vector denoise(const DenoiserSpec& spec, const Eigen::Ref<const Vector>& x, double sigma);

/// Arbitrary denoiser as a callable (x, sigma) -> estimate.
using DenoiseFn = std::function<Vector(const Vector&, double)>;
DenoiseFn as_function(DenoiserPtr spec);

/// E ||m(X + sigma Z) - X||^2 with X running over every eval row n_noise times.
MeanEstimate denoising_mse(const DenoiserSpec& spec, const Dataset& eval_set, double sigma, std::size_t n_noise, std::uint64_t seed);

struct FlowFields {
  Vector u_opt;
  Vector u_cond;
};

/// Flow-matching weights softmax_i(-||x - t x_i||^2 / (2 (1 - t)^2)).
Vector flow_weights(const Dataset& dataset, const Eigen::Ref<const Vector>& x, double t);
/// m_t(x) = sum_i w_i(x, t) x_i.
Vector flow_denoise(const Dataset& dataset, const Eigen::Ref<const Vector>& x, double t);
FlowFields flow_vector_fields(const Dataset& dataset, const Eigen::Ref<const Vector>& x, double t, Index conditioning_index);

/// (sum_i w_i x_i x_i^T - m m^T) / sigma^2.
Matrix posterior_jacobian(const Dataset& dataset, const Eigen::Ref<const Vector>& x, double sigma);
/// Central-difference Jacobian of the empirical denoiser.
Matrix finite_difference_jacobian(const Dataset& dataset, const Eigen::Ref<const Vector>& x, double sigma, double fd_step);

struct TweedieCheck {
  Matrix analytic;
  Matrix numeric;
  /// max |numeric - analytic| / max |analytic|; absolute when the analytic Jacobian is zero.
  double max_rel_err = 0.0;
};

TweedieCheck tweedie_jacobian_check(const Dataset& dataset, const Eigen::Ref<const Vector>& x, double sigma, double fd_step);

/// Per sigma: max over sampled rows x of (1 + sigma)^2 ||m_sigma(x) - m^G_sigma(x)||, with the
/// Gaussian built from the dataset's biased moments.
DiagnosticCurve gauss_excess_profile(const Dataset& dataset, const SigmaGrid& grid, Index n_eval, std::uint64_t seed);

}  // namespace memgeom
