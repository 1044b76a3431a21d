#include "memgeom/denoise.hpp"

#include "memgeom/random.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace memgeom {

namespace {

void check_query(const Dataset& dataset, const Eigen::Ref<const Vector>& x) {
  require(x.size() == dataset.dim(), "query dimension does not match dataset");
  require(x.allFinite(), "query has non-finite entries");
}

void check_sigma(double sigma) { require(std::isfinite(sigma) && sigma > 0.0, "sigma must be positive and finite"); }

void check_t(double t) { require(t > 0.0 && t < 1.0, "t must lie in (0, 1)"); }

}  // namespace

PosteriorWeights posterior_weights(const Dataset& dataset, const Eigen::Ref<const Vector>& x, double sigma) {
  check_query(dataset, x);
  check_sigma(sigma);
  PosteriorWeights out;
  out.weights = softmax_weights(dataset.values(), x, sigma);
  out.max_weight = out.weights.maxCoeff(&out.argmax_index);
  return out;
}

Vector empirical_denoise(const Dataset& dataset, const Eigen::Ref<const Vector>& x, double sigma) {
  check_query(dataset, x);
  check_sigma(sigma);
  return dataset.values().transpose() * softmax_weights(dataset.values(), x, sigma);
}

GaussianModel::GaussianModel(Vector mean, Matrix covariance) : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  const Index d = mean_.size();
  require(d >= 1, "Gaussian model needs dimension >= 1");
  require(covariance_.rows() == d && covariance_.cols() == d, "covariance shape does not match mean");
  require(mean_.allFinite() && covariance_.allFinite(), "Gaussian model has non-finite entries");
  const double scale = std::max(1.0, covariance_.cwiseAbs().maxCoeff());
  require((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, "covariance is not symmetric");
  covariance_ = 0.5 * (covariance_ + covariance_.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance_);
  const double lowest = eig.eigenvalues().minCoeff();
  require(lowest >= -1e-10, "covariance has a negative eigenvalue");
  if (lowest < 0.0) {
    covariance_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() * eig.eigenvectors().transpose();
    covariance_ = 0.5 * (covariance_ + covariance_.transpose()).eval();
  }
}

GaussianModel GaussianModel::from_dataset(const Dataset& dataset) {
  return GaussianModel(empirical_mean(dataset), empirical_covariance(dataset));
}

Vector GaussianModel::denoise(const Eigen::Ref<const Vector>& x, double sigma) const {
  require(x.size() == dim(), "query dimension does not match Gaussian model");
  check_sigma(sigma);
  Matrix shifted = covariance_;
  shifted.diagonal().array() += sigma * sigma;
  const Eigen::LLT<Matrix> llt(shifted);
  if (llt.info() != Eigen::Success) throw NumericalError("Cholesky factorization of Sigma + sigma^2 I failed");
  return mean_ + covariance_ * llt.solve(x - mean_);
}

Matrix GaussianModel::jacobian(double sigma) const {
  check_sigma(sigma);
  Matrix shifted = covariance_;
  shifted.diagonal().array() += sigma * sigma;
  const Eigen::LLT<Matrix> llt(shifted);
  if (llt.info() != Eigen::Success) throw NumericalError("Cholesky factorization of Sigma + sigma^2 I failed");
  // Sigma and (Sigma + sigma^2 I) commute, so Sigma A^{-1} = (A^{-1} Sigma)^T = A^{-1} Sigma.
  return llt.solve(covariance_);
}

std::size_t CompositeDenoiser::band_for(double sigma) const {
  if (!(sigma <= sigma_hi() && sigma >= sigma_lo())) {
    throw InputError("sigma " + std::to_string(sigma) + " lies outside the composite range [" + std::to_string(sigma_lo()) + ", " +
                     std::to_string(sigma_hi()) + "]");
  }
  for (std::size_t k = 0; k < bands.size(); ++k) {
    if (sigma >= bands[k].lo) return k;
  }
  return bands.size() - 1;
}

Index DenoiserSpec::dim() const {
  return std::visit(
      [](const auto& d) -> Index {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, EmpiricalDenoiser>) return d.dataset->dim();
        if constexpr (std::is_same_v<T, GaussianDenoiser>) return d.model->dim();
        if constexpr (std::is_same_v<T, ConstantDenoiser>) return d.value.size();
        if constexpr (std::is_same_v<T, CompositeDenoiser>) return d.bands.front().denoiser->dim();
      },
      kind);
}

std::string DenoiserSpec::kind_name() const {
  static constexpr const char* names[] = {"empirical", "gaussian", "constant", "composite"};
  return names[kind.index()];
}

DenoiserPtr make_empirical(DatasetPtr dataset) {
  require(dataset != nullptr, "empirical denoiser needs a dataset");
  return std::make_shared<const DenoiserSpec>(DenoiserSpec{EmpiricalDenoiser{std::move(dataset)}});
}

DenoiserPtr make_gaussian(GaussianModel model) {
  return std::make_shared<const DenoiserSpec>(DenoiserSpec{GaussianDenoiser{std::make_shared<const GaussianModel>(std::move(model))}});
}

DenoiserPtr make_constant(Vector value) {
  require(value.size() >= 1 && value.allFinite(), "constant denoiser needs a finite vector");
  return std::make_shared<const DenoiserSpec>(DenoiserSpec{ConstantDenoiser{std::move(value)}});
}

DenoiserPtr make_composite(std::vector<NoiseBand> bands) {
  require(!bands.empty(), "composite denoiser needs at least one band");
  const Index d = bands.front().denoiser ? bands.front().denoiser->dim() : 0;
  for (std::size_t k = 0; k < bands.size(); ++k) {
    const auto& b = bands[k];
    require(b.denoiser != nullptr, "composite band without a denoiser");
    require(b.denoiser->dim() == d, "composite bands disagree on dimension");
    require(b.lo > 0.0 && b.lo < b.hi, "composite band needs 0 < lo < hi");
    if (k > 0) require(b.hi == bands[k - 1].lo, "composite bands must be contiguous and ordered from high to low noise");
  }
  return std::make_shared<const DenoiserSpec>(DenoiserSpec{CompositeDenoiser{std::move(bands)}});
}

Vector denoise(const DenoiserSpec& spec, const Eigen::Ref<const Vector>& x, double sigma) {
  return std::visit(
      [&](const auto& d) -> Vector {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, EmpiricalDenoiser>) {
          return empirical_denoise(*d.dataset, x, sigma);
        } else if constexpr (std::is_same_v<T, GaussianDenoiser>) {
          return d.model->denoise(x, sigma);
        } else if constexpr (std::is_same_v<T, ConstantDenoiser>) {
          require(x.size() == d.value.size(), "query dimension does not match constant denoiser");
          return d.value;
        } else {
          return denoise(*d.bands[d.band_for(sigma)].denoiser, x, sigma);
        }
      },
      spec.kind);
}

DenoiseFn as_function(DenoiserPtr spec) {
  return [spec = std::move(spec)](const Vector& x, double sigma) { return denoise(*spec, x, sigma); };
}

MeanEstimate denoising_mse(const DenoiserSpec& spec, const Dataset& eval_set, double sigma, std::size_t n_noise, std::uint64_t seed) {
  require(n_noise >= 1, "denoising_mse needs n_noise >= 1");
  check_sigma(sigma);
  require(spec.dim() == eval_set.dim(), "denoiser and eval set dimensions differ");
  const std::size_t total = static_cast<std::size_t>(eval_set.n_points()) * n_noise;
  return monte_carlo(total, seed, salt::kDenoiseMse,
                     [&](StreamRng& rng, std::size_t i) {
                       const Vector x = eval_set.row(static_cast<Index>(i / n_noise)).transpose();
                       const Vector noisy = x + sigma * rng.normal_vector(x.size());
                       return (denoise(spec, noisy, sigma) - x).squaredNorm();
                     })
      .estimate();
}

Vector flow_weights(const Dataset& dataset, const Eigen::Ref<const Vector>& x, double t) {
  check_query(dataset, x);
  check_t(t);
  return softmax(gaussian_logits(dataset.values(), x, 1.0 - t, t));
}

Vector flow_denoise(const Dataset& dataset, const Eigen::Ref<const Vector>& x, double t) {
  return dataset.values().transpose() * flow_weights(dataset, x, t);
}

FlowFields flow_vector_fields(const Dataset& dataset, const Eigen::Ref<const Vector>& x, double t, Index conditioning_index) {
  require(conditioning_index >= 0 && conditioning_index < dataset.n_points(), "conditioning index out of range");
  const Vector w = flow_weights(dataset, x, t);
  FlowFields out;
  out.u_opt = (dataset.values().transpose() * w - x) / (1.0 - t);
  out.u_cond = (dataset.row(conditioning_index).transpose() - x) / (1.0 - t);
  return out;
}

Matrix posterior_jacobian(const Dataset& dataset, const Eigen::Ref<const Vector>& x, double sigma) {
  check_query(dataset, x);
  check_sigma(sigma);
  const Vector w = softmax_weights(dataset.values(), x, sigma);
  const Vector m = dataset.values().transpose() * w;
  // Centering at m before forming the second moment avoids cancellation in E[xx^T] - mm^T.
  const RowMatrix<double> centered = dataset.values().rowwise() - m.transpose();
  const Matrix cov = centered.transpose() * w.asDiagonal() * centered;
  return cov / (sigma * sigma);
}

Matrix finite_difference_jacobian(const Dataset& dataset, const Eigen::Ref<const Vector>& x, double sigma, double fd_step) {
  require(fd_step > 0.0, "finite-difference step must be positive");
  const Index d = dataset.dim();
  Matrix jac(d, d);
  for (Index j = 0; j < d; ++j) {
    Vector plus = x;
    Vector minus = x;
    plus[j] += fd_step;
    minus[j] -= fd_step;
    jac.col(j) = (empirical_denoise(dataset, plus, sigma) - empirical_denoise(dataset, minus, sigma)) / (2.0 * fd_step);
  }
  return jac;
}

TweedieCheck tweedie_jacobian_check(const Dataset& dataset, const Eigen::Ref<const Vector>& x, double sigma, double fd_step) {
  TweedieCheck out;
  out.analytic = posterior_jacobian(dataset, x, sigma);
  out.numeric = finite_difference_jacobian(dataset, x, sigma, fd_step);
  const double err = (out.numeric - out.analytic).cwiseAbs().maxCoeff();
  const double scale = out.analytic.cwiseAbs().maxCoeff();
  out.max_rel_err = scale > 0.0 ? err / scale : err;
  return out;
}

DiagnosticCurve gauss_excess_profile(const Dataset& dataset, const SigmaGrid& grid, Index n_eval, std::uint64_t seed) {
  require(n_eval >= 1, "gauss_excess_profile needs n_eval >= 1");
  const Index count = std::min(n_eval, dataset.n_points());
  const auto rows = sample_without_replacement(dataset.n_points(), count, seed, salt::kExcess);
  const GaussianModel model = GaussianModel::from_dataset(dataset);
  DiagnosticCurve curve{"gauss_excess", std::vector<CurvePoint>(grid.size())};
  parallel_for(grid.size(), [&](std::size_t k) {
    const double sigma = grid[k];
    double worst = 0.0;
    for (const Index i : rows) {
      const Vector x = dataset.row(i).transpose();
      worst = std::max(worst, (empirical_denoise(dataset, x, sigma) - model.denoise(x, sigma)).norm());
    }
    curve.points[k] = {sigma, worst * (1.0 + sigma) * (1.0 + sigma), 0.0, static_cast<std::size_t>(count)};
  });
  return curve;
}

}  // namespace memgeom
