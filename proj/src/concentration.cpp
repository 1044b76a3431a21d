#include "memgeom/concentration.hpp"

#include "memgeom/denoise.hpp"
#include "memgeom/parallel.hpp"
#include "memgeom/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace memgeom {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

namespace {

// Acklam's rational approximation for the lower half, relative error about 1e-9.
double acklam_lower(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, "normal_quantile needs p in (0, 1)");
  if (p > 0.5) return -normal_quantile(1.0 - p);
  if (p == 0.5) return 0.0;
  double x = acklam_lower(p);
  // One Halley step on F(x) - p.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double threshold_a(Index k, double delta, double q) {
  require(k >= 1, "threshold_a needs K >= 1");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  require(q > 0.5 && q < 1.0, "q must lie in (1/2, 1)");
  const double z = normal_quantile(delta / static_cast<double>(k));
  return z + std::sqrt(z * z + 2.0 * std::log(static_cast<double>(k) * q / (1.0 - q)));
}

double threshold_b(Index n_points, double delta, double q) {
  require(n_points >= 1, "threshold_b needs N >= 1");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  require(q > 0.5 && q < 1.0, "q must lie in (1/2, 1)");
  const double z = -normal_quantile(delta / static_cast<double>(n_points));
  return z + std::sqrt(z * z + 2.0 * std::log(static_cast<double>(n_points) * q / (1.0 - q)));
}

ThresholdReport concentration_thresholds(const Dataset& dataset, Index point_index, double q, double delta) {
  const Index n = dataset.n_points();
  require(n >= 2, "concentration thresholds need at least two rows");
  require(point_index >= 0 && point_index < n, "point index out of range");
  const auto profile = distance_profile(dataset, dataset.row(point_index).transpose(), true);
  ThresholdReport r;
  r.point_index = point_index;
  r.q = q;
  r.delta = delta;
  r.a_constants.resize(static_cast<std::size_t>(n - 1));
  for (Index k = 1; k < n; ++k) r.a_constants[static_cast<std::size_t>(k - 1)] = threshold_a(k, delta, q);
  for (Index k = 2; k <= n; ++k) {
    const double a = r.a_constants[static_cast<std::size_t>(k - 2)];
    if (!(a > 0.0)) continue;
    const double candidate = profile.knn(static_cast<std::size_t>(k)) / a;
    if (!r.sigma_high || candidate < *r.sigma_high) {
      r.sigma_high = candidate;
      r.k_star = k;
    }
  }
  r.b_constant = threshold_b(n, delta, q);
  r.sigma_low = profile.knn(2) / r.b_constant;
  return r;
}

namespace {

/// Noisy logits around a fixed base row, expanded so that each sigma costs O(N):
/// -||x_b + sigma z - x_i||^2 / (2 sigma^2) = -(D_i^2 + 2 sigma <z, x_b - x_i>)/(2 sigma^2) + const.
struct BaseGeometry {
  Vector dist_sq;
  RowMatrix<double> offsets;  // rows x_b - x_i

  BaseGeometry(const Dataset& dataset, Index base) : dist_sq(dataset.n_points()), offsets(dataset.values().rows(), dataset.dim()) {
    for (Index i = 0; i < dataset.n_points(); ++i) {
      offsets.row(i) = dataset.row(base) - dataset.row(i);
      dist_sq[i] = offsets.row(i).squaredNorm();
    }
  }

  /// Weights at x_b + sigma z given the projections p = offsets * z.
  Vector weights(const Vector& proj, double sigma) const {
    const Vector logits = -(dist_sq + 2.0 * sigma * proj) / (2.0 * sigma * sigma);
    return softmax(logits);
  }
};

}  // namespace

std::vector<double> self_weight_samples(const Dataset& dataset, Index point_index, double sigma, std::size_t n_trials,
                                        std::uint64_t seed, std::uint64_t stream) {
  require(sigma > 0.0 && std::isfinite(sigma), "sigma must be positive");
  const BaseGeometry geo(dataset, point_index);
  std::vector<double> out(n_trials);
  const std::size_t blocks = (n_trials + kMonteCarloBlock - 1) / kMonteCarloBlock;
  parallel_for(blocks, [&](std::size_t b) {
    StreamRng rng(seed, salt::kThresholds, stream * 0x10000 + b);
    const std::size_t end = std::min(n_trials, (b + 1) * kMonteCarloBlock);
    for (std::size_t k = b * kMonteCarloBlock; k < end; ++k) {
      const Vector z = rng.normal_vector(dataset.dim());
      out[k] = geo.weights(geo.offsets * z, sigma)[point_index];
    }
  });
  return out;
}

ThresholdValidation validate_thresholds(const Dataset& dataset, Index point_index, double q, double delta, std::size_t n_trials,
                                        std::uint64_t seed) {
  require(n_trials >= 1, "validate_thresholds needs n_trials >= 1");
  ThresholdValidation v;
  v.report = concentration_thresholds(dataset, point_index, q, delta);
  if (!v.report.sigma_high) throw InputError("no valid upper threshold for this point");
  if (!(v.report.sigma_low > 0.0)) throw InputError("lower threshold is zero (duplicate row)");
  auto rate = [&](double sigma, std::uint64_t stream, bool above) {
    RunningMoments m;
    for (const double w : self_weight_samples(dataset, point_index, sigma, n_trials, seed, stream))
      m.add((above ? w > q : w < q) ? 1.0 : 0.0);
    return m.estimate();
  };
  v.fail_high = rate(*v.report.sigma_high, 1, true);
  v.fail_low = rate(v.report.sigma_low, 2, false);
  v.tolerance = delta + 4.0 * std::sqrt(delta * (1.0 - delta) / static_cast<double>(n_trials));
  return v;
}

WeightCurves max_vs_self_weight(const Dataset& dataset, const SigmaGrid& grid, Index n_base, std::size_t n_noise, std::uint64_t seed) {
  require(n_base >= 1 && n_base <= dataset.n_points(), "n_base must lie in [1, N]");
  require(n_noise >= 1, "n_noise must be positive");
  const auto bases = sample_without_replacement(dataset.n_points(), n_base, seed, salt::kWeightBase);
  const std::size_t n_sigma = grid.size();
  struct Partial {
    RunningMoments max, self, gap;
  };
  // partial[b * n_sigma + s]
  std::vector<Partial> partial(bases.size() * n_sigma);
  parallel_for(bases.size(), [&](std::size_t b) {
    const Index base = bases[b];
    const BaseGeometry geo(dataset, base);
    StreamRng rng(seed, salt::kWeightNoise, b);
    for (std::size_t k = 0; k < n_noise; ++k) {
      const Vector z = rng.normal_vector(dataset.dim());
      const Vector proj = geo.offsets * z;
      for (std::size_t s = 0; s < n_sigma; ++s) {
        const Vector w = geo.weights(proj, grid[s]);
        const double top = w.maxCoeff();
        auto& p = partial[b * n_sigma + s];
        p.max.add(top);
        p.self.add(w[base]);
        p.gap.add(top - w[base]);
      }
    }
  });
  WeightCurves out{{"max_weight", {}}, {"self_weight", {}}, {"max_minus_self", {}}};
  for (std::size_t s = 0; s < n_sigma; ++s) {
    Partial total;
    for (std::size_t b = 0; b < bases.size(); ++b) {
      const auto& p = partial[b * n_sigma + s];
      total.max.merge(p.max);
      total.self.merge(p.self);
      total.gap.merge(p.gap);
    }
    auto point = [&](const RunningMoments& m) {
      const auto e = m.estimate();
      return CurvePoint{grid[s], e.mean, e.std_error, e.n};
    };
    out.max_weight.points.push_back(point(total.max));
    out.self_weight.points.push_back(point(total.self));
    out.gap.points.push_back(point(total.gap));
  }
  return out;
}

DiagnosticCurve w_sigma_curve(const Dataset& dataset, const SigmaGrid& grid, Index n_base, std::size_t n_noise, std::uint64_t seed) {
  auto curves = max_vs_self_weight(dataset, grid, n_base, n_noise, seed);
  curves.max_weight.name = "weight";
  return std::move(curves.max_weight);
}

CosineBoundReport cosine_bound(const Dataset& dataset, Index point_index, double t, double epsilon, double a, double c) {
  require(point_index >= 0 && point_index < dataset.n_points(), "point index out of range");
  require(t > 0.0 && t < 1.0, "t must lie in (0, 1)");
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
  require(a > 0.0 && c > 0.0, "a and c must be positive");
  const Vector x1 = dataset.row(point_index).transpose();
  const double norm_x1 = x1.norm();
  require(norm_x1 > 0.0, "cosine bound needs x_1 != 0");
  const Index n = dataset.n_points();
  const double d = static_cast<double>(dataset.dim());
  const double sigma = t_to_sigma(t);

  CosineBoundReport r;
  r.point_index = point_index;
  r.t = t;
  r.epsilon = epsilon;
  r.a = a;
  r.c = c;
  r.diameter = n >= 2 ? diameter(dataset) : 0.0;
  r.kappa_epsilon = n >= 2 ? std::log(epsilon / (static_cast<double>(n - 1) * (1.0 - epsilon))) : 0.0;

  const double radicand = d - 2.0 * std::sqrt(d * c) + norm_x1 * norm_x1 - a * norm_x1;
  if (radicand <= 0.0) {
    r.vacuous = true;
    r.bound = -std::numeric_limits<double>::infinity();
  } else {
    const double excess = r.diameter * epsilon;
    r.bound = 1.0 - 2.0 * excess / ((1.0 - t) * std::sqrt(radicand) + excess);
  }

  r.delta_total = std::exp(-c) + normal_sf(a / 2.0);
  for (Index j = 0; j < n; ++j) {
    if (j == point_index) continue;
    const double dj = (dataset.row(j) - dataset.row(point_index)).norm();
    if (dj == 0.0) {
      // The argument tends to sigma * kappa / 0, i.e. to -infinity when kappa < 0.
      r.delta_total += r.kappa_epsilon < 0.0 ? 1.0 : 0.0;
      continue;
    }
    r.delta_total += normal_sf(dj / (2.0 * sigma) + sigma * r.kappa_epsilon / dj);
  }
  return r;
}

CosineValidation validate_cosine_bound(const Dataset& dataset, Index point_index, double t, double epsilon, double a, double c,
                                       std::size_t n_draws, std::uint64_t seed) {
  CosineValidation v;
  v.report = cosine_bound(dataset, point_index, t, epsilon, a, c);
  const Vector x1 = dataset.row(point_index).transpose();
  std::vector<double> cosines(n_draws);
  const std::size_t blocks = (n_draws + kMonteCarloBlock - 1) / kMonteCarloBlock;
  parallel_for(blocks, [&](std::size_t b) {
    StreamRng rng(seed, salt::kCosine, b);
    const std::size_t end = std::min(n_draws, (b + 1) * kMonteCarloBlock);
    for (std::size_t k = b * kMonteCarloBlock; k < end; ++k) {
      const Vector z = rng.normal_vector(dataset.dim());
      const Vector xt = (1.0 - t) * z + t * x1;
      const auto fields = flow_vector_fields(dataset, xt, t, point_index);
      cosines[k] = fields.u_opt.dot(fields.u_cond) / (fields.u_opt.norm() * fields.u_cond.norm());
    }
  });
  RunningMoments hits;
  v.min_cosine = std::numeric_limits<double>::infinity();
  for (const double cs : cosines) {
    hits.add(cs >= v.report.bound ? 1.0 : 0.0);
    v.min_cosine = std::min(v.min_cosine, cs);
  }
  v.hit_rate = hits.estimate();
  return v;
}

}  // namespace memgeom
