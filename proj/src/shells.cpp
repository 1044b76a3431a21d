#include "memgeom/shells.hpp"

#include "memgeom/curve.hpp"
#include "memgeom/parallel.hpp"
#include "memgeom/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace memgeom {

double ShellSpec::guaranteed_mass() const { return 1.0 - 2.0 * std::exp(-c); }

ShellSpec shell_radii(Index d, double c) {
  require(d >= 2, "shell dimension must be at least 2");
  require(std::isfinite(c) && c > 0.0, "shell parameter c must be positive");
  const double dd = static_cast<double>(d);
  const double root = std::sqrt(c * dd);
  ShellSpec s;
  s.dim = d;
  s.c = c;
  const double inner = dd - 2.0 * root;
  s.degenerate = inner < 0.0;
  s.r_in = s.degenerate ? 0.0 : std::sqrt(inner);
  s.r_out = std::sqrt(dd + 2.0 * root + 2.0 * c);
  return s;
}

ShellSampleBank::ShellSampleBank(Index dim, std::size_t n_samples, std::uint64_t seed)
    : dim_(dim), first_(n_samples), rest_(n_samples) {
  require(dim >= 2, "sample bank dimension must be at least 2");
  const std::size_t blocks = (n_samples + kMonteCarloBlock - 1) / kMonteCarloBlock;
  const double dof = static_cast<double>(dim - 1);
  parallel_for(blocks, [&](std::size_t b) {
    StreamRng rng(seed, salt::kShellBank, b);
    const std::size_t end = std::min(n_samples, (b + 1) * kMonteCarloBlock);
    for (std::size_t i = b * kMonteCarloBlock; i < end; ++i) {
      first_[i] = rng.normal();
      rest_[i] = rng.chi_squared(dof);
    }
  });
}

namespace {

/// Bernoulli mean over the bank, merged block by block.
template <typename Hit>
MeanEstimate bank_mean(const ShellSampleBank& bank, Hit hit) {
  const std::size_t n = bank.size();
  require(n >= 1, "sample bank is empty");
  const std::size_t blocks = (n + kMonteCarloBlock - 1) / kMonteCarloBlock;
  std::vector<RunningMoments> partial(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t end = std::min(n, (b + 1) * kMonteCarloBlock);
    for (std::size_t i = b * kMonteCarloBlock; i < end; ++i) partial[b].add(hit(i) ? 1.0 : 0.0);
  }
  RunningMoments total;
  for (const auto& p : partial) total.merge(p);
  return total.estimate();
}

}  // namespace

MeanEstimate shell_membership_rate(const ShellSpec& spec, const ShellSampleBank& bank) {
  require(bank.dim() == spec.dim, "sample bank dimension does not match shell");
  return bank_mean(bank, [&](std::size_t i) { return spec.contains_squared(bank.norm_squared(i)); });
}

MeanEstimate shell_membership_rate(const ShellSpec& spec, std::size_t n_samples, std::uint64_t seed) {
  return shell_membership_rate(spec, ShellSampleBank(spec.dim, n_samples, seed));
}

PhiEstimate phi(const ShellSpec& spec, const ShellSampleBank& bank, double t) {
  require(t >= 0.0, "phi needs t >= 0");
  require(bank.dim() == spec.dim, "sample bank dimension does not match shell");
  if (t > 2.0 * spec.r_out) return {t, 0.0, 0.0, bank.size()};
  const auto est = bank_mean(bank, [&](std::size_t i) {
    const double shifted = (bank.first(i) + t) * (bank.first(i) + t) + bank.rest(i);
    return spec.contains_squared(bank.norm_squared(i)) && spec.contains_squared(shifted);
  });
  return {t, est.mean, est.std_error, est.n};
}

PhiEstimate phi(const ShellSpec& spec, double t, std::size_t n_samples, std::uint64_t seed) {
  return phi(spec, ShellSampleBank(spec.dim, n_samples, seed), t);
}

PhiTable::PhiTable(const ShellSpec& spec, const ShellSampleBank& bank, std::size_t knots) {
  require(knots >= 2, "phi table needs at least two knots");
  const double hi = 2.0 * spec.r_out;
  std::vector<double> ts{0.0};
  const double llo = std::log(kFirstKnot);
  const double step = (std::log(hi) - llo) / static_cast<double>(knots - 1);
  for (std::size_t k = 0; k < knots; ++k) ts.push_back(k + 1 == knots ? hi : std::exp(llo + step * static_cast<double>(k)));
  entries_.resize(ts.size());
  parallel_for(ts.size(), [&](std::size_t k) { entries_[k] = phi(spec, bank, ts[k]); });
}

PhiTable::PhiTable(std::vector<PhiEstimate> entries) : entries_(std::move(entries)) {
  require(entries_.size() >= 2 && entries_.front().t == 0.0, "phi table must start at t = 0");
  for (std::size_t k = 1; k < entries_.size(); ++k) require(entries_[k].t > entries_[k - 1].t, "phi table knots must increase");
}

PhiEstimate PhiTable::operator()(double t) const {
  require(t >= 0.0, "phi table lookup needs t >= 0 (no extrapolation)");
  if (t > t_max()) return {t, 0.0, 0.0, entries_.back().n_samples};
  const auto it = std::lower_bound(entries_.begin(), entries_.end(), t, [](const PhiEstimate& e, double v) { return e.t < v; });
  if (it->t == t) return *it;
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double frac = lo.t == 0.0 ? (t - lo.t) / (hi.t - lo.t) : std::log(t / lo.t) / std::log(hi.t / lo.t);
  return {t, lo.value + frac * (hi.value - lo.value), lo.std_error + frac * (hi.std_error - lo.std_error), hi.n_samples};
}

void PhiTable::write_csv(const std::filesystem::path& path, const std::vector<std::string>& comments) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "t,value,stderr,n\n";
  for (const auto& e : entries_)
    out << format_double(e.t) << ',' << format_double(e.value) << ',' << format_double(e.std_error) << ',' << e.n_samples << '\n';
}

PhiTable PhiTable::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto pos = text.find("t,value,stderr,n");
  if (pos == std::string::npos) throw FormatError(path.string() + ": missing phi table header", 1, 1);
  text.replace(pos, 16, "sigma,value,stderr,n");
  std::istringstream body(text);
  const auto curve = read_curve_csv(body);
  std::vector<PhiEstimate> entries;
  for (const auto& p : curve.points) entries.push_back({p.sigma, p.value, p.std_error, p.n_samples});
  return PhiTable(std::move(entries));
}

MeanEstimate coverage(const Dataset& dataset, const ShellSpec& spec, const Dataset& test_points, double sigma, std::size_t n_noise,
                      std::uint64_t seed) {
  require(dataset.dim() == test_points.dim() && dataset.dim() == spec.dim, "coverage inputs disagree on dimension");
  require(sigma > 0.0 && std::isfinite(sigma), "sigma must be positive");
  require(n_noise >= 1, "coverage needs n_noise >= 1");
  const Index n_train = dataset.n_points();
  const auto n_test = static_cast<std::size_t>(test_points.n_points());
  const double lo = sigma * spec.r_in;
  const double hi = sigma * spec.r_out;
  std::vector<RunningMoments> partial(n_test);
  parallel_for(n_test, [&](std::size_t j) {
    const Vector x = test_points.row(static_cast<Index>(j)).transpose();
    std::vector<std::pair<double, Index>> order(static_cast<std::size_t>(n_train));
    for (Index i = 0; i < n_train; ++i) order[static_cast<std::size_t>(i)] = {std::sqrt(squared_distance(dataset.row(i).transpose(), x)), i};
    std::sort(order.begin(), order.end());
    StreamRng rng(seed, salt::kCoverage, j);
    for (std::size_t k = 0; k < n_noise; ++k) {
      const Vector noise = sigma * rng.normal_vector(x.size());
      const Vector y = x + noise;
      const double reach = noise.norm();
      bool hit = false;
      for (const auto& [dist, i] : order) {
        // Triangle inequality: ||y - x_i|| lies within dist -/+ reach.
        if (dist - reach > hi) break;
        if (dist + reach < lo) continue;
        const double sq = squared_distance(dataset.row(i).transpose(), y);
        if (sq >= lo * lo && sq <= hi * hi) {
          hit = true;
          break;
        }
      }
      partial[j].add(hit ? 1.0 : 0.0);
    }
  });
  RunningMoments total;
  for (const auto& p : partial) total.merge(p);
  return total.estimate();
}

CoverageBounds coverage_bounds(const Dataset& dataset, const ShellSpec& spec, const Dataset& test_points, double sigma,
                               const PhiTable& table, std::uint64_t seed, std::size_t max_pairs) {
  require(dataset.dim() == test_points.dim() && dataset.dim() == spec.dim, "coverage inputs disagree on dimension");
  require(sigma > 0.0 && std::isfinite(sigma), "sigma must be positive");
  const Index n_train = dataset.n_points();
  const Index n_test = test_points.n_points();
  CoverageBounds out;

  std::vector<double> nearest(static_cast<std::size_t>(n_test));
  parallel_for(nearest.size(), [&](std::size_t j) {
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n_train; ++i) best = std::min(best, squared_distance(dataset.row(i), test_points.row(static_cast<Index>(j))));
    nearest[j] = std::sqrt(best);
  });
  for (const double d1 : nearest) {
    const auto p = table(d1 / sigma);
    out.lower += p.value;
    out.lower_std_error += p.std_error;
  }
  out.lower /= static_cast<double>(n_test);
  out.lower_std_error /= static_cast<double>(n_test);

  const auto total_pairs = static_cast<std::size_t>(n_train) * static_cast<std::size_t>(n_test);
  const std::size_t n_pairs = std::min(total_pairs, max_pairs);
  std::vector<std::size_t> chosen;
  if (n_pairs < total_pairs) {
    StreamRng rng(seed, salt::kPairs, 0);
    chosen.resize(n_pairs);
    for (auto& c : chosen) c = rng.index(total_pairs);
  }
  const std::size_t blocks = (n_pairs + kMonteCarloBlock - 1) / kMonteCarloBlock;
  std::vector<std::pair<double, double>> partial(blocks, {0.0, 0.0});
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t end = std::min(n_pairs, (b + 1) * kMonteCarloBlock);
    for (std::size_t k = b * kMonteCarloBlock; k < end; ++k) {
      const std::size_t pair = chosen.empty() ? k : chosen[k];
      const auto i = static_cast<Index>(pair % static_cast<std::size_t>(n_train));
      const auto j = static_cast<Index>(pair / static_cast<std::size_t>(n_train));
      const auto p = table(std::sqrt(squared_distance(dataset.row(i), test_points.row(j))) / sigma);
      partial[b].first += p.value;
      partial[b].second += p.std_error;
    }
  });
  double sum = 0.0, se = 0.0;
  for (const auto& [v, s] : partial) {
    sum += v;
    se += s;
  }
  const double scale = static_cast<double>(n_train) / static_cast<double>(n_pairs);
  out.n_pairs = n_pairs;
  out.upper_raw = 2.0 * std::exp(-spec.c) + scale * sum;
  out.upper_std_error = scale * se;
  out.upper = std::min(1.0, out.upper_raw);
  return out;
}

double disjointness_sigma(const Dataset& dataset, const ShellSpec& spec) {
  require(dataset.n_points() >= 2, "disjointness needs at least two rows");
  return min_pairwise_distance(dataset) / (2.0 * spec.r_out);
}

bool shells_intersect(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b, double sigma, const ShellSpec& spec) {
  return (a - b).norm() <= 2.0 * sigma * spec.r_out;
}

Vector sample_uniform_annulus(const ShellSpec& spec, StreamRng& rng) {
  Vector direction = rng.normal_vector(spec.dim);
  direction /= direction.norm();
  const double d = static_cast<double>(spec.dim);
  // Radius law proportional to r^{d-1} on [r_in, r_out], inverted in log space.
  const double rho_d = spec.r_in > 0.0 ? std::exp(d * std::log(spec.r_in / spec.r_out)) : 0.0;
  const double u = rng.uniform();
  const double radius = spec.r_out * std::exp(std::log(rho_d + u * (1.0 - rho_d)) / d);
  return radius * direction;
}

double annulus_second_moment(const ShellSpec& spec) {
  const double d = static_cast<double>(spec.dim);
  const double rho = spec.r_in / spec.r_out;
  const double num = 1.0 - std::pow(rho, d + 2.0);
  const double den = 1.0 - std::pow(rho, d);
  return spec.r_out * spec.r_out * d / (d + 2.0) * num / den;
}

MeanEstimate shell_only_loss(const Dataset& dataset, const ShellSpec& spec, const DenoiseFn& denoiser, double sigma,
                             std::size_t n_samples, std::uint64_t seed, ShellNoise noise) {
  require(dataset.dim() == spec.dim, "shell and dataset dimensions differ");
  require(sigma > 0.0 && n_samples >= 1, "shell_only_loss needs sigma > 0 and n_samples >= 1");
  const auto n = static_cast<std::size_t>(dataset.n_points());
  return monte_carlo(n_samples, seed, salt::kShellLoss,
                     [&](StreamRng& rng, std::size_t) {
                       const Vector x = dataset.row(static_cast<Index>(rng.index(n))).transpose();
                       const Vector z = noise == ShellNoise::uniform_annulus ? sample_uniform_annulus(spec, rng) : rng.normal_vector(spec.dim);
                       return (denoiser(x + sigma * z, sigma) - x).squaredNorm();
                     })
      .estimate();
}

MeanEstimate shell_only_loss(const Dataset& dataset, const ShellSpec& spec, const DenoiserSpec& denoiser, double sigma,
                             std::size_t n_samples, std::uint64_t seed, ShellNoise noise) {
  return shell_only_loss(dataset, spec, [&](const Vector& x, double s) { return denoise(denoiser, x, s); }, sigma, n_samples, seed,
                         noise);
}

DenoiseFn nearest_center_projector(DatasetPtr dataset) {
  return [dataset = std::move(dataset)](const Vector& x, double) -> Vector {
    Index best = 0;
    double best_sq = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < dataset->n_points(); ++i) {
      const double sq = squared_distance(dataset->row(i).transpose(), x);
      if (sq < best_sq) {
        best_sq = sq;
        best = i;
      }
    }
    return dataset->row(best).transpose();
  };
}

DenoiseFn shell_projector(DatasetPtr dataset, ShellSpec spec) {
  return [dataset = std::move(dataset), spec](const Vector& x, double sigma) -> Vector {
    for (Index i = 0; i < dataset->n_points(); ++i) {
      const double r = std::sqrt(squared_distance(dataset->row(i).transpose(), x)) / sigma;
      if (spec.contains(r)) return dataset->row(i).transpose();
    }
    return x;
  };
}

double sandwich_margin(const MeanEstimate& coverage, const CoverageBounds& bounds, double k) {
  const auto n = static_cast<double>(std::max<std::size_t>(coverage.n, 1));
  auto bernoulli = [n](double p) {
    p = std::clamp(p, 0.0, 1.0);
    return std::sqrt(p * (1.0 - p) / n);
  };
  const double se_lo = std::max(coverage.std_error, bernoulli(bounds.lower));
  const double se_hi = std::max(coverage.std_error, bernoulli(bounds.upper));
  const double below = coverage.mean - bounds.lower + k * std::hypot(se_lo, bounds.lower_std_error);
  const double above = bounds.upper - coverage.mean + k * std::hypot(se_hi, bounds.upper_std_error);
  return std::min(below, above);
}

}  // namespace memgeom
