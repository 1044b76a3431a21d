#pragma once

#include "memgeom/core.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace memgeom {

/// Finite training set: N rows of dimension d. Immutable once built.
class Dataset {
 public:
  explicit Dataset(RowMatrix<double> values, std::string label = {});

  Index n_points() const { return values_.rows(); }
  Index dim() const { return values_.cols(); }
  const RowMatrix<double>& values() const { return values_; }
  auto row(Index i) const { return values_.row(i); }
  const std::string& label() const { return label_; }

 private:
  RowMatrix<double> values_;
  std::string label_;
};

using DatasetPtr = std::shared_ptr<const Dataset>;

enum class DataFormat { csv, raw_f64 };

DataFormat parse_data_format(const std::string& name);
/// Infers the format from the extension: ".csv" is CSV, anything else is raw-f64.
DataFormat format_from_extension(const std::filesystem::path& path);

Dataset load_dataset(const std::filesystem::path& path, DataFormat format);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path, DataFormat format);

/// Affine map sending [lo, hi] to [-1, 1] coordinate-wise.
Dataset rescale(const Dataset& dataset, double lo, double hi);

enum class SyntheticKind { gaussian_mixture, two_cluster, uniform_cube, circulant_stationary };

SyntheticKind parse_synthetic_kind(const std::string& name);
std::string to_string(SyntheticKind kind);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::two_cluster;
  Index n_points = 200;
  Index dim = 64;
  std::uint64_t seed = 0;

  // gaussian-mixture: explicit component means (rows) and per-component scales. When
  // `means` is empty, `components` means are drawn from N(0, spread^2 I).
  std::vector<Vector> means;
  std::vector<double> scales;
  Index components = 4;
  double spread = 10.0;
  double scale = 1.0;

  // two-cluster: first ceil(N/2) rows around +(s/2) e1, the rest around -(s/2) e1.
  double separation = 20.0;
  double width = 1.0;

  // uniform-cube: coordinates uniform on [-half_width, half_width].
  double half_width = 1.0;

  // circulant-stationary: rows ~ N(0, C) with C circulant of eigenvalues `spectrum`.
  Vector spectrum;

  /// Mean of the generating law (used by law-of-large-numbers checks).
  Vector population_mean() const;
};

Dataset synthesize(const SyntheticSpec& spec);

/// Sorted distances from a query to every row.
class DistanceProfile {
 public:
  DistanceProfile(std::vector<double> sorted, bool is_member);

  /// k-th nearest distance, 1-based. For member queries knn(1) is the self distance 0.
  double knn(std::size_t k) const;
  std::span<const double> distances() const& { return sorted_; }
  std::span<const double> distances() const&& = delete;
  bool is_member() const { return is_member_; }

 private:
  std::vector<double> sorted_;
  bool is_member_;
};

/// Throws InputError if `is_member` is set but no row equals the query exactly.
DistanceProfile distance_profile(const Dataset& dataset, const Eigen::Ref<const Vector>& query, bool is_member);

/// Profiles of every dataset row against the dataset (member queries), in row order.
std::vector<DistanceProfile> member_profiles(const Dataset& dataset);

struct NearestTwo {
  double d1 = 0.0;
  double d2 = 0.0;
  Index i1 = -1;
};

/// Smallest and second smallest distances from x to the rows. Requires N >= 2.
NearestTwo nearest_two(const Dataset& dataset, const Eigen::Ref<const Vector>& x);

double min_pairwise_distance(const Dataset& dataset);
double diameter(const Dataset& dataset);

/// Biased (1/N) mean and covariance of the rows.
Vector empirical_mean(const Dataset& dataset);
Matrix empirical_covariance(const Dataset& dataset);

}  // namespace memgeom
