#include "memgeom/data.hpp"

#include "memgeom/dft.hpp"
#include "memgeom/parallel.hpp"
#include "memgeom/random.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace memgeom {

namespace {

void check_finite(const RowMatrix<double>& values) {
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      if (!std::isfinite(values(i, j))) {
        throw FormatError("non-finite entry", static_cast<std::size_t>(i + 1), static_cast<std::size_t>(j + 1));
      }
    }
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<double> flat;
  Index dim = -1;
  Index rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto content = trim(line);
    if (content.empty()) continue;
    ++rows;
    Index col = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = content.find(',', start);
      const auto cell = trim(content.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      ++col;
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw FormatError(path.string() + ": unparseable entry '" + std::string(cell) + "'", line_no, static_cast<std::size_t>(col));
      }
      if (!std::isfinite(value)) {
        throw FormatError(path.string() + ": non-finite entry", line_no, static_cast<std::size_t>(col));
      }
      flat.push_back(value);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (dim < 0) {
      dim = col;
    } else if (col != dim) {
      throw FormatError(path.string() + ": expected " + std::to_string(dim) + " columns, found " + std::to_string(col), line_no,
                        static_cast<std::size_t>(col));
    }
  }
  if (rows == 0) throw FormatError(path.string() + ": no data rows", 0, 0);
  RowMatrix<double> values = Eigen::Map<RowMatrix<double>>(flat.data(), rows, dim);
  return Dataset(std::move(values), path.stem().string());
}

template <typename T>
T from_little_endian(const unsigned char* bytes) {
  std::array<unsigned char, sizeof(T)> buf;
  std::memcpy(buf.data(), bytes, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  return std::bit_cast<T>(buf);
}

template <typename T>
void write_little_endian(std::ostream& out, T value) {
  auto buf = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

Dataset load_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16) throw FormatError(path.string() + ": header shorter than 16 bytes", 0, 0);
  const auto n = from_little_endian<std::uint64_t>(bytes.data());
  const auto d = from_little_endian<std::uint64_t>(bytes.data() + 8);
  if (n == 0 || d == 0) throw FormatError(path.string() + ": header declares an empty matrix", 0, 0);
  const auto limit = std::numeric_limits<std::uint64_t>::max() / 8;
  if (n > limit / d) throw FormatError(path.string() + ": header size overflows", 0, 0);
  const std::uint64_t payload = n * d * 8;
  if (bytes.size() - 16 != payload) {
    const auto have = (bytes.size() - 16) / 8;
    throw FormatError(path.string() + ": payload holds " + std::to_string(have) + " values, header declares " + std::to_string(n * d),
                      static_cast<std::size_t>(have / d + 1), static_cast<std::size_t>(have % d + 1));
  }
  RowMatrix<double> values(static_cast<Index>(n), static_cast<Index>(d));
  const unsigned char* p = bytes.data() + 16;
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j, p += 8) {
      values(i, j) = from_little_endian<double>(p);
      if (!std::isfinite(values(i, j))) {
        throw FormatError(path.string() + ": non-finite entry", static_cast<std::size_t>(i + 1), static_cast<std::size_t>(j + 1));
      }
    }
  }
  return Dataset(std::move(values), path.stem().string());
}

}  // namespace

Dataset::Dataset(RowMatrix<double> values, std::string label) : values_(std::move(values)), label_(std::move(label)) {
  require(values_.rows() >= 1 && values_.cols() >= 1, "dataset needs at least one row and one column");
  check_finite(values_);
}

DataFormat parse_data_format(const std::string& name) {
  if (name == "csv") return DataFormat::csv;
  if (name == "raw-f64" || name == "raw" || name == "f64") return DataFormat::raw_f64;
  throw InputError("unknown data format '" + name + "' (expected csv or raw-f64)");
}

DataFormat format_from_extension(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DataFormat::csv : DataFormat::raw_f64;
}

Dataset load_dataset(const std::filesystem::path& path, DataFormat format) {
  return format == DataFormat::csv ? load_csv(path) : load_raw(path);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path, DataFormat format) {
  const auto& v = dataset.values();
  if (format == DataFormat::csv) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    std::array<char, 32> buf;
    for (Index i = 0; i < v.rows(); ++i) {
      for (Index j = 0; j < v.cols(); ++j) {
        if (j) out << ',';
        const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v(i, j));
        out.write(buf.data(), res.ptr - buf.data());
      }
      out << '\n';
    }
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  write_little_endian(out, static_cast<std::uint64_t>(v.rows()));
  write_little_endian(out, static_cast<std::uint64_t>(v.cols()));
  for (Index i = 0; i < v.rows(); ++i)
    for (Index j = 0; j < v.cols(); ++j) write_little_endian(out, v(i, j));
}

Dataset rescale(const Dataset& dataset, double lo, double hi) {
  require(hi > lo, "rescale range needs hi > lo");
  RowMatrix<double> v = (dataset.values().array() - lo) * (2.0 / (hi - lo)) - 1.0;
  return Dataset(std::move(v), dataset.label());
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "gaussian-mixture") return SyntheticKind::gaussian_mixture;
  if (name == "two-cluster") return SyntheticKind::two_cluster;
  if (name == "uniform-cube") return SyntheticKind::uniform_cube;
  if (name == "circulant-stationary") return SyntheticKind::circulant_stationary;
  throw InputError("unknown synthetic kind '" + name + "'");
}

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::gaussian_mixture: return "gaussian-mixture";
    case SyntheticKind::two_cluster: return "two-cluster";
    case SyntheticKind::uniform_cube: return "uniform-cube";
    case SyntheticKind::circulant_stationary: return "circulant-stationary";
  }
  return "unknown";
}

namespace {

std::vector<Vector> mixture_means(const SyntheticSpec& spec) {
  if (!spec.means.empty()) return spec.means;
  StreamRng rng(spec.seed, salt::kSynthesize, 1);
  std::vector<Vector> means;
  for (Index k = 0; k < spec.components; ++k) means.push_back(spec.spread * rng.normal_vector(spec.dim));
  return means;
}

Vector circulant_root_row(const Vector& spectrum) {
  require(spectrum.minCoeff() >= 0.0, "circulant spectrum has a negative eigenvalue");
  require(detail::conjugate_symmetric(spectrum, 1e-12 * std::max(1.0, spectrum.cwiseAbs().maxCoeff())),
          "circulant spectrum must satisfy lambda_k = lambda_{d-k}");
  double residue = 0.0;
  return detail::inverse_dft_real(spectrum.cwiseSqrt(), residue);
}

}  // namespace

Vector SyntheticSpec::population_mean() const {
  switch (kind) {
    case SyntheticKind::gaussian_mixture: {
      const auto m = mixture_means(*this);
      Vector mean = Vector::Zero(dim);
      for (const auto& mu : m) mean += mu;
      return mean / static_cast<double>(m.size());
    }
    case SyntheticKind::two_cluster: {
      Vector mean = Vector::Zero(dim);
      const Index upper = (n_points + 1) / 2;
      mean[0] = 0.5 * separation * static_cast<double>(upper - (n_points - upper)) / static_cast<double>(n_points);
      return mean;
    }
    case SyntheticKind::uniform_cube:
    case SyntheticKind::circulant_stationary:
      return Vector::Zero(dim);
  }
  return Vector::Zero(dim);
}

Dataset synthesize(const SyntheticSpec& spec) {
  require(spec.n_points >= 1 && spec.dim >= 1, "synthetic spec needs n_points >= 1 and dim >= 1");
  const Index n = spec.n_points;
  const Index d = spec.dim;
  RowMatrix<double> values(n, d);
  StreamRng rng(spec.seed, salt::kSynthesize, 0);
  switch (spec.kind) {
    case SyntheticKind::gaussian_mixture: {
      const auto means = mixture_means(spec);
      require(!means.empty(), "gaussian-mixture needs at least one component");
      for (const auto& mu : means) require(mu.size() == d, "mixture mean dimension does not match dim");
      require(spec.scales.empty() || spec.scales.size() == means.size(), "one scale per mixture component expected");
      for (Index i = 0; i < n; ++i) {
        const auto k = rng.index(means.size());
        const double s = spec.scales.empty() ? spec.scale : spec.scales[k];
        values.row(i) = (means[k] + s * rng.normal_vector(d)).transpose();
      }
      break;
    }
    case SyntheticKind::two_cluster: {
      require(spec.width >= 0.0, "two-cluster width must be nonnegative");
      const Index upper = (n + 1) / 2;
      for (Index i = 0; i < n; ++i) {
        Vector x = spec.width * rng.normal_vector(d);
        x[0] += (i < upper ? 0.5 : -0.5) * spec.separation;
        values.row(i) = x.transpose();
      }
      break;
    }
    case SyntheticKind::uniform_cube: {
      require(spec.half_width > 0.0, "uniform-cube half width must be positive");
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) values(i, j) = spec.half_width * (2.0 * rng.uniform() - 1.0);
      break;
    }
    case SyntheticKind::circulant_stationary: {
      require(spec.spectrum.size() == d, "circulant spectrum length must equal dim");
      const Vector root = circulant_root_row(spec.spectrum);
      for (Index i = 0; i < n; ++i) {
        const Vector z = rng.normal_vector(d);
        for (Index j = 0; j < d; ++j) {
          double acc = 0.0;
          for (Index r = 0; r < d; ++r) acc += root[((r - j) % d + d) % d] * z[r];
          values(i, j) = acc;
        }
      }
      break;
    }
  }
  return Dataset(std::move(values), to_string(spec.kind));
}

DistanceProfile::DistanceProfile(std::vector<double> sorted, bool is_member) : sorted_(std::move(sorted)), is_member_(is_member) {}

double DistanceProfile::knn(std::size_t k) const {
  require(k >= 1 && k <= sorted_.size(), "knn index out of range");
  return sorted_[k - 1];
}

DistanceProfile distance_profile(const Dataset& dataset, const Eigen::Ref<const Vector>& query, bool is_member) {
  require(query.size() == dataset.dim(), "query dimension does not match dataset");
  std::vector<double> dist(static_cast<std::size_t>(dataset.n_points()));
  bool found = false;
  for (Index i = 0; i < dataset.n_points(); ++i) {
    const double sq = squared_distance(dataset.row(i).transpose(), query);
    found = found || sq == 0.0;
    dist[static_cast<std::size_t>(i)] = std::sqrt(sq);
  }
  if (is_member && !found) throw InputError("query flagged as member but matches no dataset row");
  std::sort(dist.begin(), dist.end());
  return DistanceProfile(std::move(dist), is_member);
}

std::vector<DistanceProfile> member_profiles(const Dataset& dataset) {
  std::vector<DistanceProfile> out(static_cast<std::size_t>(dataset.n_points()), DistanceProfile({}, true));
  parallel_for(out.size(), [&](std::size_t i) {
    out[i] = distance_profile(dataset, dataset.row(static_cast<Index>(i)).transpose(), true);
  });
  return out;
}

NearestTwo nearest_two(const Dataset& dataset, const Eigen::Ref<const Vector>& x) {
  require(dataset.n_points() >= 2, "nearest-two distances need at least two rows");
  require(x.size() == dataset.dim(), "query dimension does not match dataset");
  double b1 = std::numeric_limits<double>::infinity();
  double b2 = b1;
  Index i1 = -1;
  for (Index i = 0; i < dataset.n_points(); ++i) {
    const double sq = squared_distance(dataset.row(i).transpose(), x);
    if (sq < b1) {
      b2 = b1;
      b1 = sq;
      i1 = i;
    } else if (sq < b2) {
      b2 = sq;
    }
  }
  return {std::sqrt(b1), std::sqrt(b2), i1};
}

namespace {

template <typename Reduce>
double pairwise_reduce(const Dataset& dataset, double init, Reduce reduce) {
  const auto n = static_cast<std::size_t>(dataset.n_points());
  std::vector<double> per_row(n, init);
  parallel_for(n, [&](std::size_t i) {
    double acc = init;
    for (Index j = static_cast<Index>(i) + 1; j < dataset.n_points(); ++j)
      acc = reduce(acc, squared_distance(dataset.row(static_cast<Index>(i)), dataset.row(j)));
    per_row[i] = acc;
  });
  double acc = init;
  for (double v : per_row) acc = reduce(acc, v);
  return std::sqrt(acc);
}

}  // namespace

double min_pairwise_distance(const Dataset& dataset) {
  require(dataset.n_points() >= 2, "pairwise distances need at least two rows");
  return pairwise_reduce(dataset, std::numeric_limits<double>::infinity(), [](double a, double b) { return std::min(a, b); });
}

double diameter(const Dataset& dataset) {
  return pairwise_reduce(dataset, 0.0, [](double a, double b) { return std::max(a, b); });
}

Vector empirical_mean(const Dataset& dataset) { return dataset.values().colwise().mean().transpose(); }

Matrix empirical_covariance(const Dataset& dataset) {
  const RowMatrix<double> centered = dataset.values().rowwise() - dataset.values().colwise().mean();
  return (centered.transpose() * centered) / static_cast<double>(dataset.n_points());
}

}  // namespace memgeom
