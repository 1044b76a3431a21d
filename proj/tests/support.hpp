#pragma once

#include "memgeom/data.hpp"
#include "memgeom/random.hpp"

#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>

namespace memgeom::test {

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("memgeom-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Dataset gaussian_rows(Index n, Index d, double scale, std::uint64_t seed) {
  StreamRng rng(seed, 0xfeed, 0);
  RowMatrix<double> v(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < d; ++k) v(i, k) = scale * rng.normal();
  return Dataset(std::move(v), "rows");
}

inline Dataset from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  RowMatrix<double> v(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index k = 0;
    for (const double x : r) v(i, k++) = x;
    ++i;
  }
  return Dataset(std::move(v), "fixture");
}

inline bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace memgeom::test
