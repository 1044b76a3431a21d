#pragma once

#include "memgeom/core.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace memgeom {

struct CurvePoint {
  double sigma = 0.0;
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;

  bool operator==(const CurvePoint&) const = default;
};

/// Ordered (sigma, value, stderr, n) records.
struct DiagnosticCurve {
  std::string name;
  std::vector<CurvePoint> points;

  std::vector<double> sigmas() const;
  std::vector<double> values() const;
  bool operator==(const DiagnosticCurve&) const = default;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Lines starting with '#' are written first; the column header follows.
void write_curve_csv(std::ostream& out, const DiagnosticCurve& curve, const std::vector<std::string>& comments = {});
void write_curve_csv(const std::filesystem::path& path, const DiagnosticCurve& curve,
                     const std::vector<std::string>& comments = {});
DiagnosticCurve read_curve_csv(std::istream& in, std::string name = {});
DiagnosticCurve read_curve_csv(const std::filesystem::path& path);

}  // namespace memgeom
