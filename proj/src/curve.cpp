#include "memgeom/curve.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace memgeom {

std::vector<double> DiagnosticCurve::sigmas() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.sigma);
  return out;
}

std::vector<double> DiagnosticCurve::values() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.value);
  return out;
}

std::string format_double(double value) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

void write_curve_csv(std::ostream& out, const DiagnosticCurve& curve, const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "sigma,value,stderr,n\n";
  for (const auto& p : curve.points) {
    out << format_double(p.sigma) << ',' << format_double(p.value) << ',' << format_double(p.std_error) << ',' << p.n_samples << '\n';
  }
}

void write_curve_csv(const std::filesystem::path& path, const DiagnosticCurve& curve, const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  write_curve_csv(out, curve, comments);
}

namespace {

template <typename T>
T parse_cell(std::string_view cell, std::size_t row, std::size_t col) {
  T value{};
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) throw FormatError("bad curve entry", row, col);
  return value;
}

}  // namespace

DiagnosticCurve read_curve_csv(std::istream& in, std::string name) {
  DiagnosticCurve curve{std::move(name), {}};
  std::string line;
  std::size_t row = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != "sigma,value,stderr,n") throw FormatError("unexpected curve header", row, 1);
      header_seen = true;
      continue;
    }
    std::array<std::string_view, 4> cells;
    std::string_view rest(line);
    for (std::size_t k = 0; k < 4; ++k) {
      const auto comma = rest.find(',');
      if ((comma == std::string_view::npos) != (k == 3)) throw FormatError("curve rows need four columns", row, k + 1);
      cells[k] = rest.substr(0, comma);
      if (comma != std::string_view::npos) rest.remove_prefix(comma + 1);
    }
    curve.points.push_back({parse_cell<double>(cells[0], row, 1), parse_cell<double>(cells[1], row, 2),
                            parse_cell<double>(cells[2], row, 3), parse_cell<std::size_t>(cells[3], row, 4)});
  }
  return curve;
}

DiagnosticCurve read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return read_curve_csv(in, path.stem().string());
}

}  // namespace memgeom
