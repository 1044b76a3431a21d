#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace memgeom {

struct ValidationOptions {
  /// Fewer Monte Carlo samples; tolerances are stderr-based and widen accordingly.
  bool quick = false;
  std::uint64_t seed = 20240611;
};

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  bool skipped = false;
  std::string detail;
  double seconds = 0.0;
  /// Runtime limit of the check; 0 when unbounded.
  double budget_seconds = 0.0;
};

struct ValidationCheck {
  int id;
  std::string name;
  std::function<CheckResult(const ValidationOptions&)> run;
  double budget_seconds = 0.0;
};

/// Checks 1-11 of the property suite, in order.
const std::vector<ValidationCheck>& validation_checks();

/// Runs the selected checks (all when `only` is empty), timing each.
std::vector<CheckResult> run_validation(const ValidationOptions& options, const std::vector<int>& only = {});

/// "PASS [3] name: detail (1.20 s of 180 s)"
std::string format_result(const CheckResult& result);

}  // namespace memgeom
