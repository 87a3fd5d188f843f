// SPDX-License-Identifier: Apache-2.0
#ifndef NPFORM_REPORT_HPP
#define NPFORM_REPORT_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace npf {

/// Outcome of one property check.
///
/// Every check asserts an inequality between `lhs` and `rhs`; `slack` is the
/// signed margin by which it holds (negative = violated) and the check passes
/// iff slack >= -tolerance.
struct CheckReport {
  std::string check;
  double p = 0.0;
  std::vector<std::size_t> grid;
  bool passed = false;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  double tolerance = 0.0;
  std::optional<std::string> witness;
  std::vector<std::pair<std::string, double>> values;
  std::vector<std::string> notes;

  void set(double l, double r, double s, double tol) {
    lhs = l;
    rhs = r;
    slack = s;
    tolerance = tol;
    passed = s >= -tol;
  }
  void add(std::string key, double v) { values.emplace_back(std::move(key), v); }
  double value(const std::string& key) const;
};

/// A named list of reports; passes when all members pass.
struct SuiteReport {
  std::string suite;
  std::vector<CheckReport> checks;

  bool passed() const;
  double worst_slack() const;
};

}  // namespace npf

#endif  // NPFORM_REPORT_HPP
