// SPDX-License-Identifier: Apache-2.0
#include "npform/report.hpp"

#include <algorithm>
#include <limits>

#include "npform/error.hpp"

namespace npf {

double CheckReport::value(const std::string& key) const {
  for (const auto& [k, v] : values)
    if (k == key) return v;
  throw Error(ErrorCode::InvalidArgument, "report has no value '" + key + "'");
}

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckReport& r) { return r.passed; });
}

double SuiteReport::worst_slack() const {
  double w = std::numeric_limits<double>::infinity();
  for (const auto& r : checks) w = std::min(w, r.slack);
  return w;
}

}  // namespace npf
