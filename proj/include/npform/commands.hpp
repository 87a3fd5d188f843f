// SPDX-License-Identifier: Apache-2.0
#ifndef NPFORM_COMMANDS_HPP
#define NPFORM_COMMANDS_HPP

// Batch runner behind the CLI and the C API: config text in, report out.
//
// Reports are JSON objects with the keys command, status, inputs, values,
// checks, slack, tolerance, pass and, where the command produces them, arrays.
// `slack` and `tolerance` belong to the check with the smallest margin
// slack + tolerance. The same config and seed give byte-identical output
// regardless of the worker count.

#include <cstdint>
#include <optional>
#include <string>

#include "npform/config.hpp"

namespace npf {

enum class ExitCode : int {
  Ok = 0,
  ConfigError = 1,
  ComputeError = 2,
  SuiteFailure = 3,
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  /// Overrides solver.grad_tol.
  std::optional<double> tol;
  /// Long-format CSV (kind,suite,check,key,index,value) instead of JSON.
  bool csv = false;
  /// Directory that relative file paths in the config resolve against.
  std::string base_dir;
};

struct RunOutcome {
  ExitCode exit_code = ExitCode::Ok;
  std::string report;
  /// Human-readable reason for a nonzero exit code.
  std::string message;
  /// The config's "output" key, when present and parsed.
  std::optional<std::string> output;
};

RunOutcome run_config(const std::string& config_text, const RunOptions& opts = {});

}  // namespace npf

#endif  // NPFORM_COMMANDS_HPP
