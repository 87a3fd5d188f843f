// SPDX-License-Identifier: Apache-2.0
// npform: run one JSON config and write its report.
//
// Exit codes: 0 success, 1 config error, 2 computation failure (including
// non-convergence and non-finite results), 3 failed property checks.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "npform.h"

namespace {

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlinear p-form toolkit: solve, capacity, caccioppoli, qr, metric, check"};
  std::string config_path, out_path;
  bool csv = false;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  double tol = 0.0;
  app.add_option("--config", config_path, "JSON run configuration")->required();
  auto* out_opt = app.add_option("--out", out_path, "Report path (default: config 'output' or stdout)");
  app.add_flag("--csv", csv, "Write the report as long-format CSV");
  app.add_option("--threads", threads, "Worker threads (default: available cores)");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for randomized checks");
  auto* tol_opt = app.add_option("--tol", tol, "Override solver.grad_tol")
                      ->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  std::string text;
  if (!read_file(config_path, text)) {
    std::cerr << "npform: cannot read config '" << config_path << "'\n";
    return 1;
  }
  npf_set_threads(threads);

  npf_run_options opts{};
  opts.has_seed = seed_opt->count() > 0;
  opts.seed = seed;
  opts.has_tol = tol_opt->count() > 0;
  opts.tol = tol;
  opts.csv = csv ? 1 : 0;
  const std::string base = std::filesystem::path(config_path).parent_path().string();
  opts.base_dir = base.c_str();

  npf_run* run = nullptr;
  if (npf_run_config(text.c_str(), &opts, &run) != NPF_OK) {
    std::cerr << "npform: " << npf_last_error() << "\n";
    return 2;
  }
  const int code = npf_run_exit_code(run);
  std::string dest = out_opt->count() ? out_path : "";
  if (dest.empty() && npf_run_output_path(run)) dest = npf_run_output_path(run);

  const char* report = npf_run_report(run);
  int status = code;
  if (dest.empty()) {
    std::fputs(report, stdout);
  } else {
    std::ofstream os(dest, std::ios::binary);
    os << report;
    if (!os) {
      std::cerr << "npform: cannot write report to '" << dest << "'\n";
      status = 1;
    }
  }
  if (code != 0) std::cerr << "npform: " << npf_run_message(run) << "\n";
  npf_run_destroy(run);
  return status;
}
