// SPDX-License-Identifier: Apache-2.0
#ifndef NPFORM_CONFIG_HPP
#define NPFORM_CONFIG_HPP

// Typed run configuration. A config is one JSON object:
//
//   {"command": "solve" | "capacity" | "caccioppoli" | "qr" | "metric" | "check",
//    "domain": {"dim": n, "extent": [[a, b], ...], "shape": [...],
//               "field": "identity" | "scalar:<v>" | "file:<path>",
//               "density": [per-cell weights]},
//    "p": ..., "eps": ..., "seed": ..., "output": "<path>",
//    "solver": {"method", "grad_tol", "max_iter", "armijo_c1", "backtrack",
//               "lbfgs_memory"},
//    <the block of the command>}
//
// Blocks: "solve" {boundary, pinned?, obstacle?, include_solution?},
// "condenser" {inner, outer?, vi_samples?}, "caccioppoli" {function, solve?,
// pinned?, variant?, ball, c?, stencil?, certify_rel?, alpha?, beta?},
// "mapping" {kind, ...} with optional "qr" {harmonicity, refine, min_order,
// log}, "metric" {source, stencil?, cutoff_r?, truncation?, include_distance?},
// "check" {suites?, trials?, sets?, e_sets?, f_sets?, d1d2?, alpha?, outer?}.
// Every object rejects keys it does not define.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "npform/grid.hpp"
#include "npform/intrinsic.hpp"
#include "npform/quasiregular.hpp"
#include "npform/solver.hpp"

namespace npf {

struct DomainSpec {
  std::vector<std::pair<double, double>> extent;
  std::vector<std::size_t> shape;
  /// "identity", "scalar:<v>" or "file:<path>".
  std::string field = "identity";
  /// Row-major per-cell matrices loaded from a field file.
  std::vector<double> field_matrices;
  std::vector<double> density;
};

/// Node-set primitive.
struct ShapeSpec {
  enum class Type { Interval, Disk, Rect, Nodes, OutsideDisk, DomainBoundary };
  Type type = Type::DomainBoundary;
  double lo = 0.0, hi = 0.0;  // interval
  Point lo_pt{}, hi_pt{};     // rect
  Point center{};
  double r = 0.0;
  std::vector<std::size_t> ids;
};

/// Nodal function given in closed form or as values.
struct FunctionSpec {
  enum class Type { Constant, Affine, RePower, LogModulus, Values };
  Type type = Type::Constant;
  double value = 0.0;        // constant; offset of affine
  std::vector<double> grad;  // affine
  int k = 2;                 // Re (z - center)^k
  Point center{};
  std::vector<std::size_t> shape;  // values
  std::vector<double> values;
};

struct BallSpec {
  Point center{};
  double r = 0.0;
  double R = 0.0;
};

struct SolveBlock {
  FunctionSpec boundary;
  std::optional<ShapeSpec> pinned;
  std::optional<FunctionSpec> obstacle;
  bool include_solution = true;
};

struct CondenserBlock {
  ShapeSpec inner;
  ShapeSpec outer;
  int vi_samples = 16;
};

struct CaccioppoliBlock {
  FunctionSpec function;
  bool solve = false;
  std::optional<ShapeSpec> pinned;
  std::string variant = "ball";  // "ball" | "euclidean"
  BallSpec ball;
  std::optional<double> c;
  CaccioppoliOptions options;
  std::optional<double> alpha;
  std::optional<double> beta;
};

struct QrBlock {
  MappingSpec mapping;
  bool harmonicity = true;
  HarmonicityOptions options;
};

struct MetricBlock {
  Point source{};
  Stencil stencil = Stencil::N16;
  std::optional<double> cutoff_r;
  std::optional<std::pair<double, double>> truncation;
  bool include_distance = false;
};

struct CheckBlock {
  std::vector<std::string> suites;
  int trials = 20;
  std::vector<ShapeSpec> sets;
  std::vector<ShapeSpec> e_sets;
  std::vector<ShapeSpec> f_sets;
  std::vector<ShapeSpec> d1d2;
  double alpha = 0.5;
  ShapeSpec outer;
};

struct RunConfig {
  std::string command;
  DomainSpec domain;
  std::optional<double> p;
  std::optional<double> eps;
  SolveOptions solver;
  std::uint64_t seed = 0;
  std::optional<std::string> output;

  std::optional<SolveBlock> solve;
  std::optional<CondenserBlock> condenser;
  std::optional<CaccioppoliBlock> caccioppoli;
  std::optional<QrBlock> qr;
  std::optional<MetricBlock> metric;
  std::optional<CheckBlock> check;

  /// Canonical JSON of the validated input, echoed into reports.
  std::string canonical;
};

/// The property suites known to the check command, in run order.
const std::vector<std::string>& check_suite_names();

/// Parses and schema-validates a config. Relative file paths resolve against
/// `base_dir`. Throws Error(ErrorCode::Config) naming the offending key.
RunConfig parse_run_config(const std::string& text, const std::string& base_dir = "");

/// Materializes the domain and its coefficient field.
StructurePtr build_structure(const DomainSpec& spec);

Mask build_mask(const ShapeSpec& s, const GridDomain& d);
GridFunction build_function(const FunctionSpec& f, const GridDomain& d);

}  // namespace npf

#endif  // NPFORM_CONFIG_HPP
