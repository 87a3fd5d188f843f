// SPDX-License-Identifier: Apache-2.0
#ifndef NPFORM_QUASIREGULAR_HPP
#define NPFORM_QUASIREGULAR_HPP

// Mappings f: Omega -> R^n on a grid: differential, Jacobian, outer and inner
// dilatations, the unit-determinant matrix theta_f = J^{2/n} Df^{-1} Df^{-T},
// the Dirichlet structure it induces, and harmonicity of the components of f
// and of ln|f| for that structure with p = n.

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "npform/grid.hpp"
#include "npform/pform.hpp"
#include "npform/report.hpp"

namespace npf {

struct MappingSpec {
  enum class Kind { Power, Radial, Linear, Sampled };
  Kind kind = Kind::Linear;
  /// z^k, n = 2.
  int power = 2;
  /// |x|^{a-1} x, a > 0.
  double stretch = 1.0;
  /// Row-major n x n matrix for Kind::Linear.
  std::vector<double> matrix;
  /// n values per node, node-major, for Kind::Sampled.
  std::vector<double> samples;
  /// The analysis region is the annulus inner < |x| < outer about the origin,
  /// judged at cell centers. Radial maps default inner to 0.1 * outer.
  double inner_radius = 0.0;
  double outer_radius = std::numeric_limits<double>::infinity();

  static MappingSpec make_power(int k);
  static MappingSpec make_radial(double a);
  static MappingSpec make_linear(std::vector<double> a);
  static MappingSpec make_sampled(std::vector<double> values);

  void validate(const GridDomain& d) const;
  /// Effective radii on `d` after defaults.
  std::pair<double, double> radii(const GridDomain& d) const;
};

const char* mapping_kind_name(MappingSpec::Kind k);
MappingSpec::Kind parse_mapping_kind(const std::string& name);

/// f at a point (analytic kinds only).
std::vector<double> evaluate_mapping(const MappingSpec& f, const Point& x, std::size_t n);
/// Component f^i sampled on the nodes.
std::vector<GridFunction> mapping_components(const MappingSpec& f, const GridDomain& d);

struct QrAnalysis {
  std::size_t n = 0;
  /// Row-major Df per cell.
  std::vector<double> df;
  std::vector<double> jacobian;
  /// Descending singular values, n per cell.
  std::vector<double> singular;
  /// Cell center inside the analysis region.
  Mask in_region;
  /// In the region with J_f <= 0; excluded from the dilatations.
  Mask degenerate;
  double degenerate_measure = 0.0;
  double k_outer = 1.0;
  double k_inner = 1.0;
  std::size_t k_outer_cell = 0;
  std::size_t k_inner_cell = 0;
  /// theta_f on analyzed cells, I elsewhere.
  std::vector<double> theta;
  double alpha = 1.0;  // K_O^{-2/n}
  double beta = 1.0;   // K_I^{2/n}

  std::span<const double> df_at(std::size_t c) const { return {df.data() + c * n * n, n * n}; }
  std::span<const double> theta_at(std::size_t c) const {
    return {theta.data() + c * n * n, n * n};
  }
  bool analyzed(std::size_t c) const { return in_region[c] && !degenerate[c]; }
};

/// Df per cell: closed form at cell centers for analytic kinds, averaged
/// forward differences of each component for sampled data.
std::vector<double> differentiate(const MappingSpec& f, const GridDomain& d);

/// Full per-cell analysis. Throws when no region cell has J_f > 0.
QrAnalysis analyze_mapping(const MappingSpec& f, const GridDomain& d);

CoefficientField theta_field(const QrAnalysis& a);
/// Structure with G = theta_f and the recorded ellipticity bounds.
StructurePtr induced_structure(const QrAnalysis& a, const GridDomain& d);
/// The induced structure with p = n.
PFormContext induced_context(const QrAnalysis& a, const GridDomain& d);

/// A(x, xi) = (G xi, xi)^{(p-2)/2} G xi with G the given symmetric matrix.
std::vector<double> a_operator(std::span<const double> g, std::span<const double> xi,
                               double p);
std::vector<double> a_operator(const QrAnalysis& a, std::size_t cell,
                               std::span<const double> xi, double p);

/// Per-cell invariants: det theta = 1, the ellipticity sandwich, J = prod sigma,
/// and ||Df||^n <= K_O J, J <= K_I l(Df)^n with equality at the arg-max cells.
SuiteReport check_qr_invariants(const QrAnalysis& a, const GridDomain& d);

struct HarmonicityOptions {
  std::size_t refine = 2;
  double min_order = 1.0;
  bool include_log = true;
  /// Residuals below this fraction of max Gamma^{(p-1)/2} / h count as roundoff.
  double roundoff = 1e-10;
};

/// Residual of each component (and ln|f|) on region nodes for the induced
/// structure on `d` and on d refined, with the observed order. Sampled
/// mappings cannot be refined and report one resolution.
SuiteReport verify_component_harmonicity(const MappingSpec& f, const GridDomain& d,
                                         const HarmonicityOptions& opts = {});

/// Interior nodes all of whose cells lie in the analysis region.
Mask region_nodes(const QrAnalysis& a, const GridDomain& d);

}  // namespace npf

#endif  // NPFORM_QUASIREGULAR_HPP
