// SPDX-License-Identifier: Apache-2.0
#ifndef NPFORM_INTRINSIC_HPP
#define NPFORM_INTRINSIC_HPP

// The intrinsic metric rho(x, y) = sup{u(x) - u(y) : Gamma(u) <= 1}, its
// balls and cutoffs, and numerical checks of the Caccioppoli inequalities.
//
// rho is a shortest-path distance on a grid graph whose edges join a node to
// every primitive lattice offset o with |o|_inf <= 1 (Stencil::N8) or
// |o|_inf <= 2 (Stencil::N16). An edge costs sqrt(e^T (2G)^{-1} e) for its
// physical displacement e, maximized over the cells touched by the segment.
// Graph distances overestimate the continuum Finsler distance by at most the
// stencil's metrication constant.

#include <optional>
#include <string>
#include <vector>

#include "npform/grid.hpp"
#include "npform/pform.hpp"
#include "npform/report.hpp"

namespace npf {

enum class Stencil { N8, N16 };

const char* stencil_name(Stencil s);
Stencil parse_stencil(const std::string& name);

/// Primitive lattice offsets of the stencil in dimension `dim`.
std::vector<std::array<int, 3>> stencil_offsets(Stencil s, std::size_t dim);

/// Relative overestimation bound of graph distances against the continuum
/// distance. Exact for 1-D and 2-D (largest angular gap between stencil
/// directions in the metric of each cell); in 3-D an isotropic estimate from
/// a reference grid.
double metrication_constant(Stencil st, const GridStructure& s);

/// sqrt(max per-cell Gamma) - 1 for graph distances from a source on a
/// reference lattice with G = I and the spacings of `d`. Cell gradients
/// average edge differences from both sides of a stencil cone boundary, so
/// this exceeds the path constant: cutoffs obey Gamma <= (1 + this)^2.
double cell_metrication_constant(Stencil st, const GridDomain& d);

struct MetricField {
  std::size_t source = 0;
  Stencil stencil = Stencil::N16;
  std::vector<double> distance;
  double metrication = 0.0;
  double cell_metrication = 0.0;

  double operator[](std::size_t j) const { return distance[j]; }
  /// Nodes with rho < r.
  Mask ball(double r) const;
  /// Cells whose center, taken as the mean corner distance, lies in {rho < r}.
  Mask ball_cells(const GridDomain& d, double r) const;
};

MetricField intrinsic_distance(std::size_t x0, const GridStructure& s,
                               Stencil st = Stencil::N16);
/// Independent sources are computed concurrently; output order follows input.
std::vector<MetricField> intrinsic_distances(const std::vector<std::size_t>& sources,
                                             const GridStructure& s,
                                             Stencil st = Stencil::N16);

/// (r - rho(x0, .)) v 0.
GridFunction cutoff_rho(std::size_t x0, double r, const GridStructure& s,
                        Stencil st = Stencil::N16);
GridFunction cutoff_rho(const MetricField& rho, double r, const GridDomain& d);

/// phi = ((R - rho)_+ ^ (R - r)) / (R - r): 1 on B_r, 0 off B_R.
GridFunction truncation_function(std::size_t x0, double r, double R,
                                 const GridStructure& s, Stencil st = Stencil::N16);
GridFunction truncation_function(const MetricField& rho, double r, double R,
                                 const GridDomain& d);

/// Euclidean bump clamp((R - |x - x0|) / (R - r), 0, 1).
GridFunction euclidean_bump(const GridDomain& d, const Point& x0, double r, double R);

/// Largest per-cell Gamma(u).
double max_cell_gamma(const GridFunction& u, const GridStructure& s);

struct CaccioppoliOptions {
  /// u counts as harmonic on supp phi when its node-measure-normalized
  /// residual there is at most certify_rel * max Gamma(u)^{(p-1)/2} / h.
  double certify_rel = 1e-2;
  Stencil stencil = Stencil::N16;
};

/// (sum phi^p Gamma(u)^{p/2} m)^{1/p} <= p (sum Gamma(phi)^{p/2} |u - c|^p m)^{1/p}
/// with cell means of u and phi. c defaults to the m-weighted mean of u over
/// the cells touching supp phi. Throws Precondition when u is not harmonic
/// on supp phi.
CheckReport check_caccioppoli(const GridFunction& u, const GridFunction& phi,
                              std::optional<double> c, const PFormContext& ctx,
                              const CaccioppoliOptions& opts = {});

/// Ball form on intrinsic balls about x0 with constant p / (R - r).
CheckReport check_caccioppoli_ball(const GridFunction& u, std::size_t x0, double r,
                                   double R, std::optional<double> c,
                                   const PFormContext& ctx,
                                   const CaccioppoliOptions& opts = {});

/// Euclidean form with constant p sqrt(beta / alpha); every G(c) must have
/// its spectrum inside [alpha, beta].
CheckReport check_caccioppoli_euclidean(const GridFunction& u, const GridFunction& phi,
                                        std::optional<double> c, double alpha,
                                        double beta, const PFormContext& ctx,
                                        const CaccioppoliOptions& opts = {});

}  // namespace npf

#endif  // NPFORM_INTRINSIC_HPP
