// SPDX-License-Identifier: Apache-2.0
#ifndef NPFORM_PFORM_HPP
#define NPFORM_PFORM_HPP

// The nonlinear p-form
//
//   E^p(u, v) = sum_c (Gamma(u)(c) + eps)^{(p-2)/2} Gamma(u, v)(c) m(c),
//
// its potential J_p(u) = (1/p) sum_c [(Gamma(u) + eps)^{p/2} - eps^{p/2}] m and
// the operator L_p, represented as the exact algebraic gradient of J_p so that
// <L_p u, v> = E^p(u, v) holds identically. Throughout, the pairing of L_p w
// with an arbitrary nodal z is E^p(w, z); Functional restricts it to the nodes
// that are not Dirichlet-masked.

#include <Eigen/SparseCore>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "npform/grid.hpp"
#include "npform/report.hpp"

namespace npf {

struct PFormContext {
  StructurePtr structure;
  double p = 2.0;
  /// Added to Gamma(u) before the exponent (p-2)/2; required > 0 when p < 2.
  double eps = 0.0;

  /// Validates p > 1 and eps; eps defaults to 0 for p >= 2 and 1e-12 below.
  static PFormContext make(StructurePtr s, double p,
                           std::optional<double> eps = std::nullopt);

  const GridDomain& domain() const { return structure->domain(); }
  bool regularized() const { return eps > 0.0; }
};

/// v -> <F, v> against nodal test functions; masked nodes are excluded.
struct Functional {
  std::vector<double> coeffs;
  Mask excluded;

  double pair(const GridFunction& v) const;
  /// Max |coefficient| over the nodes that are not excluded.
  double sup_norm() const;
};

/// Per-cell weights (Gamma(u) + eps)^{(p-2)/2}.
std::vector<double> cell_weights(const GridFunction& u, const PFormContext& ctx);

double p_form(const GridFunction& u, const GridFunction& v,
              const PFormContext& ctx);
double p_energy(const GridFunction& u, const PFormContext& ctx);

/// E^p(u, phi_j) for every node j (no masking).
std::vector<double> lp_coefficients(const GridFunction& u,
                                    const PFormContext& ctx);
/// L_p u restricted to the nodes u does not mask.
Functional apply_Lp(const GridFunction& u, const PFormContext& ctx);

/// Hessian of J_p at u over all nodes.
Eigen::SparseMatrix<double> p_hessian(const GridFunction& u,
                                      const PFormContext& ctx);

/// Matrix of the bilinear form (u, v) -> sum_c Gamma(u, v)(c) m(c) = 2 E(u, v).
Eigen::SparseMatrix<double> gamma_matrix(const GridStructure& s);

/// Per-cell value of
///   Gamma(u)^{(p-2)/2} Gamma(u, u-v) - Gamma(v)^{(p-2)/2} Gamma(v, u-v).
std::vector<double> monotonicity_density(const GridFunction& u,
                                         const GridFunction& v,
                                         const PFormContext& ctx);

CheckReport check_homogeneity(const GridFunction& u, const GridFunction& v,
                              double t, const PFormContext& ctx);
CheckReport check_sector(const GridFunction& u, const GridFunction& v,
                         const PFormContext& ctx);
CheckReport check_monotone(const GridFunction& u, const GridFunction& v,
                           const PFormContext& ctx);

/// ||u||_{D_p}^p <= (1 + (sqrt(k) p / 2)^p) <L_p u, u> on every sample.
CheckReport check_coercive(const PFormContext& ctx, double k,
                           std::span<const GridFunction> samples);

/// Largest k with ||u||_2^2 <= k * sum_c Gamma(u)(c) m(c) over functions that
/// vanish on `mask`; L^2 uses the lumped nodal measure. Inverse power
/// iteration on the assembled quadratic form.
double estimate_poincare(const GridStructure& s, const Mask& mask);

/// Refinement check of t -> <L_p(v + t(u - v)), u - v> on [0, 1].
CheckReport check_hemicontinuous(const GridFunction& u, const GridFunction& v,
                                 const PFormContext& ctx, int samples);

struct Contraction {
  enum class Kind { Unit, Truncation, NegativePart, Smooth };

  Kind kind = Kind::Unit;
  double alpha = 1.0;
  std::string name = "unit";
  std::function<double(double)> map;
  std::function<double(double)> derivative;

  static Contraction unit();
  /// T_alpha(u) = u+ ^ alpha.
  static Contraction truncation(double alpha);
  /// T_-(u) = u ^ 0.
  static Contraction negative_part();
  /// C^1 map with |T'| <= 1 and T(0) = 0; validated by sampling.
  static Contraction smooth(std::string name, std::function<double(double)> t,
                            std::function<double(double)> dt);

  GridFunction apply(const GridFunction& u) const;
};

/// Threshold contractions: <L_p(v + Tu) - L_p v, u - Tu> >= -tol.
/// Smooth contractions: <L_p(u + Tu + v) - L_p v, u - Tu> >= -tol.
/// tol is 1e-12 of the integrand's absolute mass when the pairing is exact
/// (every cell level-set aligned; smooth maps in 1-D), otherwise h times it.
CheckReport check_contraction_operates(const GridFunction& u,
                                       const GridFunction& v,
                                       const PFormContext& ctx,
                                       const Contraction& t);

/// First unmasked node j with <L_p u, phi_j> < -1e-10 ||L_p u||_inf, if any.
std::optional<std::size_t> pure_potential_violation(const GridFunction& u,
                                                    const PFormContext& ctx);

/// D1: <L_p(u ^ v), u - u ^ v> >= -tol and
/// D2: <L_p(u ^ (v + alpha)), u - u ^ (v + alpha)> >= -tol
/// for pure potentials u, v (checked first; throws Precondition otherwise).
SuiteReport check_D1_D2(const GridFunction& u, const GridFunction& v,
                        double alpha, const PFormContext& ctx);

}  // namespace npf

#endif  // NPFORM_PFORM_HPP
