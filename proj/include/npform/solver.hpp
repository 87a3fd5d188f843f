// SPDX-License-Identifier: Apache-2.0
#ifndef NPFORM_SOLVER_HPP
#define NPFORM_SOLVER_HPP

#include <optional>
#include <string>
#include <vector>

#include "npform/error.hpp"
#include "npform/grid.hpp"
#include "npform/pform.hpp"

namespace npf {

struct SolveOptions {
  enum class Method { NewtonRegularized, Lbfgs, GradientArmijo };

  Method method = Method::NewtonRegularized;
  /// Absolute sup-norm of the free L_p coefficients at which a solve stops.
  double grad_tol = 1e-10;
  int max_iter = 200;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  int lbfgs_memory = 10;
  /// Starting point; the p = 2 solution with the same data when absent.
  std::optional<GridFunction> initial_guess;

  void validate() const;
};

const char* method_name(SolveOptions::Method m);
SolveOptions::Method parse_method(const std::string& name);

struct SolveResult {
  GridFunction solution;
  double residual_norm = 0.0;
  int iterations = 0;
  std::vector<double> energy_trace;
  bool converged = false;
  std::string method;
  /// Obstacle solves: max over free nodes of |coefficient * (u - obstacle)|.
  double complementarity = 0.0;
  std::size_t active_nodes = 0;
};

/// Non-convergence; carries the last iterate and its trace.
class SolveError : public Error {
 public:
  SolveError(const std::string& msg, SolveResult partial)
      : Error(ErrorCode::NonConvergence, msg), partial_(std::move(partial)) {}
  const SolveResult& partial() const { return partial_; }

 private:
  SolveResult partial_;
};

/// Minimizes J_p with u pinned to `boundary` on its mask.
SolveResult solve_dirichlet(const PFormContext& ctx, const GridFunction& boundary,
                            const SolveOptions& opts = {});

/// Minimizes J_p over {u >= obstacle on free nodes, u = boundary on the mask}.
/// Obstacle values of -inf mark unconstrained nodes.
SolveResult solve_obstacle(const PFormContext& ctx, const GridFunction& obstacle,
                           const GridFunction& boundary,
                           const SolveOptions& opts = {});

/// Sup-norm of E^p(u, phi_j) over nodes j with region[j] set.
double harmonicity_residual(const GridFunction& u, const Mask& region,
                            const PFormContext& ctx);

/// Same as harmonicity_residual with each coefficient divided by the lumped
/// node measure, which removes the h^n scaling of the nodal test functions.
double normalized_harmonicity_residual(const GridFunction& u, const Mask& region,
                                       const PFormContext& ctx);

}  // namespace npf

#endif  // NPFORM_SOLVER_HPP
