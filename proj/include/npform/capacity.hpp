// SPDX-License-Identifier: Apache-2.0
#ifndef NPFORM_CAPACITY_HPP
#define NPFORM_CAPACITY_HPP

// Condenser p-capacity. A condenser pairs a node set K with an outer mask on
// which admissible functions vanish; the equilibrium potential e_K is 1 on K,
// 0 on the outer mask and p-harmonic in between, and cap_p(K) = <L_p e_K, e_K>.

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "npform/grid.hpp"
#include "npform/pform.hpp"
#include "npform/report.hpp"
#include "npform/solver.hpp"

namespace npf {

struct Condenser {
  Mask inner;
  Mask outer;

  /// Nonempty K, nonempty outer mask, K disjoint from it, and every component
  /// of the remaining nodes coupled to K through shared cells.
  void validate(const GridDomain& d) const;
};

struct CapacityOptions {
  SolveOptions solve;
  /// Number of sampled w in W(K) for the variational-inequality certificate.
  int vi_samples = 16;
  std::uint64_t seed = 0;
};

struct CapacityResult {
  double value = 0.0;
  /// Equilibrium potential; its mask is the outer set.
  GridFunction potential;
  /// max over sampled w of max(0, -<L_p e_K, w - e_K>) / ||w - e_K||_1.
  double vi_residual = 0.0;
  /// sum_c Gamma(e_K)^{p/2} m, which equals `value` when eps = 0.
  double energy_value = 0.0;
  double potential_min = 0.0;
  double potential_max = 0.0;
  int iterations = 0;
  double residual_norm = 0.0;
  std::size_t inner_nodes = 0;
};

CapacityResult capacity(const Condenser& c, const PFormContext& ctx,
                        const CapacityOptions& opts = {});

struct OpenCapacity {
  double value = 0.0;
  /// The compact attaining the supremum (U itself on a finite grid).
  Mask attaining;
};

OpenCapacity capacity_of_open(const Mask& u, const Mask& outer,
                              const PFormContext& ctx,
                              const CapacityOptions& opts = {});

/// Memoized capacities of node sets against one outer mask. The empty set
/// has capacity 0. Thread-safe; distinct sets may be solved concurrently.
class CapacityCache {
 public:
  CapacityCache(const PFormContext& ctx, Mask outer, CapacityOptions opts = {});

  double get(const Mask& k);
  /// Solves all uncached sets in parallel; results are stored by set.
  void prefetch(const std::vector<Mask>& sets);
  std::size_t solves() const { return solves_; }
  const Mask& outer() const { return outer_; }

 private:
  static std::string key(const Mask& k);
  double solve(const Mask& k) const;

  const PFormContext& ctx_;
  Mask outer_;
  CapacityOptions opts_;
  std::map<std::string, double> values_;
  std::mutex mutex_;
  std::size_t solves_ = 0;
};

/// Choquet-capacity properties over a family of node sets sharing `outer`:
/// strong subadditivity and monotonicity for every pair, decreasing and
/// increasing chains, finite subadditivity of the union, positivity.
/// Tolerance: 1e-9 * max(1, scale) in 1-D; max(1e-9 * scale, h * scale) above.
SuiteReport check_choquet(const std::vector<Mask>& sets, const Mask& outer,
                          const PFormContext& ctx, const CapacityOptions& opts = {});

/// cap(U E_i) - cap(U F_i) <= sum_i (cap(E_i) - cap(F_i)) + k * tol.
CheckReport check_lemma_312(const std::vector<Mask>& e_sets,
                            const std::vector<Mask>& f_sets, const Mask& outer,
                            const PFormContext& ctx, const CapacityOptions& opts = {});

/// Every coefficient of L_p u off the mask of u is >= -1e-10 ||L_p u||_inf.
bool is_pure_potential(const GridFunction& u, const PFormContext& ctx);

// Node-set primitives.
Mask interval_nodes(const GridDomain& d, double lo, double hi);
Mask rect_nodes(const GridDomain& d, const Point& lo, const Point& hi);
Mask disk_nodes(const GridDomain& d, const Point& center, double r);
/// Nodes with |x - center| >= r, together with the domain boundary.
Mask outside_disk_nodes(const GridDomain& d, const Point& center, double r);
Mask nodes_from_list(const GridDomain& d, const std::vector<std::size_t>& ids);

Mask mask_union(const Mask& a, const Mask& b);
Mask mask_intersection(const Mask& a, const Mask& b);
bool mask_subset(const Mask& a, const Mask& b);
bool mask_empty(const Mask& a);
std::size_t mask_count(const Mask& a);
/// Nodes within `steps` shared-cell hops of `a`, excluding `forbidden`.
Mask dilate(const GridDomain& d, const Mask& a, int steps, const Mask& forbidden);

}  // namespace npf

#endif  // NPFORM_CAPACITY_HPP
