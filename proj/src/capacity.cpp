// SPDX-License-Identifier: Apache-2.0
#include "npform/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <deque>
#include <limits>
#include <random>

#include "npform/error.hpp"
#include "npform/parallel.hpp"

namespace npf {

namespace {

// Calls fn(k) for every node k sharing a cell with j (k != j).
template <class Fn>
void for_each_cell_neighbour(const GridDomain& d, std::size_t j, Fn&& fn) {
  const auto m = d.node_multi(j);
  const std::size_t n = d.dim();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= 3;
  for (std::size_t code = 0; code < combos; ++code) {
    std::array<std::size_t, 3> q = m;
    std::size_t rest = code;
    bool ok = true, self = true;
    for (std::size_t i = 0; i < n; ++i) {
      const int off = int(rest % 3) - 1;
      rest /= 3;
      if (off != 0) self = false;
      const long long v = (long long)m[i] + off;
      if (v < 0 || v >= (long long)d.shape()[i]) {
        ok = false;
        break;
      }
      q[i] = std::size_t(v);
    }
    if (ok && !self) fn(d.node_index(q));
  }
}

double tolerance_for(const GridDomain& d, double scale) {
  scale = std::abs(scale);
  if (d.dim() == 1) return 1e-9 * std::max(1.0, scale);
  return std::max(1e-9 * scale, d.max_spacing() * scale);
}

CheckReport report(const std::string& name, const PFormContext& ctx, double lhs,
                   double rhs, double tol) {
  CheckReport r;
  r.check = name;
  r.p = ctx.p;
  r.grid = ctx.domain().shape();
  r.set(lhs, rhs, rhs - lhs, tol);
  if (ctx.domain().dim() > 1) r.notes.push_back("tolerance C*h");
  return r;
}

void require_shape(const Mask& m, const GridDomain& d, const char* what) {
  require(m.size() == d.node_count(), ErrorCode::ShapeMismatch,
          std::string(what) + ": mask length does not match node count");
}

}  // namespace

void Condenser::validate(const GridDomain& d) const {
  require_shape(inner, d, "condenser inner set");
  require_shape(outer, d, "condenser outer set");
  require(!mask_empty(inner), ErrorCode::Precondition, "condenser inner set K is empty");
  require(!mask_empty(outer), ErrorCode::Precondition,
          "condenser outer set is empty; capacity needs a vanishing boundary");
  for (std::size_t j = 0; j < inner.size(); ++j)
    if (inner[j] && outer[j])
      throw Error(ErrorCode::Precondition,
                  "condenser inner set meets the outer set at node " + std::to_string(j));
  // Every free component must touch K.
  std::vector<std::uint8_t> seen(d.node_count(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t j = 0; j < inner.size(); ++j)
    if (inner[j]) {
      seen[j] = 1;
      queue.push_back(j);
    }
  while (!queue.empty()) {
    const std::size_t j = queue.front();
    queue.pop_front();
    for_each_cell_neighbour(d, j, [&](std::size_t k) {
      if (!seen[k] && !outer[k]) {
        seen[k] = 1;
        queue.push_back(k);
      }
    });
  }
  for (std::size_t j = 0; j < d.node_count(); ++j)
    if (!seen[j] && !outer[j])
      throw Error(ErrorCode::Precondition,
                  "condenser region is disconnected from K at node " + std::to_string(j));
}

CapacityResult capacity(const Condenser& c, const PFormContext& ctx,
                        const CapacityOptions& opts) {
  const auto& d = ctx.domain();
  c.validate(d);
  require(opts.vi_samples >= 0, ErrorCode::InvalidArgument, "vi_samples must be >= 0");

  GridFunction b(d);
  Mask pinned(d.node_count(), 0);
  for (std::size_t j = 0; j < d.node_count(); ++j) {
    if (c.inner[j]) b[j] = 1.0;
    pinned[j] = c.inner[j] || c.outer[j];
  }
  const SolveResult sol = solve_dirichlet(ctx, b.with_mask(pinned), opts.solve);

  CapacityResult r;
  r.potential = sol.solution.with_mask(c.outer);
  r.iterations = sol.iterations;
  r.residual_norm = sol.residual_norm;
  r.inner_nodes = mask_count(c.inner);
  r.value = p_form(r.potential, r.potential, ctx);
  {
    const auto g = carre_du_champ(r.potential, r.potential, *ctx.structure);
    CompensatedSum s;
    for (std::size_t cell = 0; cell < g.size(); ++cell)
      s.add(std::pow(std::max(g[cell], 0.0), 0.5 * ctx.p) * d.cell_measure(cell));
    r.energy_value = s.value();
  }
  const auto& vals = r.potential.values();
  r.potential_min = *std::min_element(vals.begin(), vals.end());
  r.potential_max = *std::max_element(vals.begin(), vals.end());

  // Certificate for the inequality-constrained problem over W(K).
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int s = 0; s < opts.vi_samples; ++s) {
    GridFunction w(r.potential);
    for (std::size_t j = 0; j < d.node_count(); ++j) {
      if (c.outer[j]) {
        w[j] = 0.0;
      } else if (s % 2 == 0) {
        w[j] = c.inner[j] ? vals[j] + 0.5 * u01(rng) : vals[j] + u01(rng) - 0.5;
      } else {
        const double t = c.inner[j] ? 1.0 + 0.5 * u01(rng) : 1.5 * u01(rng);
        w[j] = std::max(vals[j], t);
      }
    }
    const GridFunction diff = w - r.potential;
    double l1 = 0.0;
    for (double x : diff.values()) l1 += std::abs(x);
    if (l1 == 0.0) continue;
    const double pair = p_form(r.potential, diff, ctx);
    r.vi_residual = std::max(r.vi_residual, std::max(0.0, -pair) / l1);
  }
  return r;
}

OpenCapacity capacity_of_open(const Mask& u, const Mask& outer, const PFormContext& ctx,
                              const CapacityOptions& opts) {
  OpenCapacity r;
  r.attaining = u;
  r.value = capacity(Condenser{u, outer}, ctx, opts).value;
  return r;
}

CapacityCache::CapacityCache(const PFormContext& ctx, Mask outer, CapacityOptions opts)
    : ctx_(ctx), outer_(std::move(outer)), opts_(std::move(opts)) {
  require_shape(outer_, ctx_.domain(), "capacity cache outer set");
}

std::string CapacityCache::key(const Mask& k) {
  std::string s(k.size(), '0');
  for (std::size_t i = 0; i < k.size(); ++i) s[i] = k[i] ? '1' : '0';
  return s;
}

double CapacityCache::solve(const Mask& k) const {
  if (mask_empty(k)) return 0.0;
  return capacity(Condenser{k, outer_}, ctx_, opts_).value;
}

double CapacityCache::get(const Mask& k) {
  require_shape(k, ctx_.domain(), "capacity set");
  const std::string id = key(k);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = values_.find(id); it != values_.end()) return it->second;
  }
  const double v = solve(k);
  std::lock_guard<std::mutex> lock(mutex_);
  if (!mask_empty(k)) ++solves_;
  values_.emplace(id, v);
  return v;
}

void CapacityCache::prefetch(const std::vector<Mask>& sets) {
  std::vector<const Mask*> todo;
  std::vector<std::string> ids;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    for (const auto& s : sets) {
      require_shape(s, ctx_.domain(), "capacity set");
      std::string id = key(s);
      if (values_.count(id) || std::find(ids.begin(), ids.end(), id) != ids.end()) continue;
      ids.push_back(std::move(id));
      todo.push_back(&s);
    }
  }
  std::vector<double> out(todo.size());
  parallel_for(todo.size(), [&](std::size_t i) { out[i] = solve(*todo[i]); });
  std::lock_guard<std::mutex> lock(mutex_);
  for (std::size_t i = 0; i < todo.size(); ++i) {
    if (!mask_empty(*todo[i])) ++solves_;
    values_.emplace(ids[i], out[i]);
  }
}

SuiteReport check_choquet(const std::vector<Mask>& sets, const Mask& outer,
                          const PFormContext& ctx, const CapacityOptions& opts) {
  const auto& d = ctx.domain();
  require(!sets.empty(), ErrorCode::InvalidArgument, "choquet suite needs at least one set");
  for (std::size_t i = 0; i < sets.size(); ++i) {
    require_shape(sets[i], d, "choquet set");
    require(!mask_empty(sets[i]), ErrorCode::InvalidArgument,
            "choquet set " + std::to_string(i) + " is empty");
    require(mask_empty(mask_intersection(sets[i], outer)), ErrorCode::Precondition,
            "choquet set " + std::to_string(i) + " meets the outer set");
  }
  CapacityCache cache(ctx, outer, opts);
  const std::size_t m = sets.size();

  // Every set that appears below, solved up front in parallel.
  constexpr int kChain = 2;
  std::vector<Mask> needed(sets.begin(), sets.end());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      needed.push_back(mask_union(sets[i], sets[j]));
      needed.push_back(mask_intersection(sets[i], sets[j]));
    }
  std::vector<std::vector<Mask>> chains(m);
  for (std::size_t i = 0; i < m; ++i)
    for (int r = kChain; r >= 0; --r) {
      chains[i].push_back(dilate(d, sets[i], r, outer));
      needed.push_back(chains[i].back());
    }
  std::vector<Mask> growing;
  Mask acc(d.node_count(), 0);
  for (const auto& s : sets) {
    acc = mask_union(acc, s);
    growing.push_back(acc);
    needed.push_back(acc);
  }
  cache.prefetch(needed);

  SuiteReport suite{"choquet", {}};
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const double lhs = cache.get(mask_union(sets[i], sets[j])) +
                         cache.get(mask_intersection(sets[i], sets[j]));
      const double rhs = cache.get(sets[i]) + cache.get(sets[j]);
      auto r = report("strong_subadditivity", ctx, lhs, rhs, tolerance_for(d, rhs));
      r.add("i", double(i));
      r.add("j", double(j));
      if (!r.passed) r.witness = "sets " + std::to_string(i) + "," + std::to_string(j);
      suite.checks.push_back(std::move(r));
    }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j || !mask_subset(sets[i], sets[j])) continue;
      const double a = cache.get(sets[i]), b = cache.get(sets[j]);
      auto r = report("monotonicity", ctx, a, b, tolerance_for(d, b));
      r.add("i", double(i));
      r.add("j", double(j));
      if (!r.passed) r.witness = "sets " + std::to_string(i) + " within " + std::to_string(j);
      suite.checks.push_back(std::move(r));
    }
  for (std::size_t i = 0; i < m; ++i) {
    // Decreasing compacts: cap along the chain is nonincreasing and reaches
    // cap of the intersection, which is the last member.
    const auto& ch = chains[i];
    double worst = std::numeric_limits<double>::infinity();
    double scale = 0.0;
    for (std::size_t k = 0; k < ch.size(); ++k) {
      scale = std::max(scale, cache.get(ch[k]));
      if (k > 0) worst = std::min(worst, cache.get(ch[k - 1]) - cache.get(ch[k]));
    }
    Mask inter = ch.front();
    for (const auto& s : ch) inter = mask_intersection(inter, s);
    const double limit = cache.get(ch.back());
    const double target = cache.get(inter);
    worst = std::min(worst, -std::abs(limit - target));
    auto r = report("decreasing_compacts", ctx, limit, target, tolerance_for(d, scale));
    r.set(limit, target, worst, tolerance_for(d, scale));
    r.add("i", double(i));
    r.add("chain_length", double(ch.size()));
    suite.checks.push_back(std::move(r));
  }
  {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < growing.size(); ++k)
      worst = std::min(worst, cache.get(growing[k]) - cache.get(growing[k - 1]));
    if (growing.size() < 2) worst = 0.0;
    const double top = cache.get(growing.back());
    auto r = report("increasing_sets", ctx, cache.get(growing.front()), top,
                    tolerance_for(d, top));
    r.set(r.lhs, top, worst, tolerance_for(d, top));
    suite.checks.push_back(std::move(r));
  }
  {
    double sum = 0.0;
    for (const auto& s : sets) sum += cache.get(s);
    const double top = cache.get(growing.back());
    suite.checks.push_back(
        report("finite_subadditivity", ctx, top, sum, tolerance_for(d, sum)));
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double v = cache.get(sets[i]);
    auto r = report("positivity", ctx, 0.0, v, 0.0);
    r.passed = v > 0.0;
    r.add("i", double(i));
    suite.checks.push_back(std::move(r));
  }
  for (auto& r : suite.checks) r.add("solves", double(cache.solves()));
  return suite;
}

CheckReport check_lemma_312(const std::vector<Mask>& e_sets, const std::vector<Mask>& f_sets,
                            const Mask& outer, const PFormContext& ctx,
                            const CapacityOptions& opts) {
  const auto& d = ctx.domain();
  require(e_sets.size() == f_sets.size() && !e_sets.empty(), ErrorCode::InvalidArgument,
          "lemma check needs equally many nonempty E and F families");
  for (std::size_t i = 0; i < e_sets.size(); ++i) {
    require_shape(e_sets[i], d, "E set");
    require_shape(f_sets[i], d, "F set");
    require(mask_subset(f_sets[i], e_sets[i]), ErrorCode::Precondition,
            "F_" + std::to_string(i) + " is not contained in E_" + std::to_string(i));
  }
  CapacityCache cache(ctx, outer, opts);
  Mask ue(d.node_count(), 0), uf(d.node_count(), 0);
  std::vector<Mask> needed;
  for (std::size_t i = 0; i < e_sets.size(); ++i) {
    ue = mask_union(ue, e_sets[i]);
    uf = mask_union(uf, f_sets[i]);
    needed.push_back(e_sets[i]);
    needed.push_back(f_sets[i]);
  }
  needed.push_back(ue);
  needed.push_back(uf);
  cache.prefetch(needed);
  const double lhs = cache.get(ue) - cache.get(uf);
  double rhs = 0.0, scale = cache.get(ue);
  for (std::size_t i = 0; i < e_sets.size(); ++i) {
    rhs += cache.get(e_sets[i]) - cache.get(f_sets[i]);
    scale = std::max(scale, cache.get(e_sets[i]));
  }
  const double tol = double(e_sets.size()) * tolerance_for(d, scale);
  auto r = report("lemma_subadditivity", ctx, lhs, rhs, tol);
  r.add("k", double(e_sets.size()));
  return r;
}

bool is_pure_potential(const GridFunction& u, const PFormContext& ctx) {
  return !pure_potential_violation(u, ctx).has_value();
}

Mask interval_nodes(const GridDomain& d, double lo, double hi) {
  const double slack = 1e-9 * d.spacing(0);
  Mask m(d.node_count(), 0);
  for (std::size_t j = 0; j < d.node_count(); ++j) {
    const double x = d.node_coords(j)[0];
    m[j] = x >= lo - slack && x <= hi + slack;
  }
  return m;
}

Mask rect_nodes(const GridDomain& d, const Point& lo, const Point& hi) {
  Mask m(d.node_count(), 0);
  for (std::size_t j = 0; j < d.node_count(); ++j) {
    const auto x = d.node_coords(j);
    bool in = true;
    for (std::size_t i = 0; i < d.dim(); ++i) {
      const double slack = 1e-9 * d.spacing(i);
      in = in && x[i] >= lo[i] - slack && x[i] <= hi[i] + slack;
    }
    m[j] = in;
  }
  return m;
}

namespace {
double distance(const GridDomain& d, const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.dim(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}
}  // namespace

Mask disk_nodes(const GridDomain& d, const Point& center, double r) {
  require(r > 0.0, ErrorCode::InvalidArgument, "disk radius must be positive");
  Mask m(d.node_count(), 0);
  for (std::size_t j = 0; j < d.node_count(); ++j)
    m[j] = distance(d, d.node_coords(j), center) <= r * (1.0 + 1e-12);
  return m;
}

Mask outside_disk_nodes(const GridDomain& d, const Point& center, double r) {
  require(r > 0.0, ErrorCode::InvalidArgument, "disk radius must be positive");
  Mask m = d.boundary_mask();
  for (std::size_t j = 0; j < d.node_count(); ++j)
    if (distance(d, d.node_coords(j), center) >= r * (1.0 - 1e-12)) m[j] = 1;
  return m;
}

Mask nodes_from_list(const GridDomain& d, const std::vector<std::size_t>& ids) {
  Mask m(d.node_count(), 0);
  for (auto i : ids) {
    require(i < d.node_count(), ErrorCode::InvalidArgument,
            "node index " + std::to_string(i) + " out of range");
    m[i] = 1;
  }
  return m;
}

Mask mask_union(const Mask& a, const Mask& b) {
  require(a.size() == b.size(), ErrorCode::ShapeMismatch, "mask union: length mismatch");
  Mask r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] || b[i];
  return r;
}

Mask mask_intersection(const Mask& a, const Mask& b) {
  require(a.size() == b.size(), ErrorCode::ShapeMismatch,
          "mask intersection: length mismatch");
  Mask r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] && b[i];
  return r;
}

bool mask_subset(const Mask& a, const Mask& b) {
  require(a.size() == b.size(), ErrorCode::ShapeMismatch, "mask subset: length mismatch");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

bool mask_empty(const Mask& a) {
  return std::none_of(a.begin(), a.end(), [](std::uint8_t x) { return x != 0; });
}

std::size_t mask_count(const Mask& a) {
  return std::size_t(std::count_if(a.begin(), a.end(), [](std::uint8_t x) { return x != 0; }));
}

Mask dilate(const GridDomain& d, const Mask& a, int steps, const Mask& forbidden) {
  Mask cur = a;
  for (int s = 0; s < steps; ++s) {
    Mask next = cur;
    for (std::size_t j = 0; j < d.node_count(); ++j)
      if (cur[j])
        for_each_cell_neighbour(d, j, [&](std::size_t k) {
          if (!forbidden[k]) next[k] = 1;
        });
    cur = std::move(next);
  }
  return cur;
}

}  // namespace npf
