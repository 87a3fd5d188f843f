// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, followed by the sub-checks
// that decide it. Usage: npform_acceptance [--criterion N].
//
// Exit status is nonzero when a sub-check fails that is not listed as a known
// limitation. Known limitations still print FAIL.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "npform/capacity.hpp"
#include "npform/intrinsic.hpp"
#include "npform/pform.hpp"
#include "npform/quasiregular.hpp"
#include "npform/solver.hpp"
#include "support.hpp"

#ifndef NPFORM_CLI_PATH
#error "NPFORM_CLI_PATH must name the npform executable"
#endif

using namespace npf;
using testsupport::random_field;
using testsupport::random_function;
using testsupport::random_smooth;
using testsupport::unit_grid;

namespace {

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Outcome {
  struct Item {
    std::string what;
    bool ok;
    bool known;
  };
  std::vector<Item> items;
  void expect(bool ok, const std::string& what, bool known = false) {
    items.push_back({what, ok, known});
  }
  bool passed() const {
    return std::all_of(items.begin(), items.end(), [](const Item& i) { return i.ok; });
  }
  bool unexpected_failure() const {
    return std::any_of(items.begin(), items.end(),
                       [](const Item& i) { return !i.ok && !i.known; });
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double interval_capacity(double p, double a, double b) {
  return std::pow(2.0, p / 2) * (std::pow(a, 1 - p) + std::pow(1 - b, 1 - p));
}

// ---------------------------------------------------------------------------

void p2_reduction(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  const auto d = unit_grid({8, 8});
  double worst_form = 0.0, worst_op = 0.0, worst_hess = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto field = random_field(2, d.cell_count(), rng);
    auto s = make_structure(d, field);
    auto ctx = PFormContext::make(s, 2.0);
    const auto u = random_function(d, rng);
    const auto v = random_function(d, rng);
    const double scale =
        std::max(1.0, std::sqrt(p_form(u, u, ctx) * p_form(v, v, ctx)));
    worst_form = std::max(worst_form, std::abs(p_form(u, v, ctx) - 2 * energy(u, v, *s)) / scale);

    const Eigen::MatrixXd k = testsupport::stiffness_oracle(d, field);
    const Eigen::VectorXd ku = k * testsupport::as_vector(u);
    const auto coeffs = lp_coefficients(u, ctx);
    for (std::size_t j = 0; j < coeffs.size(); ++j)
      worst_op = std::max(worst_op, std::abs(coeffs[j] - ku(Eigen::Index(j))));
    const Eigen::MatrixXd h(p_hessian(u, ctx));
    worst_hess = std::max(worst_hess, (h - k).cwiseAbs().maxCoeff());
  }
  o.expect(worst_form <= 1e-12,
           fmt("max |E^2(u,v) - 2E(u,v)| / scale = %.3e over 100 pairs (<= 1e-12)", worst_form));
  o.expect(worst_op <= 1e-10,
           fmt("max |L_2 u - K u| entrywise = %.3e (<= 1e-10)", worst_op));
  o.expect(worst_hess <= 1e-10,
           fmt("max |Hessian of J_2 - K| entrywise = %.3e (<= 1e-10)", worst_hess));
  const double t = seconds_since(t0);
  o.expect(t < 5.0, fmt("runtime %.2f s (< 5 s)", t));
}

void algebraic_axioms(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> tdist(0.0, 4.0);
  const int trials = 500;
  double homog = 0.0, sector = std::numeric_limits<double>::infinity();
  double mono = std::numeric_limits<double>::infinity();
  double cs = std::numeric_limits<double>::infinity();
  double sub = std::numeric_limits<double>::infinity();
  int runs = 0;
  for (std::size_t dim : {1u, 2u}) {
    const auto d = dim == 1 ? unit_grid({12}) : unit_grid({6, 6});
    for (double p : {2.0, 2.5, 3.0, 4.0}) {
      for (int t = 0; t < trials; ++t) {
        auto s = make_structure(d, random_field(dim, d.cell_count(), rng));
        auto ctx = PFormContext::make(s, p);
        const auto u = random_function(d, rng);
        // Every fifth trial uses a collinear pair, the equality case of (CS).
        const auto v = t % 5 == 4 ? (-0.7) * GridFunction(u) : random_function(d, rng);

        const auto h = check_homogeneity(u, v, tdist(rng), ctx);
        homog = std::max(homog, std::abs(h.lhs - h.rhs) / std::max(h.value("scale"), 1e-300));

        const auto sc = check_sector(u, v, ctx);
        sector = std::min(sector, sc.slack / std::max(sc.rhs, 1e-300));
        for (double m : monotonicity_density(u, v, ctx)) mono = std::min(mono, m);

        const auto guv = carre_du_champ(u, v, *s);
        const auto guu = carre_du_champ(u, u, *s);
        const auto gvv = carre_du_champ(v, v, *s);
        const auto w = u + v;
        const auto gww = carre_du_champ(w, w, *s);
        for (std::size_t c = 0; c < guv.size(); ++c) {
          const double bound = std::sqrt(guu[c] * gvv[c]);
          cs = std::min(cs, (bound - std::abs(guv[c])) / std::max(bound, 1.0));
          const double tri = std::sqrt(guu[c]) + std::sqrt(gvv[c]);
          sub = std::min(sub, (tri - std::sqrt(gww[c])) / std::max(tri, 1.0));
        }
        ++runs;
      }
    }
  }
  o.expect(homog <= 1e-12,
           fmt("homogeneity: max error / sum of |cell terms| = %.3e over %d trials (<= 1e-12)", homog, runs));
  o.expect(sector >= -1e-12, fmt("sector condition: min slack / bound = %.3e (>= -1e-12)", sector));
  o.expect(mono >= -1e-12, fmt("per-cell monotonicity: min density %.3e (>= -1e-12)", mono));
  o.expect(cs >= -1e-12,
           fmt("per-cell |Gamma(u,v)| <= Gamma(u)^1/2 Gamma(v)^1/2: min slack %.3e", cs));
  o.expect(sub >= -1e-12,
           fmt("per-cell Gamma(u+v)^1/2 <= Gamma(u)^1/2 + Gamma(v)^1/2: min slack %.3e", sub));
  const double t = seconds_since(t0);
  o.expect(t < 30.0, fmt("runtime %.2f s (< 30 s)", t));
}

void gradient_consistency(Outcome& o) {
  std::mt19937_64 rng(303);
  const double delta = 1e-4;
  for (double p : {2.0, 3.0, 4.0}) {
    double worst = 0.0;
    for (std::size_t dim : {1u, 2u}) {
      const auto d = dim == 1 ? unit_grid({24}) : unit_grid({9, 9});
      for (int t = 0; t < 20; ++t) {
        auto ctx = PFormContext::make(make_structure(d, random_field(dim, d.cell_count(), rng)), p);
        // random_smooth is bounded by 3; scale to [-1, 1].
        const auto u = (1.0 / 3.0) * random_smooth(d, rng);
        const auto v = (1.0 / 3.0) * random_smooth(d, rng);
        const double fd = (p_energy(u + delta * GridFunction(v), ctx) -
                           p_energy(u - delta * GridFunction(v), ctx)) /
                          (2 * delta);
        worst = std::max(worst, std::abs(fd - p_form(u, v, ctx)));
      }
    }
    o.expect(worst <= 1e-6,
             fmt("p = %.0f: max |central difference - E^p(u,v)| = %.3e (<= 1e-6)", p, worst));
  }
}

void capacity_1d(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto d = unit_grid({41});
  const Condenser k{interval_nodes(d, 0.25, 0.75), d.boundary_mask()};
  const auto c2 = capacity(k, PFormContext::make(make_identity_structure(d), 2.0));
  o.expect(std::abs(c2.value - 16.0) <= 1e-8,
           fmt("cap_2 = %.12f, |cap_2 - 16| = %.3e (<= 1e-8)", c2.value, std::abs(c2.value - 16.0)));
  const double e3 = std::pow(2.0, 1.5) * 32.0;
  const auto c3 = capacity(k, PFormContext::make(make_identity_structure(d), 3.0));
  const double rel = std::abs(c3.value - e3) / e3;
  o.expect(rel <= 1e-6, fmt("cap_3 = %.10f vs %.10f, relative %.3e (<= 1e-6)", c3.value, e3, rel));
  const double t = seconds_since(t0);
  o.expect(t < 2.0, fmt("runtime %.2f s (< 2 s)", t));
}

void condenser_2d(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const double exact = 4 * M_PI / std::log(3.0);
  // n cells per axis, n + 1 nodes.
  for (auto [cells, bound] : {std::pair{128u, 0.03}, std::pair{256u, 0.015}}) {
    const GridDomain d({{-0.75, 0.75}, {-0.75, 0.75}}, {cells + 1, cells + 1});
    const Point c{0, 0, 0};
    const Condenser k{disk_nodes(d, c, 0.25), outside_disk_nodes(d, c, 0.75)};
    const auto r = capacity(k, PFormContext::make(make_identity_structure(d), 2.0));
    const double rel = (r.value - exact) / exact;
    o.expect(std::abs(rel) <= bound, fmt("%u^2: cap = %.6f vs 4 pi / ln 3 = %.6f, error %+.3f%% (within %.1f%%)",
                                         cells, r.value, exact, 100 * rel, 100 * bound));
    double on_k = 0.0;
    for (std::size_t j = 0; j < d.node_count(); ++j)
      if (k.inner[j]) on_k = std::max(on_k, std::abs(r.potential[j] - 1.0));
    o.expect(r.potential_min >= 0.0 && r.potential_max <= 1.0 + 1e-8,
             fmt("%u^2: e_K in [%.3e, 1 + %.3e]", cells, r.potential_min, r.potential_max - 1.0));
    o.expect(on_k == 0.0, fmt("%u^2: max |e_K - 1| on K = %.3e", cells, on_k));
    o.expect(r.vi_residual <= 1e-6, fmt("%u^2: VI residual %.3e (<= 1e-6)", cells, r.vi_residual));
  }
  const double t = seconds_since(t0);
  o.expect(t < 120.0, fmt("runtime %.2f s (< 120 s)", t));
}

void choquet(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  {
    const auto d = unit_grid({41});
    const auto outer = d.boundary_mask();
    for (double p : {2.0, 3.0}) {
      auto ctx = PFormContext::make(make_identity_structure(d), p);
      const std::vector<std::pair<double, double>> iv = {{0.2, 0.5}, {0.4, 0.7}, {0.3, 0.45}};
      std::vector<Mask> sets;
      for (auto [a, b] : iv) sets.push_back(interval_nodes(d, a, b));
      const auto suite = check_choquet(sets, outer, ctx);
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& r : suite.checks) worst = std::min(worst, r.slack);
      o.expect(suite.passed() && worst >= -1e-9,
               fmt("1-D p = %.0f: %zu Choquet checks, min slack %.3e (>= -1e-9)", p,
                   suite.checks.size(), worst));
      // Closed forms for the sets, their unions and intersections (unions of
      // overlapping intervals are intervals).
      CapacityCache cache(ctx, outer);
      double err = 0.0;
      for (std::size_t i = 0; i < iv.size(); ++i) {
        err = std::max(err, std::abs(cache.get(sets[i]) - interval_capacity(p, iv[i].first, iv[i].second)));
        for (std::size_t j = i + 1; j < iv.size(); ++j) {
          const double lo = std::min(iv[i].first, iv[j].first), hi = std::max(iv[i].second, iv[j].second);
          const double ilo = std::max(iv[i].first, iv[j].first), ihi = std::min(iv[i].second, iv[j].second);
          err = std::max(err, std::abs(cache.get(mask_union(sets[i], sets[j])) - interval_capacity(p, lo, hi)));
          err = std::max(err, std::abs(cache.get(mask_intersection(sets[i], sets[j])) -
                                       interval_capacity(p, ilo, ihi)));
        }
      }
      o.expect(err <= 1e-9, fmt("1-D p = %.0f: max deviation from closed forms %.3e (<= 1e-9)", p, err));
      const auto lemma = check_lemma_312({interval_nodes(d, 0.1, 0.4), interval_nodes(d, 0.5, 0.9)},
                                         {interval_nodes(d, 0.2, 0.3), interval_nodes(d, 0.6, 0.7)},
                                         outer, ctx);
      const double lhs = interval_capacity(p, 0.1, 0.9) - interval_capacity(p, 0.2, 0.7);
      const double rhs = interval_capacity(p, 0.1, 0.4) - interval_capacity(p, 0.2, 0.3) +
                         interval_capacity(p, 0.5, 0.9) - interval_capacity(p, 0.6, 0.7);
      o.expect(lemma.slack >= -1e-9 && std::abs(lemma.lhs - lhs) <= 1e-9 * std::abs(lhs) &&
                   std::abs(lemma.rhs - rhs) <= 1e-9 * rhs,
               fmt("1-D p = %.0f: union difference lemma slack %.3e, sides match closed forms", p,
                   lemma.slack));
    }
  }
  {
    const auto d = unit_grid({33, 33});
    const auto outer = d.boundary_mask();
    for (double p : {2.0, 3.0}) {
      auto ctx = PFormContext::make(make_identity_structure(d), p);
      const std::vector<Mask> sets = {disk_nodes(d, {0.4, 0.5, 0}, 0.15),
                                      disk_nodes(d, {0.6, 0.5, 0}, 0.15),
                                      rect_nodes(d, {0.45, 0.4, 0}, {0.55, 0.6, 0})};
      const auto suite = check_choquet(sets, outer, ctx);
      double worst = std::numeric_limits<double>::infinity(), tol = 0.0;
      for (const auto& r : suite.checks) {
        worst = std::min(worst, r.slack);
        tol = std::max(tol, r.tolerance);
      }
      o.expect(suite.passed(), fmt("2-D p = %.0f: %zu Choquet checks pass, min slack %.3e, C*h tolerance up to %.3e",
                                   p, suite.checks.size(), worst, tol));
      const auto lemma = check_lemma_312({disk_nodes(d, {0.3, 0.5, 0}, 0.12), disk_nodes(d, {0.7, 0.5, 0}, 0.12)},
                                         {disk_nodes(d, {0.3, 0.5, 0}, 0.05), disk_nodes(d, {0.7, 0.5, 0}, 0.05)},
                                         outer, ctx);
      o.expect(lemma.passed, fmt("2-D p = %.0f: union difference lemma slack %.3e, tolerance %.3e", p,
                                 lemma.slack, lemma.tolerance));
    }
  }
  const double t = seconds_since(t0);
  o.expect(t < 60.0, fmt("runtime %.2f s (< 60 s)", t));
}

void contractions(Outcome& o) {
  std::mt19937_64 rng(707);
  {
    const auto d = unit_grid({20});
    const auto tanh_map = Contraction::smooth(
        "tanh", [](double x) { return std::tanh(x); },
        [](double x) { return 1.0 / std::pow(std::cosh(x), 2); });
    double worst = std::numeric_limits<double>::infinity();
    for (double p : {2.0, 3.0, 4.0}) {
      auto ctx = PFormContext::make(make_identity_structure(d), p);
      for (int i = 0; i < 50; ++i) {
        const auto r = check_contraction_operates(random_function(d, rng, -2, 2),
                                                  random_function(d, rng, -2, 2), ctx, tanh_map);
        worst = std::min(worst, r.slack);
      }
    }
    o.expect(worst >= -1e-12, fmt("smooth tanh contraction, 1-D, 150 pairs: min pairing %.3e (>= -1e-12)", worst));
  }
  {
    // Column levels meet each threshold exactly on a node column.
    const auto d = unit_grid({9, 5});
    double worst = std::numeric_limits<double>::infinity();
    double straddling = 0.0;
    int n = 0;
    for (double p : {2.0, 3.0, 4.0}) {
      auto ctx = PFormContext::make(make_identity_structure(d), p);
      for (double alpha : {1.0, 0.8, 0.5}) {
        const double level[9] = {-1.0, -0.5, 0.0, 0.3, alpha, 1.4, 2.0, 2.5, 3.0};
        const auto u = GridFunction::sample(d, [&](const Point& x) {
          const int i = int(std::lround(x[0] * 8));
          const double wiggle = (i == 0 || i == 7) ? 0.2 * x[1] : (i == 3 ? 0.1 * alpha * x[1] : 0.0);
          return level[i] + wiggle;
        });
        const auto t = alpha == 1.0 ? Contraction::unit() : Contraction::truncation(alpha);
        for (int k = 0; k < 10; ++k) {
          const auto v = random_function(d, rng);
          for (const auto& c : {t, Contraction::negative_part()}) {
            const auto r = check_contraction_operates(u, v, ctx, c);
            worst = std::min(worst, r.slack);
            straddling = std::max(straddling, r.value("straddling_cells"));
            ++n;
          }
        }
      }
    }
    o.expect(worst >= -1e-12 && straddling == 0.0,
             fmt("unit, T_alpha and T_- on level-set-aligned inputs, %d pairings: min %.3e (>= -1e-12)",
                 n, worst));
  }
  {
    const auto d = unit_grid({17, 17});
    const auto outer = d.boundary_mask();
    for (double p : {2.0, 3.0}) {
      auto ctx = PFormContext::make(make_identity_structure(d), p);
      const auto u = capacity(Condenser{disk_nodes(d, {0.5, 0.5, 0}, 0.15), outer}, ctx).potential;
      const auto v = capacity(Condenser{disk_nodes(d, {0.45, 0.5, 0}, 0.3), outer}, ctx).potential;
      for (double alpha : {0.0, 0.25, 0.5}) {
        const auto s = check_D1_D2(u, v, alpha, ctx);
        for (const auto& r : s.checks)
          o.expect(r.passed, fmt("%s p = %.0f alpha = %.2f: lhs %.3e, tolerance C*h = %.3e",
                                 r.check.c_str(), p, alpha, r.lhs, r.tolerance));
      }
    }
  }
}

void intrinsic_metric(Outcome& o) {
  const GridDomain d({{-1.0, 1.0}, {-1.0, 1.0}}, {65, 65});
  GridStructure s(d, CoefficientField::identity(2, d.cell_count()));
  const std::size_t c = d.nearest_node({0, 0, 0});
  const auto xc = d.node_coords(c);
  for (auto [st, bound, name] : {std::tuple{Stencil::N16, 0.03, "16"}, std::tuple{Stencil::N8, 0.08, "8"}}) {
    const auto rho = intrinsic_distance(c, s, st);
    double over = 0.0, under = 0.0;
    for (std::size_t j = 0; j < d.node_count(); ++j) {
      if (j == c) continue;
      const auto x = d.node_coords(j);
      const double e = std::hypot(x[0] - xc[0], x[1] - xc[1]) / std::sqrt(2.0);
      over = std::max(over, rho[j] / e - 1);
      under = std::min(under, rho[j] / e - 1);
    }
    // The 8-neighbour graph overestimates by 1/cos(22.5 deg) - 1 = 8.24% in
    // the worst direction; no node set can bring it under 8%.
    o.expect(over <= bound && under >= -1e-12,
             fmt("%s-neighbour: rho / (|x - y| / sqrt 2) - 1 in [%.2e, %.4f] (within %.0f%%)", name,
                 under, over, 100 * bound),
             st == Stencil::N8);
    const auto u = cutoff_rho(rho, 0.5, d);
    const double g = max_cell_gamma(u, s);
    const double path = std::pow(1 + rho.metrication, 2);
    const double cell = std::pow(1 + rho.cell_metrication, 2);
    // Cell-averaged gradients of a graph distance exceed the path bound near
    // stencil cone boundaries; the cell bound holds.
    o.expect(g <= path + 1e-12,
             fmt("%s-neighbour cutoff: max cell Gamma %.4f <= (1 + metrication)^2 = %.4f", name, g, path),
             true);
    o.expect(g <= cell + 1e-12,
             fmt("%s-neighbour cutoff: max cell Gamma %.4f <= (1 + cell metrication)^2 = %.4f", name, g, cell));
  }
}

void caccioppoli(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  {
    const auto d = unit_grid({33, 33});
    const auto aff = GridFunction::sample(d, [](const Point& x) { return 1 + 2 * x[0] - x[1]; });
    const std::size_t c = d.nearest_node({0.5, 0.5, 0});
    for (double p : {2.0, 3.0, 4.0}) {
      auto ctx = PFormContext::make(make_identity_structure(d), p);
      const auto phi = truncation_function(c, 0.1, 0.25, *ctx.structure);
      const auto g = check_caccioppoli(aff, phi, std::nullopt, ctx);
      const auto b = check_caccioppoli_ball(aff, c, 0.1, 0.25, std::nullopt, ctx);
      const auto e = check_caccioppoli_euclidean(aff, euclidean_bump(d, {0.5, 0.5, 0}, 0.1, 0.25),
                                                 std::nullopt, 1.0, 1.0, ctx);
      o.expect(g.passed && b.passed && e.passed,
               fmt("affine p = %.0f: slacks %.3e / %.3e / %.3e (general / ball / Euclidean)", p,
                   g.slack, b.slack, e.slack));
    }
  }
  {
    const auto d = unit_grid({65, 65});
    auto ctx = PFormContext::make(make_identity_structure(d), 2.0);
    const auto u = GridFunction::sample(d, [](const Point& x) {
      return (x[0] - 0.5) * (x[0] - 0.5) - (x[1] - 0.5) * (x[1] - 0.5);
    });
    const std::size_t c = d.nearest_node({0.5, 0.5, 0});
    const auto g = check_caccioppoli(u, truncation_function(c, 0.1, 0.25, *ctx.structure), 0.0, ctx);
    const auto b = check_caccioppoli_ball(u, c, 0.1, 0.25, std::nullopt, ctx);
    const auto e = check_caccioppoli_euclidean(u, euclidean_bump(d, {0.6, 0.4, 0}, 0.1, 0.25),
                                               std::nullopt, 1.0, 1.0, ctx);
    o.expect(g.passed && b.passed && e.passed,
             fmt("Re z^2 p = 2: slacks %.3e / %.3e / %.3e, tolerance %.3e / %.3e / %.3e", g.slack,
                 b.slack, e.slack, g.tolerance, b.tolerance, e.tolerance));
  }
  {
    const GridDomain d({{-1.0, 1.0}, {-1.0, 1.0}}, {65, 65});
    Mask mask = d.boundary_mask();
    for (std::size_t j = 0; j < d.node_count(); ++j) {
      const auto x = d.node_coords(j);
      if (std::hypot(x[0], x[1]) < 0.2) mask[j] = 1;
    }
    const auto lg = GridFunction::sample(d, [](const Point& x) {
      return std::log(std::max(std::hypot(x[0], x[1]), 1e-3));
    });
    const auto phi = euclidean_bump(d, {0.5, 0.0, 0.0}, 0.1, 0.3);
    auto ctx = PFormContext::make(make_identity_structure(d), 2.0);
    const auto sol = solve_dirichlet(ctx, lg.with_mask(mask)).solution;
    const auto e = check_caccioppoli_euclidean(sol, phi, std::nullopt, 1.0, 1.0, ctx);
    const auto b = check_caccioppoli_ball(sol, d.nearest_node({0.5, 0, 0}), 0.05, 0.15, std::nullopt, ctx);
    o.expect(e.passed && b.passed, fmt("ln|z| p = 2: slacks %.3e / %.3e (Euclidean / ball)", e.slack, b.slack));

    std::mt19937_64 rng(909);
    for (double p : {2.0, 3.0}) {
      const double alpha = 0.5, beta = 2.0;
      auto actx = PFormContext::make(make_structure(d, random_field(2, d.cell_count(), rng, alpha, beta)), p);
      const auto asol = solve_dirichlet(actx, lg.with_mask(mask)).solution;
      const auto ae = check_caccioppoli_euclidean(asol, phi, std::nullopt, alpha, beta, actx);
      const double k = p * std::sqrt(beta / alpha);
      o.expect(ae.passed && ae.value("constant") == k,
               fmt("anisotropic G, p = %.0f: constant %.17g = p sqrt(beta / alpha), slack %.3e", p,
                   ae.value("constant"), ae.slack));
    }
  }
  const double t = seconds_since(t0);
  o.expect(t < 60.0, fmt("runtime %.2f s (< 60 s)", t));
}

double theta_deviation(const QrAnalysis& a) {
  double dev = 0.0;
  for (std::size_t c = 0; c < a.in_region.size(); ++c) {
    if (!a.analyzed(c)) continue;
    const auto t = a.theta_at(c);
    for (std::size_t i = 0; i < a.n; ++i)
      for (std::size_t j = 0; j < a.n; ++j)
        dev = std::max(dev, std::abs(t[i * a.n + j] - (i == j ? 1.0 : 0.0)));
  }
  return dev;
}

double det_deviation(const QrAnalysis& a) {
  double dev = 0.0;
  const Eigen::Index n = Eigen::Index(a.n);
  for (std::size_t c = 0; c < a.in_region.size(); ++c) {
    if (!a.analyzed(c)) continue;
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> t(
        a.theta_at(c).data(), n, n);
    dev = std::max(dev, std::abs(t.determinant() - 1.0));
  }
  return dev;
}

void quasiregular(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const GridDomain d({{-1.0, 1.0}, {-1.0, 1.0}}, {64, 64});
  double det_worst = 0.0;
  for (int k : {1, 2, 3, 4}) {
    const auto a = analyze_mapping(MappingSpec::make_power(k), d);
    const double dk = std::max(std::abs(a.k_outer - 1), std::abs(a.k_inner - 1));
    const double dt = theta_deviation(a);
    o.expect(dk <= 1e-10 && dt <= 1e-10,
             fmt("z^%d: |K - 1| = %.2e, max |theta - I| = %.2e (<= 1e-10)", k, dk, dt));
    det_worst = std::max(det_worst, det_deviation(a));
  }
  for (double s : {1.5, 2.0, 3.0}) {
    const auto a = analyze_mapping(MappingSpec::make_radial(s), d);
    const double dk = std::max(std::abs(a.k_outer - s), std::abs(a.k_inner - s));
    o.expect(dk <= 1e-8, fmt("radial stretch a = %.1f: K_O = %.12f, K_I = %.12f (within 1e-8)", s,
                             a.k_outer, a.k_inner));
    det_worst = std::max(det_worst, det_deviation(a));
  }
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> ent(-1.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    std::vector<double> m = {2 + ent(rng), 0.5 * ent(rng), 0.5 * ent(rng), 2 + ent(rng)};
    det_worst = std::max(det_worst, det_deviation(analyze_mapping(MappingSpec::make_linear(m), d)));
    std::vector<double> samples;
    for (std::size_t j = 0; j < d.node_count(); ++j) {
      const auto x = d.node_coords(j);
      samples.push_back(m[0] * x[0] + m[1] * x[1] + 0.1 * x[0] * x[0]);
      samples.push_back(m[2] * x[0] + m[3] * x[1] + 0.1 * x[1] * x[1]);
    }
    det_worst = std::max(det_worst, det_deviation(analyze_mapping(MappingSpec::make_sampled(samples), d)));
  }
  o.expect(det_worst <= 1e-10,
           fmt("det theta = 1 on power, radial, linear and sampled maps: max error %.2e", det_worst));

  // 64 and 128 cells per axis on the annulus 0.3 < |x| < 0.9.
  auto z2 = MappingSpec::make_power(2);
  z2.inner_radius = 0.3;
  z2.outer_radius = 0.9;
  HarmonicityOptions opts;
  opts.min_order = 1.9;
  const auto h = verify_component_harmonicity(z2, GridDomain({{-1.0, 1.0}, {-1.0, 1.0}}, {65, 65}), opts);
  for (const auto& r : h.checks) {
    if (r.value("exact") == 1.0)
      o.expect(r.passed, fmt("%s: residual %.2e at 64^2, %.2e at 128^2 (discretely harmonic)",
                             r.check.c_str(), r.value("residual_coarse"), r.value("residual_fine")));
    else
      o.expect(r.passed && r.value("order") >= 1.9,
               fmt("%s: residual %.3e -> %.3e, observed order %.3f (>= 1.9)", r.check.c_str(),
                   r.value("residual_coarse"), r.value("residual_fine"), r.value("order")));
  }
  const double t = seconds_since(t0);
  o.expect(t < 120.0, fmt("runtime %.2f s (< 120 s)", t));
}

std::string run_cli(const std::string& args) {
  std::string out;
  FILE* f = popen(("'" NPFORM_CLI_PATH "' " + args + " 2>/dev/null").c_str(), "r");
  if (!f) return out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
  const int status = pclose(f);
  if (status != 0) out = "exit status " + std::to_string(status);
  return out;
}

void determinism(Outcome& o) {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "npform_acceptance";
  fs::create_directories(dir);
  const std::pair<const char*, const char*> configs[] = {
      {"solve", R"({"command":"solve","p":3,
        "domain":{"dim":2,"extent":[[-1,1],[-1,1]],"shape":[33,33]},
        "solve":{"boundary":{"type":"re_power","k":2}}})"},
      {"capacity", R"({"command":"capacity","p":2.5,
        "domain":{"dim":2,"extent":[[-1,1],[-1,1]],"shape":[33,33]},
        "condenser":{"inner":{"type":"disk","center":[0,0],"r":0.3}}})"},
      {"caccioppoli", R"({"command":"caccioppoli","p":2,
        "domain":{"dim":2,"extent":[[-1,1],[-1,1]],"shape":[33,33]},
        "caccioppoli":{"function":{"type":"re_power","k":2},
                       "ball":{"center":[0,0],"r":0.2,"R":0.5}}})"},
      {"qr", R"({"command":"qr","domain":{"dim":2,"extent":[[-1,1],[-1,1]],"shape":[32,32]},
        "mapping":{"kind":"radial","a":2}})"},
      {"metric", R"({"command":"metric","domain":{"dim":2,"extent":[[-1,1],[-1,1]],"shape":[33,33]},
        "metric":{"source":[0.25,0],"include_distance":true,"cutoff_r":0.4}})"},
      {"check", R"({"command":"check","p":3,
        "domain":{"dim":2,"extent":[[0,1],[0,1]],"shape":[17,17]},"check":{"trials":8}})"},
  };
  for (const auto& [name, body] : configs) {
    const auto path = dir / (std::string(name) + ".json");
    std::ofstream(path) << body;
    const std::string base = "--config '" + path.string() + "' --seed 11";
    const auto a = run_cli(base + " --threads 1");
    bool same = !a.empty() && a.front() == '{';
    for (const char* t : {" --threads 2", " --threads 4", " --threads 8"})
      same = same && run_cli(base + t) == a;
    const auto c1 = run_cli(base + " --threads 1 --csv");
    same = same && !c1.empty() && run_cli(base + " --threads 4 --csv") == c1;
    o.expect(same, fmt("%s: JSON and CSV reports byte-identical for --threads 1, 2, 4, 8 (%zu bytes)",
                       name, a.size()));
  }
}

struct Criterion {
  int id;
  const char* title;
  std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--criterion") only = std::atoi(argv[i + 1]);

  const std::vector<Criterion> criteria = {
      {1, "p = 2 reduction to the bilinear form and stiffness operator", p2_reduction},
      {2, "algebraic axioms of the p-form", algebraic_axioms},
      {3, "gradient consistency of J_p", gradient_consistency},
      {4, "1-D capacity closed forms", capacity_1d},
      {5, "2-D annular condenser", condenser_2d},
      {6, "Choquet capacity suite", choquet},
      {7, "contractions, D1 and D2", contractions},
      {8, "intrinsic metric and cutoffs", intrinsic_metric},
      {9, "Caccioppoli inequalities", caccioppoli},
      {10, "quasiregular invariants and component harmonicity", quasiregular},
      {11, "CLI determinism across thread counts", determinism},
  };

  bool unexpected = false;
  for (const auto& c : criteria) {
    if (only && c.id != only) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.expect(false, std::string("exception: ") + e.what());
    }
    const double t = seconds_since(t0);
    std::printf("criterion %2d %s  %s (%.2f s)\n", c.id, o.passed() ? "PASS" : "FAIL", c.title, t);
    for (const auto& it : o.items)
      std::printf("    [%s] %s\n", it.ok ? "ok" : (it.known ? "FAIL, known limitation" : "FAIL"),
                  it.what.c_str());
    std::fflush(stdout);
    unexpected = unexpected || o.unexpected_failure();
  }
  return unexpected ? 1 : 0;
}
