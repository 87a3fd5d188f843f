// SPDX-License-Identifier: Apache-2.0
#include "npform/pform.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "npform/error.hpp"

namespace npf {

namespace {

constexpr double kTiny = 1e-300;

void check_pair(const GridFunction& u, const GridFunction& v,
                const PFormContext& ctx, const char* what) {
  if (!u.same_shape(v) || u.shape() != ctx.domain().shape())
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": shape mismatch");
}

void check_one(const GridFunction& u, const PFormContext& ctx,
               const char* what) {
  if (u.shape() != ctx.domain().shape())
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": shape mismatch");
}

double weight_of(double gamma, const PFormContext& ctx) {
  if (ctx.p == 2.0) return 1.0;
  const double s = std::max(gamma, 0.0) + ctx.eps;
  if (s <= 0.0) return ctx.p > 2.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::pow(s, 0.5 * (ctx.p - 2.0));
}

// d(grad_h u)_d / du_{corner k} for cell corners.
double corner_coeff(const GridDomain& d, std::size_t axis, std::size_t k) {
  const double scale = double(d.corners_per_cell() / 2) * d.spacing(axis);
  return (((k >> axis) & 1u) ? 1.0 : -1.0) / scale;
}

// Builds `out` = G(c) g.
void apply_g(const GridStructure& s, std::size_t c, const double* g,
             double* out) {
  const std::size_t n = s.dim();
  const auto m = s.field().matrix(c);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += m[i * n + j] * g[j];
    out[i] = acc;
  }
}

CheckReport base_report(const char* name, const PFormContext& ctx) {
  CheckReport r;
  r.check = name;
  r.p = ctx.p;
  r.grid = ctx.domain().shape();
  if (ctx.regularized()) r.notes.push_back("regularized");
  return r;
}

}  // namespace

PFormContext PFormContext::make(StructurePtr s, double p,
                                std::optional<double> eps) {
  require(s != nullptr, ErrorCode::InvalidArgument, "context needs a structure");
  require(std::isfinite(p) && p > 1.0, ErrorCode::InvalidArgument,
          "p must be > 1");
  PFormContext ctx;
  ctx.structure = std::move(s);
  ctx.p = p;
  ctx.eps = eps.value_or(p >= 2.0 ? 0.0 : 1e-12);
  require(std::isfinite(ctx.eps) && ctx.eps >= 0.0, ErrorCode::InvalidArgument,
          "eps must be >= 0");
  require(p >= 2.0 || ctx.eps > 0.0, ErrorCode::InvalidArgument,
          "p < 2 requires eps > 0");
  return ctx;
}

double Functional::pair(const GridFunction& v) const {
  require(v.size() == coeffs.size(), ErrorCode::ShapeMismatch,
          "functional pairing: shape mismatch");
  CompensatedSum sum;
  for (std::size_t j = 0; j < coeffs.size(); ++j)
    if (!excluded[j]) sum.add(coeffs[j] * v[j]);
  return sum.value();
}

double Functional::sup_norm() const {
  double m = 0.0;
  for (std::size_t j = 0; j < coeffs.size(); ++j)
    if (!excluded[j]) m = std::max(m, std::abs(coeffs[j]));
  return m;
}

std::vector<double> cell_weights(const GridFunction& u,
                                 const PFormContext& ctx) {
  check_one(u, ctx, "cell_weights");
  const auto gamma = carre_du_champ(u, u, *ctx.structure);
  std::vector<double> w(gamma.size());
  for (std::size_t c = 0; c < gamma.size(); ++c) w[c] = weight_of(gamma[c], ctx);
  return w;
}

double p_form(const GridFunction& u, const GridFunction& v,
              const PFormContext& ctx) {
  check_pair(u, v, ctx, "p_form");
  const auto& s = *ctx.structure;
  const auto& d = s.domain();
  std::array<double, 3> gu{}, gv{};
  CompensatedSum sum;
  for (std::size_t c = 0; c < d.cell_count(); ++c) {
    s.cell_gradient(u.values(), c, gu.data());
    s.cell_gradient(v.values(), c, gv.data());
    const double guv = s.cell_gamma(c, gu.data(), gv.data());
    if (guv == 0.0) continue;
    const double w = weight_of(s.cell_gamma(c, gu.data(), gu.data()), ctx);
    if (!std::isfinite(w))
      throw Error(ErrorCode::InvalidArgument,
                  "p_form: singular integrand on cell " + std::to_string(c));
    sum.add(w * guv * d.cell_measure(c));
  }
  return sum.value();
}

double p_energy(const GridFunction& u, const PFormContext& ctx) {
  check_one(u, ctx, "p_energy");
  const auto gamma = carre_du_champ(u, u, *ctx.structure);
  const auto& d = ctx.domain();
  const double floor = ctx.eps > 0.0 ? std::pow(ctx.eps, 0.5 * ctx.p) : 0.0;
  CompensatedSum sum;
  for (std::size_t c = 0; c < gamma.size(); ++c) {
    const double s = std::max(gamma[c], 0.0) + ctx.eps;
    sum.add((std::pow(s, 0.5 * ctx.p) - floor) * d.cell_measure(c));
  }
  return sum.value() / ctx.p;
}

std::vector<double> lp_coefficients(const GridFunction& u,
                                    const PFormContext& ctx) {
  check_one(u, ctx, "apply_Lp");
  const auto& s = *ctx.structure;
  const auto& d = s.domain();
  const std::size_t n = d.dim();
  const std::size_t kc = d.corners_per_cell();
  std::vector<double> coeff(d.node_count(), 0.0);
  std::array<double, 3> g{}, gg{};
  for (std::size_t c = 0; c < d.cell_count(); ++c) {
    s.cell_gradient(u.values(), c, g.data());
    apply_g(s, c, g.data(), gg.data());
    double gamma = 0.0;
    for (std::size_t i = 0; i < n; ++i) gamma += g[i] * gg[i];
    gamma *= 2.0;
    if (gamma == 0.0 && ctx.p != 2.0 && ctx.eps == 0.0) continue;
    const double factor = 2.0 * d.cell_measure(c) * weight_of(gamma, ctx);
    const auto corners = d.cell_corners(c);
    for (std::size_t k = 0; k < kc; ++k) {
      double acc = 0.0;
      for (std::size_t a = 0; a < n; ++a) acc += gg[a] * corner_coeff(d, a, k);
      coeff[corners[k]] += factor * acc;
    }
  }
  return coeff;
}

Functional apply_Lp(const GridFunction& u, const PFormContext& ctx) {
  Functional f{lp_coefficients(u, ctx), u.mask()};
  for (std::size_t j = 0; j < f.coeffs.size(); ++j)
    if (f.excluded[j]) f.coeffs[j] = 0.0;
  return f;
}

Eigen::SparseMatrix<double> p_hessian(const GridFunction& u,
                                      const PFormContext& ctx) {
  check_one(u, ctx, "p_hessian");
  const auto& s = *ctx.structure;
  const auto& d = s.domain();
  const std::size_t n = d.dim();
  const std::size_t kc = d.corners_per_cell();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(d.cell_count() * kc * kc);
  std::array<double, 3> g{}, gg{};
  std::vector<double> b(kc * n), bgg(kc), gb(kc * n);
  for (std::size_t c = 0; c < d.cell_count(); ++c) {
    s.cell_gradient(u.values(), c, g.data());
    apply_g(s, c, g.data(), gg.data());
    double gamma = 0.0;
    for (std::size_t i = 0; i < n; ++i) gamma += g[i] * gg[i];
    gamma *= 2.0;
    const double sreg = gamma + ctx.eps;
    const double w = weight_of(gamma, ctx);
    double w2 = 0.0;
    if (ctx.p != 2.0 && sreg > kTiny)
      w2 = 2.0 * (ctx.p - 2.0) * std::pow(sreg, 0.5 * (ctx.p - 4.0));
    const double m2 = 2.0 * d.cell_measure(c);
    const auto mat = s.field().matrix(c);
    for (std::size_t k = 0; k < kc; ++k) {
      for (std::size_t a = 0; a < n; ++a) b[k * n + a] = corner_coeff(d, a, k);
      double acc = 0.0;
      for (std::size_t a = 0; a < n; ++a) acc += gg[a] * b[k * n + a];
      bgg[k] = acc;
      for (std::size_t a = 0; a < n; ++a) {
        double t = 0.0;
        for (std::size_t e = 0; e < n; ++e) t += mat[a * n + e] * b[k * n + e];
        gb[k * n + a] = t;
      }
    }
    const auto corners = d.cell_corners(c);
    for (std::size_t i = 0; i < kc; ++i)
      for (std::size_t j = 0; j < kc; ++j) {
        double bgb = 0.0;
        for (std::size_t a = 0; a < n; ++a) bgb += b[i * n + a] * gb[j * n + a];
        const double v = m2 * (w * bgb + w2 * bgg[i] * bgg[j]);
        if (v != 0.0) trip.emplace_back(int(corners[i]), int(corners[j]), v);
      }
  }
  Eigen::SparseMatrix<double> h(int(d.node_count()), int(d.node_count()));
  h.setFromTriplets(trip.begin(), trip.end());
  return h;
}

Eigen::SparseMatrix<double> gamma_matrix(const GridStructure& s) {
  auto ctx = PFormContext::make(
      std::shared_ptr<const GridStructure>(std::shared_ptr<void>(), &s), 2.0);
  GridFunction zero(s.domain());
  // J_2 = (1/2) sum Gamma m, so its Hessian is the form matrix.
  return p_hessian(zero, ctx);
}

std::vector<double> monotonicity_density(const GridFunction& u,
                                         const GridFunction& v,
                                         const PFormContext& ctx) {
  check_pair(u, v, ctx, "monotonicity_density");
  const auto& s = *ctx.structure;
  const std::size_t cells = s.domain().cell_count();
  std::vector<double> out(cells);
  std::array<double, 3> gu{}, gv{}, gd{};
  for (std::size_t c = 0; c < cells; ++c) {
    s.cell_gradient(u.values(), c, gu.data());
    s.cell_gradient(v.values(), c, gv.data());
    for (std::size_t i = 0; i < 3; ++i) gd[i] = gu[i] - gv[i];
    const double a = s.cell_gamma(c, gu.data(), gu.data());
    const double b = s.cell_gamma(c, gv.data(), gv.data());
    const double wa = weight_of(a, ctx);
    const double wb = weight_of(b, ctx);
    const double ta = a == 0.0 ? 0.0 : wa * s.cell_gamma(c, gu.data(), gd.data());
    const double tb = b == 0.0 ? 0.0 : wb * s.cell_gamma(c, gv.data(), gd.data());
    out[c] = ta - tb;
  }
  return out;
}

CheckReport check_homogeneity(const GridFunction& u, const GridFunction& v,
                              double t, const PFormContext& ctx) {
  require(t >= 0.0, ErrorCode::InvalidArgument, "homogeneity needs t >= 0");
  CheckReport r = base_report("homogeneity", ctx);
  const double lhs = p_form(t * GridFunction(u), v, ctx);
  const double rhs = std::pow(t, ctx.p - 1.0) * p_form(u, v, ctx);
  // Relative to the absolute mass of the sum, which is what roundoff scales
  // with when the signed cell terms cancel.
  const auto w = cell_weights(u, ctx);
  const auto g = carre_du_champ(u, v, *ctx.structure);
  const auto& d = ctx.domain();
  CompensatedSum mass;
  for (std::size_t c = 0; c < g.size(); ++c) mass.add(std::abs(w[c] * g[c]) * d.cell_measure(c));
  const double scale = std::pow(t, ctx.p - 1.0) * mass.value();
  r.set(lhs, rhs, -std::abs(lhs - rhs), 1e-12 * std::max(scale, kTiny));
  r.add("t", t);
  r.add("scale", scale);
  return r;
}

CheckReport check_sector(const GridFunction& u, const GridFunction& v,
                         const PFormContext& ctx) {
  CheckReport r = base_report("sector", ctx);
  const double lhs = std::abs(p_form(u, v, ctx));
  const double euu = p_form(u, u, ctx);
  const double evv = p_form(v, v, ctx);
  const double rhs = std::pow(std::max(euu, 0.0), (ctx.p - 1.0) / ctx.p) *
                     std::pow(std::max(evv, 0.0), 1.0 / ctx.p);
  r.set(lhs, rhs, rhs - lhs, 1e-12 * std::max(rhs, kTiny));
  if (ctx.regularized())
    r.notes.push_back("regularized weights: Hoelder bound is approximate");
  return r;
}

CheckReport check_monotone(const GridFunction& u, const GridFunction& v,
                           const PFormContext& ctx) {
  require(ctx.p >= 2.0, ErrorCode::Precondition, "check_monotone needs p >= 2");
  CheckReport r = base_report("monotone", ctx);
  const auto dens = monotonicity_density(u, v, ctx);
  const auto& d = ctx.domain();
  const auto gu = carre_du_champ(u, u, *ctx.structure);
  const auto gv = carre_du_champ(v, v, *ctx.structure);

  double worst_rel = std::numeric_limits<double>::infinity();
  std::size_t worst_cell = 0;
  CompensatedSum pairing, scale;
  for (std::size_t c = 0; c < dens.size(); ++c) {
    const double cs = std::pow(std::max(gu[c], 0.0), 0.5 * ctx.p) +
                      std::pow(std::max(gv[c], 0.0), 0.5 * ctx.p);
    const double rel = cs > 0.0 ? dens[c] / cs : 0.0;
    if (rel < worst_rel) {
      worst_rel = rel;
      worst_cell = c;
    }
    pairing.add(dens[c] * d.cell_measure(c));
    scale.add(cs * d.cell_measure(c));
  }
  const double pair = pairing.value();
  const double sc = std::max(scale.value(), kTiny);
  // Per-cell inequality, relative to the cell's own magnitude.
  r.set(pair, 0.0, std::min(worst_rel, pair / sc), 1e-12);
  r.add("pairing", pair);
  r.add("min_cell_relative", worst_rel);
  r.add("scale", sc);
  if (worst_rel < -1e-12) r.witness = "cell " + std::to_string(worst_cell);

  // Zero pairing forces Gamma(u - v) = 0.
  if (std::abs(pair) <= 1e-12 * sc) {
    const auto gd = carre_du_champ(u - v, u - v, *ctx.structure);
    const double gmax = *std::max_element(gd.begin(), gd.end());
    const double gscale =
        std::max({*std::max_element(gu.begin(), gu.end()),
                  *std::max_element(gv.begin(), gv.end()), kTiny});
    r.add("max_gamma_diff", gmax);
    if (gmax > 1e-10 * gscale && gmax > 1e-14) {
      r.passed = false;
      r.witness = "zero pairing with Gamma(u-v) = " + std::to_string(gmax);
    }
  }
  return r;
}

CheckReport check_coercive(const PFormContext& ctx, double k,
                           std::span<const GridFunction> samples) {
  require(k > 0.0 && std::isfinite(k), ErrorCode::InvalidArgument,
          "Poincare constant must be positive");
  CheckReport r = base_report("coercive", ctx);
  const double c = 1.0 + std::pow(std::sqrt(k) * ctx.p / 2.0, ctx.p);
  double worst = std::numeric_limits<double>::infinity();
  double wl = 0.0, wr = 0.0;
  std::size_t wi = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double lhs = std::pow(dp_norm(samples[i], *ctx.structure, ctx.p), ctx.p);
    const double rhs = c * p_form(samples[i], samples[i], ctx);
    const double rel = rhs > 0.0 ? (rhs - lhs) / rhs : (lhs > 0.0 ? -1.0 : 0.0);
    if (rel < worst) {
      worst = rel;
      wl = lhs;
      wr = rhs;
      wi = i;
    }
  }
  if (samples.empty()) worst = 0.0;
  r.set(wl, wr, worst, 1e-12);
  r.add("constant", c);
  r.add("k", k);
  r.add("samples", double(samples.size()));
  if (!r.passed) r.witness = "sample " + std::to_string(wi);
  return r;
}

double estimate_poincare(const GridStructure& s, const Mask& mask) {
  const auto& d = s.domain();
  require(mask.size() == d.node_count(), ErrorCode::ShapeMismatch,
          "mask length does not match node count");
  std::vector<int> free_index(d.node_count(), -1);
  int nfree = 0;
  for (std::size_t j = 0; j < d.node_count(); ++j)
    if (!mask[j]) free_index[j] = nfree++;
  require(nfree < int(d.node_count()), ErrorCode::Precondition,
          "estimate_poincare: empty boundary mask, the form is not coercive");
  require(nfree > 0, ErrorCode::Precondition,
          "estimate_poincare: no free nodes");

  const auto full = gamma_matrix(s);
  std::vector<Eigen::Triplet<double>> trip;
  for (int col = 0; col < full.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(full, col); it; ++it) {
      const int a = free_index[it.row()], b = free_index[it.col()];
      if (a >= 0 && b >= 0) trip.emplace_back(a, b, it.value());
    }
  Eigen::SparseMatrix<double> a(nfree, nfree);
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXd mass(nfree);
  for (std::size_t j = 0; j < d.node_count(); ++j)
    if (free_index[j] >= 0) mass[free_index[j]] = d.node_measure()[j];

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
  require(solver.info() == Eigen::Success && solver.vectorD().minCoeff() > 0.0,
          ErrorCode::Precondition,
          "estimate_poincare: form is singular on the free nodes");

  Eigen::VectorXd x = Eigen::VectorXd::Ones(nfree);
  double lambda = 0.0;
  for (int it = 0; it < 20000; ++it) {
    Eigen::VectorXd y = solver.solve(mass.cwiseProduct(x));
    y /= std::sqrt(y.dot(mass.cwiseProduct(y)));
    const double next = y.dot(a * y);
    x = std::move(y);
    const bool done = it > 2 && std::abs(next - lambda) <= 1e-14 * next;
    lambda = next;
    if (done) break;
  }
  return 1.0 / lambda;
}

CheckReport check_hemicontinuous(const GridFunction& u, const GridFunction& v,
                                 const PFormContext& ctx, int samples) {
  require(samples >= 3, ErrorCode::InvalidArgument,
          "hemicontinuity needs at least 3 samples");
  CheckReport r = base_report("hemicontinuous", ctx);
  const GridFunction dir = u - v;
  auto eval = [&](double t) { return p_form(v + t * GridFunction(dir), dir, ctx); };
  auto max_jump = [&](int n, std::vector<double>& vals) {
    vals.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) vals[std::size_t(i)] = eval(double(i) / (n - 1));
    double j = 0.0;
    for (int i = 0; i + 1 < n; ++i)
      j = std::max(j, std::abs(vals[std::size_t(i) + 1] - vals[std::size_t(i)]));
    return j;
  };
  std::vector<double> coarse, fine;
  const double j1 = max_jump(samples, coarse);
  const double j2 = max_jump(2 * samples - 1, fine);
  double scale = 0.0;
  for (double x : fine) scale = std::max(scale, std::abs(x));
  const double floor = 1e-13 * std::max(scale, kTiny);
  const double ratio = j1 <= floor ? 0.0 : j2 / j1;
  r.set(ratio, 0.75, 0.75 - ratio, 0.0);
  r.add("max_jump_coarse", j1);
  r.add("max_jump_fine", j2);
  if (ctx.p == 2.0) {
    // Linear operator: the samples are affine in t.
    double second = 0.0;
    for (std::size_t i = 1; i + 1 < fine.size(); ++i)
      second = std::max(second, std::abs(fine[i + 1] - 2.0 * fine[i] + fine[i - 1]));
    r.add("max_second_difference", second);
    if (second > 1e-10 * std::max(scale, kTiny) && second > 1e-14) {
      r.passed = false;
      r.witness = "p = 2 samples are not affine in t";
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Contractions

Contraction Contraction::unit() { return truncation(1.0); }

Contraction Contraction::truncation(double alpha) {
  require(alpha > 0.0, ErrorCode::InvalidArgument, "T_alpha needs alpha > 0");
  Contraction t;
  t.kind = alpha == 1.0 ? Kind::Unit : Kind::Truncation;
  t.alpha = alpha;
  t.name = alpha == 1.0 ? "unit" : "truncation";
  t.map = [alpha](double x) { return std::min(std::max(x, 0.0), alpha); };
  return t;
}

Contraction Contraction::negative_part() {
  Contraction t;
  t.kind = Kind::NegativePart;
  t.name = "negative_part";
  t.map = [](double x) { return std::min(x, 0.0); };
  return t;
}

Contraction Contraction::smooth(std::string name,
                                std::function<double(double)> map,
                                std::function<double(double)> dmap) {
  require(map && dmap, ErrorCode::InvalidArgument,
          "smooth contraction needs T and T'");
  require(std::abs(map(0.0)) <= 1e-14, ErrorCode::InvalidArgument,
          "smooth contraction needs T(0) = 0");
  for (int i = -4000; i <= 4000; ++i) {
    const double x = 0.01 * i;
    if (std::abs(dmap(x)) > 1.0 + 1e-12)
      throw Error(ErrorCode::InvalidArgument,
                  "invalid contraction: |T'(" + std::to_string(x) + ")| > 1");
  }
  Contraction t;
  t.kind = Kind::Smooth;
  t.name = std::move(name);
  t.map = std::move(map);
  t.derivative = std::move(dmap);
  return t;
}

GridFunction Contraction::apply(const GridFunction& u) const {
  GridFunction r(u);
  for (auto& x : r.values()) x = map(x);
  return r;
}

namespace {

// Cells whose corner values all lie (weakly) on one side of every threshold.
std::size_t straddling_cells(const GridFunction& u, const GridDomain& d,
                             const std::vector<double>& thresholds) {
  std::size_t count = 0;
  for (std::size_t c = 0; c < d.cell_count(); ++c) {
    const auto corners = d.cell_corners(c);
    for (double t : thresholds) {
      bool below = false, above = false;
      for (auto node : corners) {
        below |= u[node] < t;
        above |= u[node] > t;
      }
      if (below && above) {
        ++count;
        break;
      }
    }
  }
  return count;
}

struct PairingTerms {
  double value = 0.0;
  double abs_mass = 0.0;
};

// E^p(a, z) - E^p(b, z) accumulated per cell.
PairingTerms pairing_difference(const GridFunction& a, const GridFunction& b,
                                const GridFunction& z, const PFormContext& ctx) {
  const auto& s = *ctx.structure;
  const auto& d = s.domain();
  std::array<double, 3> ga{}, gb{}, gz{};
  CompensatedSum val, mass;
  for (std::size_t c = 0; c < d.cell_count(); ++c) {
    s.cell_gradient(a.values(), c, ga.data());
    s.cell_gradient(b.values(), c, gb.data());
    s.cell_gradient(z.values(), c, gz.data());
    const double gaz = s.cell_gamma(c, ga.data(), gz.data());
    const double gbz = s.cell_gamma(c, gb.data(), gz.data());
    const double ta =
        gaz == 0.0 ? 0.0 : weight_of(s.cell_gamma(c, ga.data(), ga.data()), ctx) * gaz;
    const double tb =
        gbz == 0.0 ? 0.0 : weight_of(s.cell_gamma(c, gb.data(), gb.data()), ctx) * gbz;
    const double m = d.cell_measure(c);
    val.add((ta - tb) * m);
    mass.add((std::abs(ta) + std::abs(tb)) * m);
  }
  return {val.value(), mass.value()};
}

}  // namespace

CheckReport check_contraction_operates(const GridFunction& u,
                                       const GridFunction& v,
                                       const PFormContext& ctx,
                                       const Contraction& t) {
  check_pair(u, v, ctx, "check_contraction_operates");
  CheckReport r = base_report("contraction", ctx);
  r.notes.push_back("kind=" + t.name);
  const auto& d = ctx.domain();
  const GridFunction tu = t.apply(u);
  const GridFunction z = u - tu;

  PairingTerms terms;
  bool exact = false;
  if (t.kind == Contraction::Kind::Smooth) {
    terms = pairing_difference(u + tu + v, v, z, ctx);
    // The per-cell chain rule is exact when every cell has a single edge.
    exact = d.dim() == 1;
    r.add("straddling_cells", 0.0);
  } else {
    std::vector<double> thresholds{0.0};
    if (t.kind != Contraction::Kind::NegativePart) thresholds.push_back(t.alpha);
    terms = pairing_difference(v + tu, v, z, ctx);
    const auto straddle = straddling_cells(u, d, thresholds);
    exact = straddle == 0;
    r.add("straddling_cells", double(straddle));
  }
  const double h = d.max_spacing();
  const double tol =
      exact ? 1e-12 * std::max(terms.abs_mass, kTiny) : h * terms.abs_mass;
  r.set(terms.value, 0.0, terms.value, tol);
  r.add("C", terms.abs_mass);
  r.add("h", h);
  r.notes.push_back(exact ? "exact" : "tolerance C*h");
  if (!r.passed) r.witness = "pairing " + std::to_string(terms.value);
  return r;
}

std::optional<std::size_t> pure_potential_violation(const GridFunction& u,
                                                    const PFormContext& ctx) {
  const Functional f = apply_Lp(u, ctx);
  const double tol = 1e-10 * f.sup_norm();
  for (std::size_t j = 0; j < f.coeffs.size(); ++j)
    if (!f.excluded[j] && f.coeffs[j] < -tol) return j;
  return std::nullopt;
}

SuiteReport check_D1_D2(const GridFunction& u, const GridFunction& v,
                        double alpha, const PFormContext& ctx) {
  check_pair(u, v, ctx, "check_D1_D2");
  require(alpha >= 0.0, ErrorCode::InvalidArgument, "D2 needs alpha >= 0");
  for (const auto* w : {&u, &v})
    if (auto bad = pure_potential_violation(*w, ctx))
      throw Error(ErrorCode::Precondition,
                  std::string(w == &u ? "u" : "v") +
                      " is not a pure potential: negative L_p coefficient at node " +
                      std::to_string(*bad));

  const auto& d = ctx.domain();
  const double h = d.max_spacing();
  SuiteReport suite{"D1D2", {}};
  for (int which = 0; which < 2; ++which) {
    const double shift = which == 0 ? 0.0 : alpha;
    const GridFunction vs = add_constant(v, shift);
    const GridFunction low = meet(u, vs);
    const GridFunction z = u - low;
    CheckReport r = base_report(which == 0 ? "D1" : "D2", ctx);
    const auto terms = pairing_difference(low, GridFunction(d), z, ctx);
    // Aligned cells reduce the pairing to <L_p (v + shift), (u - v - shift)+>,
    // which the pure-potential property bounds below.
    const auto straddle = straddling_cells(u - vs, d, {0.0});
    const Functional fv = apply_Lp(v, ctx);
    double zl1 = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) zl1 += std::abs(z[j]);
    double tol = 1e-10 * fv.sup_norm() * zl1 + 1e-12 * terms.abs_mass;
    if (straddle > 0) tol += h * terms.abs_mass;
    r.set(terms.value, 0.0, terms.value, tol);
    r.add("alpha", shift);
    r.add("straddling_cells", double(straddle));
    r.add("C", terms.abs_mass);
    r.add("h", h);
    r.notes.push_back(straddle == 0 ? "exact" : "tolerance C*h");
    suite.checks.push_back(std::move(r));
  }
  return suite;
}

}  // namespace npf
