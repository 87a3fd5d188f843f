// SPDX-License-Identifier: Apache-2.0
#include "npform/intrinsic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <queue>

#include "npform/error.hpp"
#include "npform/parallel.hpp"
#include "npform/solver.hpp"

namespace npf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int gcd3(int a, int b, int c) {
  return std::gcd(std::gcd(std::abs(a), std::abs(b)), std::abs(c));
}

// Per-cell (2G)^{-1}, row-major dim x dim.
std::vector<double> inverse_metric(const GridStructure& s) {
  const std::size_t n = s.dim();
  const std::size_t cells = s.domain().cell_count();
  std::vector<double> out(cells * n * n);
  for (std::size_t c = 0; c < cells; ++c) {
    const auto g = s.field().matrix(c);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(Eigen::Index(i), Eigen::Index(j)) = 2.0 * g[i * n + j];
    const Eigen::MatrixXd inv = m.inverse();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        out[c * n * n + i * n + j] = inv(Eigen::Index(i), Eigen::Index(j));
  }
  return out;
}

// Edge lengths of every stencil offset from every node; kInf marks offsets
// that leave the grid.
class EdgeTable {
 public:
  EdgeTable(const GridStructure& s, Stencil st)
      : s_(s), offsets_(stencil_offsets(st, s.dim())), minv_(inverse_metric(s)) {}

  const std::vector<std::array<int, 3>>& offsets() const { return offsets_; }

  // Length of the edge node -> node + o, or kInf when the target is outside.
  double length(const std::array<std::size_t, 3>& a, const std::array<int, 3>& o,
                std::size_t& target) const {
    const auto& d = s_.domain();
    const std::size_t n = d.dim();
    std::array<std::size_t, 3> b{};
    for (std::size_t i = 0; i < n; ++i) {
      const long long v = (long long)a[i] + o[i];
      if (v < 0 || v >= (long long)d.shape()[i]) return kInf;
      b[i] = std::size_t(v);
    }
    target = d.node_index(b);
    double e[3] = {0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) e[i] = o[i] * d.spacing(i);
    // Cells touched by the segment: along axis i the lower cell index runs
    // over [a + min(0, o), a + max(0, o) - 1], or {a - 1, a} when o_i = 0.
    long long lo[3], hi[3];
    for (std::size_t i = 0; i < n; ++i) {
      if (o[i] == 0) {
        lo[i] = (long long)a[i] - 1;
        hi[i] = (long long)a[i];
      } else {
        lo[i] = (long long)a[i] + std::min(0, o[i]);
        hi[i] = (long long)a[i] + std::max(0, o[i]) - 1;
      }
      lo[i] = std::max(lo[i], 0LL);
      hi[i] = std::min(hi[i], (long long)d.shape()[i] - 2);
    }
    double best = 0.0;
    std::array<std::size_t, 3> cm{};
    for (long long x = lo[0]; x <= hi[0]; ++x) {
      cm[0] = std::size_t(x);
      for (long long y = n > 1 ? lo[1] : 0; y <= (n > 1 ? hi[1] : 0); ++y) {
        if (n > 1) cm[1] = std::size_t(y);
        for (long long z = n > 2 ? lo[2] : 0; z <= (n > 2 ? hi[2] : 0); ++z) {
          if (n > 2) cm[2] = std::size_t(z);
          const double* m = minv_.data() + d.cell_index(cm) * n * n;
          double q = 0.0;
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) q += e[i] * m[i * n + j] * e[j];
          best = std::max(best, q);
        }
      }
    }
    return std::sqrt(best);
  }

 private:
  const GridStructure& s_;
  std::vector<std::array<int, 3>> offsets_;
  std::vector<double> minv_;
};

std::vector<double> dijkstra(std::size_t x0, const GridStructure& s, const EdgeTable& t) {
  const auto& d = s.domain();
  std::vector<double> dist(d.node_count(), kInf);
  std::vector<std::uint8_t> done(d.node_count(), 0);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[x0] = 0.0;
  heap.emplace(0.0, x0);
  while (!heap.empty()) {
    const auto [dj, j] = heap.top();
    heap.pop();
    if (done[j]) continue;
    done[j] = 1;
    const auto a = d.node_multi(j);
    for (const auto& o : t.offsets()) {
      std::size_t k = 0;
      const double l = t.length(a, o, k);
      if (l == kInf || done[k]) continue;
      const double cand = dj + l;
      if (cand < dist[k]) {
        dist[k] = cand;
        heap.emplace(cand, k);
      }
    }
  }
  for (double v : dist)
    require(v < kInf, ErrorCode::Precondition, "grid graph is disconnected");
  return dist;
}

// Largest angular gap between the stencil directions mapped by L^T, where
// L L^T = (2G)^{-1}; the graph overestimates by 1 / cos(gap / 2).
double planar_metrication(const std::vector<std::array<int, 3>>& offs, const GridDomain& d,
                          const double* minv) {
  Eigen::Matrix2d m;
  m << minv[0], minv[1], minv[2], minv[3];
  const Eigen::Matrix2d lt = Eigen::LLT<Eigen::Matrix2d>(m).matrixL().transpose();
  std::vector<double> ang;
  ang.reserve(offs.size());
  for (const auto& o : offs) {
    const Eigen::Vector2d y = lt * Eigen::Vector2d(o[0] * d.spacing(0), o[1] * d.spacing(1));
    ang.push_back(std::atan2(y[1], y[0]));
  }
  std::sort(ang.begin(), ang.end());
  double gap = ang.front() + 2 * M_PI - ang.back();
  for (std::size_t i = 1; i < ang.size(); ++i) gap = std::max(gap, ang[i] - ang[i - 1]);
  return 1.0 / std::cos(0.5 * gap) - 1.0;
}

// Reference grid with 2k + 1 nodes per axis centred on the source.
std::pair<GridDomain, std::size_t> reference_lattice(std::size_t dim, std::size_t k,
                                                     const std::vector<double>& h) {
  std::vector<std::pair<double, double>> ext;
  std::vector<std::size_t> shape;
  for (std::size_t i = 0; i < dim; ++i) {
    ext.emplace_back(-double(k) * h[i], double(k) * h[i]);
    shape.push_back(2 * k + 1);
  }
  GridDomain ref(ext, shape);
  const std::size_t centre = ref.node_index({k, dim > 1 ? k : 0, dim > 2 ? k : 0});
  return {std::move(ref), centre};
}

double isotropic_3d_metrication(Stencil st) {
  static double cache[2] = {-1.0, -1.0};
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  double& slot = cache[st == Stencil::N8 ? 0 : 1];
  if (slot >= 0.0) return slot;
  auto [ref, centre] = reference_lattice(3, 8, {1.0, 1.0, 1.0});
  GridStructure s(ref, CoefficientField::scalar(3, ref.cell_count(), 0.5));
  const EdgeTable t(s, st);
  const auto dist = dijkstra(centre, s, t);
  double worst = 0.0;
  for (std::size_t j = 0; j < dist.size(); ++j) {
    if (j == centre) continue;
    const auto x = ref.node_coords(j);
    worst = std::max(worst, dist[j] / std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]));
  }
  slot = worst - 1.0;
  return slot;
}

void require_same(const GridFunction& u, const GridDomain& d, const char* what) {
  require(u.size() == d.node_count() && u.shape() == d.shape(), ErrorCode::ShapeMismatch,
          std::string(what) + " does not match the grid");
}

// Shared evaluation of the Gamma-form inequality for a given phi.
struct CaccioppoliCore {
  double lhs = 0.0;        // (sum phi^p Gamma(u)^{p/2} m)^{1/p}
  double rhs = 0.0;        // p (sum Gamma(phi)^{p/2} |u - c|^p m)^{1/p}
  double c = 0.0;
  double residual = 0.0;   // normalized residual on supp phi
  double threshold = 0.0;  // certification threshold
  double residual_term = 0.0;
  double h_term = 0.0;     // h max|grad phi|
  std::size_t support = 0;
  std::vector<double> gamma_u, gamma_phi, ubar, phibar;
};

CaccioppoliCore caccioppoli_core(const GridFunction& u, const GridFunction& phi,
                                 std::optional<double> c, const PFormContext& ctx,
                                 const CaccioppoliOptions& opts,
                                 const Mask* mean_cells = nullptr) {
  const auto& s = *ctx.structure;
  const auto& d = s.domain();
  require_same(u, d, "u");
  require_same(phi, d, "phi");
  require(opts.certify_rel >= 0.0, ErrorCode::InvalidArgument, "certify_rel must be >= 0");
  for (double v : phi.values())
    require(std::isfinite(v) && v >= 0.0, ErrorCode::InvalidArgument,
            "phi must be finite and nonnegative");
  for (double v : u.values())
    require(std::isfinite(v), ErrorCode::InvalidArgument, "u must be finite");
  const double p = ctx.p;
  CaccioppoliCore k;
  const GridFunction uf(d, u.values());
  const GridFunction pf(d, phi.values());
  k.gamma_u = carre_du_champ(uf, uf, s);
  k.gamma_phi = carre_du_champ(pf, pf, s);
  k.ubar = cell_means(uf, d);
  k.phibar = cell_means(pf, d);

  Mask support(d.node_count(), 0);
  for (std::size_t j = 0; j < d.node_count(); ++j)
    if (phi[j] > 0.0) support[j] = 1;
  k.support = std::size_t(std::count(support.begin(), support.end(), 1));
  require(k.support > 0, ErrorCode::Precondition, "phi vanishes identically");

  double gmax = 0.0;
  for (double g : k.gamma_u) gmax = std::max(gmax, g);
  double hmin = d.spacing(0);
  for (std::size_t i = 1; i < d.dim(); ++i) hmin = std::min(hmin, d.spacing(i));
  k.threshold = opts.certify_rel * std::pow(gmax, 0.5 * (p - 1)) / hmin;
  const auto r = lp_coefficients(uf, ctx);
  const auto& mu = d.node_measure();
  for (std::size_t j = 0; j < r.size(); ++j)
    if (support[j]) k.residual = std::max(k.residual, std::abs(r[j]) / mu[j]);
  if (!(k.residual <= k.threshold))
    throw Error(ErrorCode::Precondition,
                "u is not harmonic on supp phi: normalized residual " +
                    std::to_string(k.residual) + " exceeds " + std::to_string(k.threshold));

  if (c) {
    require(std::isfinite(*c), ErrorCode::InvalidArgument, "c must be finite");
    k.c = *c;
  } else {
    CompensatedSum num, den;
    for (std::size_t cell = 0; cell < d.cell_count(); ++cell) {
      bool in = false;
      if (mean_cells) {
        in = (*mean_cells)[cell] != 0;
      } else {
        for (std::size_t j : d.cell_corners(cell)) in = in || support[j];
      }
      if (!in) continue;
      num.add(k.ubar[cell] * d.cell_measure(cell));
      den.add(d.cell_measure(cell));
    }
    k.c = den.value() > 0.0 ? num.value() / den.value() : 0.0;
  }

  CompensatedSum left, right, res;
  for (std::size_t cell = 0; cell < d.cell_count(); ++cell) {
    const double m = d.cell_measure(cell);
    left.add(std::pow(k.phibar[cell], p) * std::pow(k.gamma_u[cell], 0.5 * p) * m);
    right.add(std::pow(k.gamma_phi[cell], 0.5 * p) * std::pow(std::abs(k.ubar[cell] - k.c), p) *
              m);
  }
  for (std::size_t j = 0; j < r.size(); ++j)
    if (support[j]) res.add(std::abs(r[j]) * std::pow(phi[j], p) * std::abs(u[j] - k.c));
  k.lhs = std::pow(left.value(), 1.0 / p);
  k.rhs = p * std::pow(right.value(), 1.0 / p);
  k.residual_term = std::pow(res.value(), 1.0 / p);

  const auto g = gradient(pf, d);
  double gphi = 0.0;
  for (std::size_t cell = 0; cell < d.cell_count(); ++cell) {
    double q = 0.0;
    for (double x : g.at(cell)) q += x * x;
    gphi = std::max(gphi, std::sqrt(q));
  }
  k.h_term = d.max_spacing() * gphi;
  return k;
}

CheckReport base_report(const char* name, const PFormContext& ctx, const CaccioppoliCore& k) {
  CheckReport r;
  r.check = name;
  r.p = ctx.p;
  r.grid = ctx.domain().shape();
  r.add("c", k.c);
  r.add("residual", k.residual);
  r.add("certify_threshold", k.threshold);
  r.add("residual_term", k.residual_term);
  r.add("h_term", k.h_term);
  r.add("support_nodes", double(k.support));
  return r;
}

}  // namespace

const char* stencil_name(Stencil s) { return s == Stencil::N8 ? "n8" : "n16"; }

Stencil parse_stencil(const std::string& name) {
  if (name == "n8" || name == "8") return Stencil::N8;
  if (name == "n16" || name == "16") return Stencil::N16;
  throw Error(ErrorCode::InvalidArgument, "unknown stencil '" + name + "' (use n8 or n16)");
}

std::vector<std::array<int, 3>> stencil_offsets(Stencil s, std::size_t dim) {
  require(dim >= 1 && dim <= 3, ErrorCode::InvalidArgument, "dimension must be 1, 2 or 3");
  const int k = s == Stencil::N8 ? 1 : 2;
  const int ky = dim > 1 ? k : 0, kz = dim > 2 ? k : 0;
  std::vector<std::array<int, 3>> out;
  for (int x = -k; x <= k; ++x)
    for (int y = -ky; y <= ky; ++y)
      for (int z = -kz; z <= kz; ++z)
        if ((x || y || z) && gcd3(x, y, z) == 1) out.push_back({x, y, z});
  return out;
}

double metrication_constant(Stencil st, const GridStructure& s) {
  const auto& d = s.domain();
  if (d.dim() == 1) return 0.0;
  if (d.dim() == 3) return isotropic_3d_metrication(st);
  const auto offs = stencil_offsets(st, 2);
  const auto minv = inverse_metric(s);
  double worst = 0.0;
  for (std::size_t c = 0; c < d.cell_count(); ++c)
    worst = std::max(worst, planar_metrication(offs, d, minv.data() + 4 * c));
  return worst;
}

double cell_metrication_constant(Stencil st, const GridDomain& d) {
  if (d.dim() == 1) return 0.0;
  std::vector<double> h;
  for (std::size_t i = 0; i < d.dim(); ++i) h.push_back(d.spacing(i));
  auto [ref, centre] = reference_lattice(d.dim(), d.dim() == 2 ? 12 : 6, h);
  GridStructure s(ref, CoefficientField::identity(d.dim(), ref.cell_count()));
  const EdgeTable t(s, st);
  const GridFunction rho(ref, dijkstra(centre, s, t));
  double g = 0.0;
  for (double v : carre_du_champ(rho, rho, s)) g = std::max(g, v);
  return std::sqrt(g) - 1.0;
}

Mask MetricField::ball(double r) const {
  Mask m(distance.size(), 0);
  for (std::size_t j = 0; j < distance.size(); ++j) m[j] = distance[j] < r;
  return m;
}

Mask MetricField::ball_cells(const GridDomain& d, double r) const {
  require(distance.size() == d.node_count(), ErrorCode::ShapeMismatch,
          "metric field does not match the grid");
  Mask m(d.cell_count(), 0);
  const double inv = 1.0 / double(d.corners_per_cell());
  for (std::size_t c = 0; c < d.cell_count(); ++c) {
    double mean = 0.0;
    for (std::size_t j : d.cell_corners(c)) mean += distance[j];
    m[c] = mean * inv < r;
  }
  return m;
}

MetricField intrinsic_distance(std::size_t x0, const GridStructure& s, Stencil st) {
  require(x0 < s.domain().node_count(), ErrorCode::InvalidArgument,
          "source node " + std::to_string(x0) + " is outside the grid");
  const EdgeTable t(s, st);
  MetricField f;
  f.source = x0;
  f.stencil = st;
  f.distance = dijkstra(x0, s, t);
  f.metrication = metrication_constant(st, s);
  f.cell_metrication = cell_metrication_constant(st, s.domain());
  return f;
}

std::vector<MetricField> intrinsic_distances(const std::vector<std::size_t>& sources,
                                             const GridStructure& s, Stencil st) {
  for (std::size_t x0 : sources)
    require(x0 < s.domain().node_count(), ErrorCode::InvalidArgument,
            "source node " + std::to_string(x0) + " is outside the grid");
  const EdgeTable t(s, st);
  const double metr = metrication_constant(st, s);
  const double cell = cell_metrication_constant(st, s.domain());
  std::vector<MetricField> out(sources.size());
  parallel_for(sources.size(), [&](std::size_t i) {
    out[i].source = sources[i];
    out[i].stencil = st;
    out[i].distance = dijkstra(sources[i], s, t);
    out[i].metrication = metr;
    out[i].cell_metrication = cell;
  });
  return out;
}

GridFunction cutoff_rho(const MetricField& rho, double r, const GridDomain& d) {
  require(r > 0.0 && std::isfinite(r), ErrorCode::InvalidArgument, "cutoff radius must be > 0");
  require(rho.distance.size() == d.node_count(), ErrorCode::ShapeMismatch,
          "metric field does not match the grid");
  std::vector<double> v(d.node_count());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = std::max(r - rho[j], 0.0);
  return GridFunction(d, std::move(v));
}

GridFunction cutoff_rho(std::size_t x0, double r, const GridStructure& s, Stencil st) {
  require(r > 0.0 && std::isfinite(r), ErrorCode::InvalidArgument, "cutoff radius must be > 0");
  return cutoff_rho(intrinsic_distance(x0, s, st), r, s.domain());
}

GridFunction truncation_function(const MetricField& rho, double r, double R,
                                 const GridDomain& d) {
  require(r > 0.0 && R > r && std::isfinite(R), ErrorCode::InvalidArgument,
          "truncation function needs 0 < r < R");
  require(R - r > 1e-9 * R, ErrorCode::Precondition,
          "truncation function is degenerate: R - r is below 1e-9 R");
  require(rho.distance.size() == d.node_count(), ErrorCode::ShapeMismatch,
          "metric field does not match the grid");
  for (std::size_t j = 0; j < d.node_count(); ++j)
    if (d.on_boundary(j) && rho[j] <= R)
      throw Error(ErrorCode::Precondition,
                  "closed ball B_R reaches the domain boundary at node " + std::to_string(j));
  std::vector<double> v(d.node_count());
  const double w = R - r;
  for (std::size_t j = 0; j < v.size(); ++j)
    v[j] = rho[j] <= r ? 1.0 : std::min(std::max(R - rho[j], 0.0), w) / w;
  return GridFunction(d, std::move(v));
}

GridFunction truncation_function(std::size_t x0, double r, double R, const GridStructure& s,
                                 Stencil st) {
  require(r > 0.0 && R > r, ErrorCode::InvalidArgument, "truncation function needs 0 < r < R");
  return truncation_function(intrinsic_distance(x0, s, st), r, R, s.domain());
}

GridFunction euclidean_bump(const GridDomain& d, const Point& x0, double r, double R) {
  require(r >= 0.0 && R > r, ErrorCode::InvalidArgument, "bump needs 0 <= r < R");
  return GridFunction::sample(d, [&](const Point& x) {
    double q = 0.0;
    for (std::size_t i = 0; i < d.dim(); ++i) q += (x[i] - x0[i]) * (x[i] - x0[i]);
    return std::clamp((R - std::sqrt(q)) / (R - r), 0.0, 1.0);
  });
}

double max_cell_gamma(const GridFunction& u, const GridStructure& s) {
  const GridFunction f(s.domain(), u.values());
  double g = 0.0;
  for (double v : carre_du_champ(f, f, s)) g = std::max(g, v);
  return g;
}

CheckReport check_caccioppoli(const GridFunction& u, const GridFunction& phi,
                              std::optional<double> c, const PFormContext& ctx,
                              const CaccioppoliOptions& opts) {
  const auto k = caccioppoli_core(u, phi, c, ctx, opts);
  auto r = base_report("caccioppoli", ctx, k);
  r.add("constant", ctx.p);
  const double tol = k.h_term * std::max(k.lhs, k.rhs) + k.residual_term;
  r.set(k.lhs, k.rhs, k.rhs - k.lhs, tol);
  return r;
}

CheckReport check_caccioppoli_ball(const GridFunction& u, std::size_t x0, double r, double R,
                                   std::optional<double> c, const PFormContext& ctx,
                                   const CaccioppoliOptions& opts) {
  const auto& s = *ctx.structure;
  const auto& d = s.domain();
  const auto rho = intrinsic_distance(x0, s, opts.stencil);
  const auto phi = truncation_function(rho, r, R, d);
  const auto inner = rho.ball_cells(d, r);
  const auto outer = rho.ball_cells(d, R);
  const auto k = caccioppoli_core(u, phi, c, ctx, opts, &outer);
  const double p = ctx.p;

  CompensatedSum left, slop_in, right, slop_out;
  double gphi = 0.0;
  for (std::size_t cell = 0; cell < d.cell_count(); ++cell) {
    const double m = d.cell_measure(cell);
    const double gu = std::pow(k.gamma_u[cell], 0.5 * p);
    const double du = std::pow(std::abs(k.ubar[cell] - k.c), p);
    if (inner[cell]) {
      left.add(gu * m);
      slop_in.add((1.0 - std::pow(k.phibar[cell], p)) * gu * m);
    }
    if (outer[cell]) {
      right.add(du * m);
    } else {
      slop_out.add(std::pow(k.gamma_phi[cell], 0.5 * p) * du * m);
    }
    gphi = std::max(gphi, k.gamma_phi[cell]);
  }
  const double lhs = std::pow(left.value(), 1.0 / p);
  const double constant = p / (R - r);
  const double rhs = constant * std::pow(right.value(), 1.0 / p);
  // Lipschitz excess of phi over 1 / (R - r), from metrication.
  const double excess = std::max(0.0, std::sqrt(gphi) * (R - r) - 1.0);
  const double core_tol = k.h_term * std::max(k.lhs, k.rhs) + k.residual_term;
  const double tol = core_tol + std::pow(slop_in.value(), 1.0 / p) +
                     p * std::pow(slop_out.value(), 1.0 / p) + excess * rhs;

  auto rep = base_report("caccioppoli_ball", ctx, k);
  rep.add("constant", constant);
  rep.add("r", r);
  rep.add("R", R);
  rep.add("source", double(x0));
  rep.add("metrication", rho.metrication);
  rep.add("cell_metrication", rho.cell_metrication);
  rep.add("lipschitz_excess", excess);
  rep.add("phi_lhs", k.lhs);
  rep.add("phi_rhs", k.rhs);
  rep.notes.push_back(std::string("intrinsic balls, stencil ") + stencil_name(opts.stencil));
  rep.set(lhs, rhs, rhs - lhs, tol);
  return rep;
}

CheckReport check_caccioppoli_euclidean(const GridFunction& u, const GridFunction& phi,
                                        std::optional<double> c, double alpha, double beta,
                                        const PFormContext& ctx,
                                        const CaccioppoliOptions& opts) {
  require(alpha > 0.0 && beta >= alpha && std::isfinite(beta), ErrorCode::InvalidArgument,
          "ellipticity constants need 0 < alpha <= beta");
  const auto& s = *ctx.structure;
  const auto& d = s.domain();
  for (std::size_t cell = 0; cell < d.cell_count(); ++cell) {
    const auto [lo, hi] = s.field().eigen_range(cell);
    require(lo >= alpha * (1 - 1e-12) && hi <= beta * (1 + 1e-12), ErrorCode::Precondition,
            "G(c) has eigenvalues outside [alpha, beta] at cell " + std::to_string(cell));
  }
  const auto k = caccioppoli_core(u, phi, c, ctx, opts);
  const double p = ctx.p;
  const auto gu = gradient(GridFunction(d, u.values()), d);
  const auto gp = gradient(GridFunction(d, phi.values()), d);
  CompensatedSum left, right;
  for (std::size_t cell = 0; cell < d.cell_count(); ++cell) {
    double a = 0.0, b = 0.0;
    for (double x : gu.at(cell)) a += x * x;
    for (double x : gp.at(cell)) b += x * x;
    const double m = d.cell_measure(cell);
    left.add(std::pow(k.phibar[cell], p) * std::pow(a, 0.5 * p) * m);
    right.add(std::pow(b, 0.5 * p) * std::pow(std::abs(k.ubar[cell] - k.c), p) * m);
  }
  const double constant = p * std::sqrt(beta / alpha);
  const double lhs = std::pow(left.value(), 1.0 / p);
  const double rhs = constant * std::pow(right.value(), 1.0 / p);
  // The Gamma-form tolerance carried through Gamma(u) >= 2 alpha |grad u|^2.
  const double tol =
      (k.h_term * std::max(k.lhs, k.rhs) + k.residual_term) / std::sqrt(2.0 * alpha);
  auto rep = base_report("caccioppoli_euclidean", ctx, k);
  rep.add("constant", constant);
  rep.add("alpha", alpha);
  rep.add("beta", beta);
  rep.set(lhs, rhs, rhs - lhs, tol);
  return rep;
}

}  // namespace npf
