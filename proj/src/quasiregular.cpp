// SPDX-License-Identifier: Apache-2.0
#include "npform/quasiregular.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>

#include "npform/error.hpp"
#include "npform/solver.hpp"

namespace npf {

namespace {

using Mat = Eigen::MatrixXd;

Mat to_mat(std::span<const double> v, std::size_t n) {
  Mat m = Mat::Zero(Eigen::Index(n), Eigen::Index(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(Eigen::Index(i), Eigen::Index(j)) = v[i * n + j];
  return m;
}

void put_mat(const Mat& m, double* out) {
  const std::size_t n = std::size_t(m.rows());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = m(Eigen::Index(i), Eigen::Index(j));
}

double norm(const Point& x, std::size_t n) {
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) q += x[i] * x[i];
  return std::sqrt(q);
}

// Closed-form Df at x for the analytic kinds.
void analytic_df(const MappingSpec& f, const Point& x, std::size_t n, double* out) {
  switch (f.kind) {
    case MappingSpec::Kind::Power: {
      const std::complex<double> z(x[0], x[1]);
      const std::complex<double> w = double(f.power) * std::pow(z, f.power - 1);
      out[0] = w.real();
      out[1] = -w.imag();
      out[2] = w.imag();
      out[3] = w.real();
      return;
    }
    case MappingSpec::Kind::Radial: {
      const double r = norm(x, n);
      if (r == 0.0) {
        std::fill(out, out + n * n, 0.0);
        return;
      }
      const double s = std::pow(r, f.stretch - 1.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          out[i * n + j] = s * ((i == j ? 1.0 : 0.0) + (f.stretch - 1.0) * x[i] * x[j] / (r * r));
      return;
    }
    case MappingSpec::Kind::Linear:
      std::copy(f.matrix.begin(), f.matrix.end(), out);
      return;
    case MappingSpec::Kind::Sampled:
      break;
  }
  throw Error(ErrorCode::Internal, "analytic derivative requested for sampled data");
}

CheckReport make_check(const std::string& name, const GridDomain& d, double p) {
  CheckReport r;
  r.check = name;
  r.p = p;
  r.grid = d.shape();
  return r;
}

}  // namespace

MappingSpec MappingSpec::make_power(int k) {
  MappingSpec f;
  f.kind = Kind::Power;
  f.power = k;
  return f;
}

MappingSpec MappingSpec::make_radial(double a) {
  MappingSpec f;
  f.kind = Kind::Radial;
  f.stretch = a;
  return f;
}

MappingSpec MappingSpec::make_linear(std::vector<double> a) {
  MappingSpec f;
  f.kind = Kind::Linear;
  f.matrix = std::move(a);
  return f;
}

MappingSpec MappingSpec::make_sampled(std::vector<double> values) {
  MappingSpec f;
  f.kind = Kind::Sampled;
  f.samples = std::move(values);
  return f;
}

const char* mapping_kind_name(MappingSpec::Kind k) {
  switch (k) {
    case MappingSpec::Kind::Power:
      return "power";
    case MappingSpec::Kind::Radial:
      return "radial_stretch";
    case MappingSpec::Kind::Linear:
      return "linear";
    case MappingSpec::Kind::Sampled:
      return "sampled";
  }
  return "unknown";
}

MappingSpec::Kind parse_mapping_kind(const std::string& name) {
  if (name == "power" || name == "analytic_power") return MappingSpec::Kind::Power;
  if (name == "radial_stretch" || name == "radial") return MappingSpec::Kind::Radial;
  if (name == "linear") return MappingSpec::Kind::Linear;
  if (name == "sampled") return MappingSpec::Kind::Sampled;
  throw Error(ErrorCode::InvalidArgument,
              "unknown mapping kind '" + name + "' (power, radial_stretch, linear, sampled)");
}

void MappingSpec::validate(const GridDomain& d) const {
  const std::size_t n = d.dim();
  switch (kind) {
    case Kind::Power:
      require(n == 2, ErrorCode::InvalidArgument, "power maps need a 2-D domain");
      require(power != 0, ErrorCode::InvalidArgument, "power map exponent must be nonzero");
      break;
    case Kind::Radial:
      require(n >= 2, ErrorCode::InvalidArgument, "radial stretch needs dimension >= 2");
      require(stretch > 0.0 && std::isfinite(stretch), ErrorCode::InvalidArgument,
              "radial stretch exponent a must be > 0");
      break;
    case Kind::Linear:
      require(matrix.size() == n * n, ErrorCode::ShapeMismatch,
              "linear map needs " + std::to_string(n * n) + " matrix entries");
      for (double v : matrix)
        require(std::isfinite(v), ErrorCode::InvalidArgument, "linear map entries must be finite");
      break;
    case Kind::Sampled:
      require(samples.size() == d.node_count() * n, ErrorCode::ShapeMismatch,
              "sampled map needs " + std::to_string(d.node_count() * n) + " values, got " +
                  std::to_string(samples.size()));
      for (double v : samples)
        require(std::isfinite(v), ErrorCode::InvalidArgument, "sampled map values must be finite");
      break;
  }
  require(inner_radius >= 0.0 && outer_radius > inner_radius, ErrorCode::InvalidArgument,
          "analysis annulus needs 0 <= inner < outer");
}

std::pair<double, double> MappingSpec::radii(const GridDomain& d) const {
  double reach = 0.0;
  for (std::size_t i = 0; i < d.dim(); ++i) {
    const double e = std::max(std::abs(d.lower(i)), std::abs(d.upper(i)));
    reach += e * e;
  }
  const double outer = std::min(outer_radius, std::sqrt(reach) * (1 + 1e-12));
  double inner = inner_radius;
  if (inner <= 0.0 && kind == Kind::Radial) inner = 0.1 * outer;
  return {inner, outer};
}

std::vector<double> evaluate_mapping(const MappingSpec& f, const Point& x, std::size_t n) {
  std::vector<double> out(n, 0.0);
  switch (f.kind) {
    case MappingSpec::Kind::Power: {
      const auto w = std::pow(std::complex<double>(x[0], x[1]), f.power);
      out[0] = w.real();
      out[1] = w.imag();
      return out;
    }
    case MappingSpec::Kind::Radial: {
      const double r = norm(x, n);
      const double s = r == 0.0 ? 0.0 : std::pow(r, f.stretch - 1.0);
      for (std::size_t i = 0; i < n; ++i) out[i] = s * x[i];
      return out;
    }
    case MappingSpec::Kind::Linear:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i] += f.matrix[i * n + j] * x[j];
      return out;
    case MappingSpec::Kind::Sampled:
      break;
  }
  throw Error(ErrorCode::InvalidArgument, "sampled maps have no pointwise formula");
}

std::vector<GridFunction> mapping_components(const MappingSpec& f, const GridDomain& d) {
  f.validate(d);
  const std::size_t n = d.dim();
  std::vector<std::vector<double>> v(n, std::vector<double>(d.node_count()));
  for (std::size_t j = 0; j < d.node_count(); ++j) {
    if (f.kind == MappingSpec::Kind::Sampled) {
      for (std::size_t i = 0; i < n; ++i) v[i][j] = f.samples[j * n + i];
    } else {
      const auto y = evaluate_mapping(f, d.node_coords(j), n);
      for (std::size_t i = 0; i < n; ++i) v[i][j] = y[i];
    }
  }
  std::vector<GridFunction> out;
  for (auto& c : v) out.emplace_back(d, std::move(c));
  return out;
}

std::vector<double> differentiate(const MappingSpec& f, const GridDomain& d) {
  f.validate(d);
  const std::size_t n = d.dim();
  std::vector<double> df(d.cell_count() * n * n);
  if (f.kind == MappingSpec::Kind::Sampled) {
    const auto comps = mapping_components(f, d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto g = gradient(comps[i], d);
      for (std::size_t c = 0; c < d.cell_count(); ++c)
        for (std::size_t j = 0; j < n; ++j) df[c * n * n + i * n + j] = g.at(c)[j];
    }
    return df;
  }
  for (std::size_t c = 0; c < d.cell_count(); ++c)
    analytic_df(f, d.cell_center(c), n, df.data() + c * n * n);
  return df;
}

QrAnalysis analyze_mapping(const MappingSpec& f, const GridDomain& d) {
  QrAnalysis a;
  const std::size_t n = d.dim();
  a.n = n;
  a.df = differentiate(f, d);
  const std::size_t cells = d.cell_count();
  const auto [inner, outer] = f.radii(d);
  a.jacobian.assign(cells, 0.0);
  a.singular.assign(cells * n, 0.0);
  a.in_region.assign(cells, 0);
  a.degenerate.assign(cells, 0);
  a.theta.assign(cells * n * n, 0.0);
  double ko = 0.0, ki = 0.0;
  std::size_t analyzed = 0;
  for (std::size_t c = 0; c < cells; ++c) {
    const double r = norm(d.cell_center(c), n);
    a.in_region[c] = r > inner && r < outer;
    const Mat m = to_mat(a.df_at(c), n);
    const double j = m.determinant();
    a.jacobian[c] = j;
    Eigen::JacobiSVD<Mat> svd(m);
    for (std::size_t i = 0; i < n; ++i) a.singular[c * n + i] = svd.singularValues()[Eigen::Index(i)];
    double* th = a.theta.data() + c * n * n;
    if (!a.in_region[c]) {
      put_mat(Mat::Identity(Eigen::Index(n), Eigen::Index(n)), th);
      continue;
    }
    if (!(j > 0.0) || !std::isfinite(j)) {
      a.degenerate[c] = 1;
      a.degenerate_measure += d.cell_measure(c);
      put_mat(Mat::Identity(Eigen::Index(n), Eigen::Index(n)), th);
      continue;
    }
    ++analyzed;
    const double s1 = a.singular[c * n], sn = a.singular[c * n + n - 1];
    const double o = std::pow(s1, double(n)) / j;
    const double in = j / std::pow(sn, double(n));
    if (o > ko) {
      ko = o;
      a.k_outer_cell = c;
    }
    if (in > ki) {
      ki = in;
      a.k_inner_cell = c;
    }
    const Mat inv = m.inverse();
    Mat t = std::pow(j, 2.0 / double(n)) * inv * inv.transpose();
    t = 0.5 * (t + t.transpose());
    put_mat(t, th);
  }
  require(analyzed > 0, ErrorCode::Precondition,
          "no cell of the analysis region has J_f > 0");
  a.k_outer = ko;
  a.k_inner = ki;
  a.alpha = std::pow(ko, -2.0 / double(n));
  a.beta = std::pow(ki, 2.0 / double(n));
  return a;
}

CoefficientField theta_field(const QrAnalysis& a) {
  // Cells outside the analysis carry I, which lies inside [alpha, beta].
  return CoefficientField(a.n, a.theta, std::min(a.alpha, 1.0), std::max(a.beta, 1.0));
}

StructurePtr induced_structure(const QrAnalysis& a, const GridDomain& d) {
  require(a.theta.size() == d.cell_count() * a.n * a.n, ErrorCode::ShapeMismatch,
          "analysis does not match the grid");
  return make_structure(d, theta_field(a));
}

PFormContext induced_context(const QrAnalysis& a, const GridDomain& d) {
  return PFormContext::make(induced_structure(a, d), double(a.n));
}

std::vector<double> a_operator(std::span<const double> g, std::span<const double> xi, double p) {
  const std::size_t n = xi.size();
  require(g.size() == n * n, ErrorCode::ShapeMismatch, "A(x, xi) needs an n x n matrix");
  require(p > 1.0, ErrorCode::InvalidArgument, "A(x, xi) needs p > 1");
  std::vector<double> gx(n, 0.0);
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) gx[i] += g[i * n + j] * xi[j];
    q += gx[i] * xi[i];
  }
  if (q <= 0.0) return std::vector<double>(n, 0.0);
  const double w = std::pow(q, 0.5 * (p - 2.0));
  for (double& v : gx) v *= w;
  return gx;
}

std::vector<double> a_operator(const QrAnalysis& a, std::size_t cell, std::span<const double> xi,
                               double p) {
  require(cell < a.jacobian.size(), ErrorCode::InvalidArgument, "cell index out of range");
  require(xi.size() == a.n, ErrorCode::ShapeMismatch, "xi has the wrong dimension");
  return a_operator(a.theta_at(cell), xi, p);
}

SuiteReport check_qr_invariants(const QrAnalysis& a, const GridDomain& d) {
  const std::size_t n = a.n;
  const double dn = double(n);
  double det_dev = 0.0, sv_dev = 0.0;
  double ell = 0.0;  // worst relative violation of alpha <= lambda <= beta
  double outer = 0.0, inner = 0.0;  // worst relative violation of the dilatation bounds
  for (std::size_t c = 0; c < d.cell_count(); ++c) {
    if (!a.analyzed(c)) continue;
    const Mat t = to_mat(a.theta_at(c), n);
    det_dev = std::max(det_dev, std::abs(t.determinant() - 1.0));
    Eigen::SelfAdjointEigenSolver<Mat> es(t, Eigen::EigenvaluesOnly);
    ell = std::max(ell, (a.alpha - es.eigenvalues().minCoeff()) / a.alpha);
    ell = std::max(ell, (es.eigenvalues().maxCoeff() - a.beta) / a.beta);
    double prod = 1.0;
    for (std::size_t i = 0; i < n; ++i) prod *= a.singular[c * n + i];
    const double j = a.jacobian[c];
    sv_dev = std::max(sv_dev, std::abs(j - prod) / std::abs(j));
    const double s1 = a.singular[c * n], sn = a.singular[c * n + n - 1];
    outer = std::max(outer, (std::pow(s1, dn) - a.k_outer * j) / (a.k_outer * j));
    inner = std::max(inner, (j - a.k_inner * std::pow(sn, dn)) / j);
  }
  SuiteReport s;
  s.suite = "qr_invariants";
  auto add = [&](const char* name, double dev, double tol) {
    auto r = make_check(name, d, dn);
    r.set(dev, 0.0, -dev, tol);
    s.checks.push_back(std::move(r));
  };
  add("det_theta", det_dev, 1e-10);
  add("ellipticity", std::max(ell, 0.0), 1e-10);
  add("jacobian_singular_values", sv_dev, 1e-10);
  add("outer_dilatation", std::max(outer, 0.0), 1e-12);
  add("inner_dilatation", std::max(inner, 0.0), 1e-12);
  auto& last = s.checks.back();
  last.add("K_O", a.k_outer);
  last.add("K_I", a.k_inner);
  last.add("K_O_cell", double(a.k_outer_cell));
  last.add("K_I_cell", double(a.k_inner_cell));
  last.add("degenerate_measure", a.degenerate_measure);
  return s;
}

Mask region_nodes(const QrAnalysis& a, const GridDomain& d) {
  require(a.in_region.size() == d.cell_count(), ErrorCode::ShapeMismatch,
          "analysis does not match the grid");
  Mask touch(d.node_count(), 1);
  for (std::size_t c = 0; c < d.cell_count(); ++c)
    if (!a.analyzed(c))
      for (std::size_t j : d.cell_corners(c)) touch[j] = 0;
  for (std::size_t j = 0; j < d.node_count(); ++j)
    if (d.on_boundary(j)) touch[j] = 0;
  return touch;
}

namespace {

struct Resolution {
  double h = 0.0;
  std::vector<double> residual;  // normalized, one per function
  std::vector<double> relative;  // residual * h / max Gamma^{(p-1)/2}
  std::size_t nodes = 0;
  Mask region;
};

// `points`, when given, restricts the region to nodes of a coarser grid
// (multi-indices scaled by `factor`) so both resolutions sample one point set.
Resolution measure(const MappingSpec& f, const GridDomain& d, bool with_log,
                   const GridDomain* coarse = nullptr, const Mask* points = nullptr,
                   std::size_t factor = 1) {
  const auto a = analyze_mapping(f, d);
  const auto ctx = induced_context(a, d);
  auto region = region_nodes(a, d);
  if (coarse) {
    Mask keep(d.node_count(), 0);
    for (std::size_t j = 0; j < coarse->node_count(); ++j) {
      if (!(*points)[j]) continue;
      auto m = coarse->node_multi(j);
      for (auto& x : m) x *= factor;
      const std::size_t k = d.node_index(m);
      keep[k] = region[k];
    }
    region = std::move(keep);
  }
  Resolution out;
  out.region = region;
  out.nodes = std::size_t(std::count(region.begin(), region.end(), 1));
  require(out.nodes > 0, ErrorCode::Precondition,
          "the analysis region contains no interior node on this grid");
  double hmin = d.spacing(0);
  for (std::size_t i = 1; i < d.dim(); ++i) hmin = std::min(hmin, d.spacing(i));
  out.h = d.max_spacing();
  auto funcs = mapping_components(f, d);
  if (with_log) {
    // Nodes that enter the residual on region nodes.
    Mask used(d.node_count(), 0);
    for (std::size_t c = 0; c < d.cell_count(); ++c) {
      bool near = false;
      for (std::size_t j : d.cell_corners(c)) near = near || region[j];
      if (near)
        for (std::size_t j : d.cell_corners(c)) used[j] = 1;
    }
    std::vector<double> lg(d.node_count(), 0.0);
    for (std::size_t j = 0; j < d.node_count(); ++j) {
      double q = 0.0;
      for (const auto& g : funcs) q += g[j] * g[j];
      if (used[j]) {
        require(q > 0.0, ErrorCode::Precondition,
                "f vanishes at node " + std::to_string(j) + "; ln|f| is undefined there");
        lg[j] = 0.5 * std::log(q);
      }
    }
    funcs.emplace_back(d, std::move(lg));
  }
  const double p = ctx.p;
  for (const auto& u : funcs) {
    const double res = normalized_harmonicity_residual(u, region, ctx);
    double gmax = 0.0;
    const auto g = carre_du_champ(u, u, *ctx.structure);
    for (std::size_t c = 0; c < d.cell_count(); ++c)
      if (a.analyzed(c)) gmax = std::max(gmax, g[c]);
    const double scale = std::pow(gmax, 0.5 * (p - 1.0)) / hmin;
    out.residual.push_back(res);
    out.relative.push_back(scale > 0.0 ? res / scale : res);
  }
  return out;
}

}  // namespace

SuiteReport verify_component_harmonicity(const MappingSpec& f, const GridDomain& d,
                                         const HarmonicityOptions& opts) {
  require(opts.refine >= 2, ErrorCode::InvalidArgument, "refinement factor must be >= 2");
  const bool sampled = f.kind == MappingSpec::Kind::Sampled;
  const auto coarse = measure(f, d, opts.include_log);
  std::optional<Resolution> fine;
  if (!sampled)
    fine = measure(f, d.refined(opts.refine), opts.include_log, &d, &coarse.region, opts.refine);
  SuiteReport s;
  s.suite = "component_harmonicity";
  const double p = double(d.dim());
  for (std::size_t i = 0; i < coarse.residual.size(); ++i) {
    const bool is_log = opts.include_log && i + 1 == coarse.residual.size();
    auto r = make_check(is_log ? "log_modulus" : "component_" + std::to_string(i), d, p);
    r.add("residual_coarse", coarse.residual[i]);
    r.add("relative_coarse", coarse.relative[i]);
    r.add("region_nodes_coarse", double(coarse.nodes));
    if (!fine) {
      // One resolution: first-order consistency, relative residual <= h.
      r.notes.push_back("sampled mapping: single resolution, order not assessed");
      r.set(coarse.relative[i], coarse.h, coarse.h - coarse.relative[i], 0.0);
      s.checks.push_back(std::move(r));
      continue;
    }
    r.add("residual_fine", fine->residual[i]);
    r.add("relative_fine", fine->relative[i]);
    r.add("region_nodes_fine", double(fine->nodes));
    r.add("min_order", opts.min_order);
    if (fine->relative[i] <= opts.roundoff) {
      r.add("exact", 1.0);
      r.notes.push_back(coarse.relative[i] <= opts.roundoff
                            ? "residual at roundoff on both grids"
                            : "residual at roundoff on the refined grid");
      r.set(fine->relative[i], coarse.relative[i], 0.0, 0.0);
    } else {
      const double order =
          std::log(coarse.residual[i] / fine->residual[i]) / std::log(double(opts.refine));
      r.add("exact", 0.0);
      r.add("order", order);
      r.set(fine->residual[i], coarse.residual[i], order - opts.min_order, 0.0);
    }
    s.checks.push_back(std::move(r));
  }
  return s;
}

}  // namespace npf
