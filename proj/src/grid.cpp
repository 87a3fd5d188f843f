// SPDX-License-Identifier: Apache-2.0
#include "npform/grid.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "npform/error.hpp"

namespace npf {

namespace {

std::string shape_str(const std::vector<std::size_t>& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

void check_same(const GridFunction& u, const GridFunction& v,
                const char* what) {
  if (!u.same_shape(v))
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + ": shape mismatch " + shape_str(u.shape()) +
                    " vs " + shape_str(v.shape()));
}

void check_on(const GridFunction& u, const GridDomain& d, const char* what) {
  if (u.shape() != d.shape())
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + ": function shape " + shape_str(u.shape()) +
                    " does not match domain " + shape_str(d.shape()));
}

}  // namespace

// ---------------------------------------------------------------------------
// GridDomain

GridDomain::GridDomain(std::vector<std::pair<double, double>> extent,
                       std::vector<std::size_t> shape,
                       std::vector<double> density)
    : extent_(std::move(extent)),
      shape_(std::move(shape)),
      density_(std::move(density)) {
  require(!shape_.empty() && shape_.size() <= 3, ErrorCode::InvalidArgument,
          "grid dimension must be 1, 2 or 3");
  require(extent_.size() == shape_.size(), ErrorCode::InvalidArgument,
          "extent and shape must have the same length");
  node_count_ = 1;
  cell_count_ = 1;
  cell_volume_ = 1.0;
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    require(shape_[i] >= 2, ErrorCode::InvalidArgument,
            "every axis needs at least 2 nodes");
    const double h =
        (extent_[i].second - extent_[i].first) / double(shape_[i] - 1);
    require(std::isfinite(h) && h > 0.0, ErrorCode::InvalidArgument,
            "grid spacing must be strictly positive");
    spacing_.push_back(h);
    node_count_ *= shape_[i];
    cell_count_ *= shape_[i] - 1;
    cell_volume_ *= h;
  }
  if (!density_.empty()) {
    require(density_.size() == cell_count_, ErrorCode::InvalidArgument,
            "density needs one value per cell");
    for (double w : density_)
      require(std::isfinite(w) && w > 0.0, ErrorCode::InvalidArgument,
              "density must be positive and finite");
  }

  const std::size_t k = corners_per_cell();
  corners_.resize(cell_count_ * k);
  node_measure_.assign(node_count_, 0.0);
  for (std::size_t c = 0; c < cell_count_; ++c) {
    const auto cm = cell_multi(c);
    const double share = cell_measure(c) / double(k);
    for (std::size_t corner = 0; corner < k; ++corner) {
      std::array<std::size_t, 3> nm{0, 0, 0};
      for (std::size_t d = 0; d < dim(); ++d)
        nm[d] = cm[d] + ((corner >> d) & 1u);
      const std::size_t node = node_index(nm);
      corners_[c * k + corner] = node;
      node_measure_[node] += share;
    }
  }
}

std::vector<std::size_t> GridDomain::cell_shape() const {
  std::vector<std::size_t> s(shape_);
  for (auto& x : s) --x;
  return s;
}

double GridDomain::max_spacing() const {
  return *std::max_element(spacing_.begin(), spacing_.end());
}

double GridDomain::total_measure() const {
  CompensatedSum sum;
  for (std::size_t c = 0; c < cell_count_; ++c) sum.add(cell_measure(c));
  return sum.value();
}

std::array<std::size_t, 3> GridDomain::node_multi(std::size_t node) const {
  std::array<std::size_t, 3> m{0, 0, 0};
  for (std::size_t d = dim(); d-- > 0;) {
    m[d] = node % shape_[d];
    node /= shape_[d];
  }
  return m;
}

std::size_t GridDomain::node_index(const std::array<std::size_t, 3>& m) const {
  std::size_t idx = 0;
  for (std::size_t d = 0; d < dim(); ++d) idx = idx * shape_[d] + m[d];
  return idx;
}

std::array<std::size_t, 3> GridDomain::cell_multi(std::size_t cell) const {
  std::array<std::size_t, 3> m{0, 0, 0};
  for (std::size_t d = dim(); d-- > 0;) {
    m[d] = cell % (shape_[d] - 1);
    cell /= shape_[d] - 1;
  }
  return m;
}

std::size_t GridDomain::cell_index(const std::array<std::size_t, 3>& m) const {
  std::size_t idx = 0;
  for (std::size_t d = 0; d < dim(); ++d) idx = idx * (shape_[d] - 1) + m[d];
  return idx;
}

Point GridDomain::node_coords(std::size_t node) const {
  const auto m = node_multi(node);
  Point x{0.0, 0.0, 0.0};
  for (std::size_t d = 0; d < dim(); ++d)
    x[d] = extent_[d].first + double(m[d]) * spacing_[d];
  return x;
}

Point GridDomain::cell_center(std::size_t cell) const {
  const auto m = cell_multi(cell);
  Point x{0.0, 0.0, 0.0};
  for (std::size_t d = 0; d < dim(); ++d)
    x[d] = extent_[d].first + (double(m[d]) + 0.5) * spacing_[d];
  return x;
}

std::size_t GridDomain::nearest_node(const Point& x) const {
  std::array<std::size_t, 3> m{0, 0, 0};
  for (std::size_t d = 0; d < dim(); ++d) {
    const double t = std::round((x[d] - extent_[d].first) / spacing_[d]);
    m[d] = std::size_t(std::clamp(t, 0.0, double(shape_[d] - 1)));
  }
  return node_index(m);
}

bool GridDomain::on_boundary(std::size_t node) const {
  const auto m = node_multi(node);
  for (std::size_t d = 0; d < dim(); ++d)
    if (m[d] == 0 || m[d] + 1 == shape_[d]) return true;
  return false;
}

Mask GridDomain::boundary_mask() const {
  Mask mask(node_count_, 0);
  for (std::size_t i = 0; i < node_count_; ++i) mask[i] = on_boundary(i);
  return mask;
}

bool GridDomain::compatible(const GridDomain& o) const {
  if (shape_ != o.shape_) return false;
  for (std::size_t d = 0; d < dim(); ++d)
    if (extent_[d] != o.extent_[d]) return false;
  return true;
}

GridDomain GridDomain::refined(std::size_t factor) const {
  require(factor >= 1, ErrorCode::InvalidArgument, "refinement factor >= 1");
  std::vector<std::size_t> s(shape_);
  for (auto& x : s) x = (x - 1) * factor + 1;
  std::vector<double> dens;
  if (!density_.empty()) {
    GridDomain fine(extent_, s);
    dens.resize(fine.cell_count());
    for (std::size_t c = 0; c < fine.cell_count(); ++c) {
      auto m = fine.cell_multi(c);
      for (std::size_t d = 0; d < dim(); ++d) m[d] /= factor;
      dens[c] = density_[cell_index(m)];
    }
  }
  return GridDomain(extent_, s, std::move(dens));
}

// ---------------------------------------------------------------------------
// CoefficientField

CoefficientField CoefficientField::identity(std::size_t dim,
                                            std::size_t cells) {
  return scalar(dim, cells, 1.0);
}

CoefficientField CoefficientField::scalar(std::size_t dim, std::size_t cells,
                                          double v) {
  require(dim >= 1 && dim <= 3, ErrorCode::InvalidArgument, "field dimension");
  require(std::isfinite(v) && v > 0.0, ErrorCode::InvalidArgument,
          "scalar field must be positive");
  CoefficientField f;
  f.dim_ = dim;
  f.data_.assign(cells * dim * dim, 0.0);
  for (std::size_t c = 0; c < cells; ++c)
    for (std::size_t i = 0; i < dim; ++i) f.data_[c * dim * dim + i * dim + i] = v;
  f.alpha_ = v;
  f.beta_ = v;
  return f;
}

CoefficientField::CoefficientField(std::size_t dim, std::vector<double> m,
                                   double alpha, double beta)
    : dim_(dim), data_(std::move(m)), alpha_(alpha), beta_(beta) {
  require(dim >= 1 && dim <= 3, ErrorCode::InvalidArgument, "field dimension");
  require(data_.size() % (dim * dim) == 0, ErrorCode::InvalidArgument,
          "field size is not a multiple of dim*dim");
  require(alpha > 0.0 && beta >= alpha && std::isfinite(beta),
          ErrorCode::InvalidArgument, "need 0 < alpha <= beta");
  const std::size_t cells = cell_count();
  for (std::size_t c = 0; c < cells; ++c) {
    auto g = matrix(c);
    double scale = 0.0;
    for (double x : g) {
      require(std::isfinite(x), ErrorCode::InvalidArgument,
              "field entries must be finite");
      scale = std::max(scale, std::abs(x));
    }
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = i + 1; j < dim; ++j)
        if (std::abs(g[i * dim + j] - g[j * dim + i]) > 1e-12 * scale)
          throw Error(ErrorCode::InvalidArgument,
                      "field matrix of cell " + std::to_string(c) +
                          " is not symmetric");
    const auto [lo, hi] = eigen_range(c);
    const double slack = 1e-10 * std::max(1.0, beta);
    if (lo < alpha - slack || hi > beta + slack)
      throw Error(ErrorCode::InvalidArgument,
                  "field matrix of cell " + std::to_string(c) +
                      " has eigenvalues [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "] outside [alpha, beta]");
  }
}

std::pair<double, double> CoefficientField::eigen_range(std::size_t c) const {
  auto g = matrix(c);
  Eigen::MatrixXd m(dim_, dim_);
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < dim_; ++j) m(i, j) = g[i * dim_ + j];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

CoefficientField CoefficientField::scaled(double t) const {
  require(t > 0.0, ErrorCode::InvalidArgument, "scale must be positive");
  CoefficientField f(*this);
  for (auto& x : f.data_) x *= t;
  f.alpha_ *= t;
  f.beta_ *= t;
  return f;
}

// ---------------------------------------------------------------------------
// GridFunction

GridFunction::GridFunction(const GridDomain& d, double fill)
    : shape_(d.shape()),
      values_(d.node_count(), fill),
      mask_(d.node_count(), 0) {}

GridFunction::GridFunction(const GridDomain& d, std::vector<double> values,
                           Mask mask)
    : shape_(d.shape()), values_(std::move(values)), mask_(std::move(mask)) {
  require(values_.size() == d.node_count(), ErrorCode::ShapeMismatch,
          "value array length " + std::to_string(values_.size()) +
              " does not match node count " + std::to_string(d.node_count()));
  if (mask_.empty()) mask_.assign(values_.size(), 0);
  require(mask_.size() == values_.size(), ErrorCode::ShapeMismatch,
          "mask length does not match node count");
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (mask_[i])
      require(std::isfinite(values_[i]), ErrorCode::InvalidArgument,
              "masked node " + std::to_string(i) + " carries a non-finite value");
}

GridFunction GridFunction::sample(const GridDomain& d,
                                  const std::function<double(const Point&)>& f) {
  GridFunction u(d);
  for (std::size_t i = 0; i < d.node_count(); ++i) u[i] = f(d.node_coords(i));
  return u;
}

bool GridFunction::any_masked() const {
  return std::any_of(mask_.begin(), mask_.end(), [](auto m) { return m != 0; });
}

GridFunction GridFunction::with_mask(Mask m) const {
  require(m.size() == values_.size(), ErrorCode::ShapeMismatch,
          "mask length does not match node count");
  GridFunction r(*this);
  r.mask_ = std::move(m);
  return r;
}

GridFunction& GridFunction::operator+=(const GridFunction& o) {
  check_same(*this, o, "operator+");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& o) {
  check_same(*this, o, "operator-");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
  return *this;
}

GridFunction& GridFunction::operator*=(double t) {
  for (auto& x : values_) x *= t;
  return *this;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(double t, GridFunction a) { return a *= t; }

// ---------------------------------------------------------------------------
// GridStructure

GridStructure::GridStructure(GridDomain domain, CoefficientField field)
    : domain_(std::move(domain)), field_(std::move(field)) {
  require(field_.dim() == domain_.dim(), ErrorCode::ShapeMismatch,
          "field dimension does not match domain");
  require(field_.cell_count() == domain_.cell_count(), ErrorCode::ShapeMismatch,
          "field needs one matrix per cell (" +
              std::to_string(domain_.cell_count()) + "), got " +
              std::to_string(field_.cell_count()));
}

void GridStructure::cell_gradient(std::span<const double> u, std::size_t c,
                                  double* g) const {
  const std::size_t n = dim();
  const std::size_t k = domain_.corners_per_cell();
  const auto corners = domain_.cell_corners(c);
  for (std::size_t d = 0; d < n; ++d) {
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double v = u[corners[j]];
      acc += ((j >> d) & 1u) ? v : -v;
    }
    g[d] = acc / (double(k / 2) * domain_.spacing(d));
  }
}

double GridStructure::cell_gamma(std::size_t c, const double* a,
                                 const double* b) const {
  const std::size_t n = dim();
  const auto g = field_.matrix(c);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double gi = 0.0;
    for (std::size_t j = 0; j < n; ++j) gi += g[i * n + j] * a[j];
    acc += gi * b[i];
  }
  return 2.0 * acc;
}

GridStructure GridStructure::scaled(double t) const {
  return GridStructure(domain_, field_.scaled(t));
}

StructurePtr make_structure(GridDomain domain, CoefficientField field) {
  return std::make_shared<const GridStructure>(std::move(domain),
                                               std::move(field));
}

StructurePtr make_identity_structure(GridDomain domain) {
  auto f = CoefficientField::identity(domain.dim(), domain.cell_count());
  return make_structure(std::move(domain), std::move(f));
}

// ---------------------------------------------------------------------------
// Operations

CellCovector gradient(const GridFunction& u, const GridDomain& d) {
  check_on(u, d, "gradient");
  const std::size_t n = d.dim();
  const std::size_t k = d.corners_per_cell();
  CellCovector out{n, std::vector<double>(d.cell_count() * n, 0.0)};
  const auto& vals = u.values();
  for (std::size_t c = 0; c < d.cell_count(); ++c) {
    const auto corners = d.cell_corners(c);
    for (std::size_t a = 0; a < n; ++a) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double v = vals[corners[j]];
        acc += ((j >> a) & 1u) ? v : -v;
      }
      out.data[c * n + a] = acc / (double(k / 2) * d.spacing(a));
    }
  }
  return out;
}

std::vector<double> carre_du_champ(const GridFunction& u, const GridFunction& v,
                                   const GridStructure& s) {
  check_same(u, v, "carre_du_champ");
  check_on(u, s.domain(), "carre_du_champ");
  const std::size_t cells = s.domain().cell_count();
  std::vector<double> out(cells);
  std::array<double, 3> gu{}, gv{};
  for (std::size_t c = 0; c < cells; ++c) {
    s.cell_gradient(u.values(), c, gu.data());
    s.cell_gradient(v.values(), c, gv.data());
    out[c] = s.cell_gamma(c, gu.data(), gv.data());
  }
  return out;
}

double energy(const GridFunction& u, const GridFunction& v,
              const GridStructure& s) {
  const auto gamma = carre_du_champ(u, v, s);
  CompensatedSum sum;
  for (std::size_t c = 0; c < gamma.size(); ++c)
    sum.add(gamma[c] * s.domain().cell_measure(c));
  return 0.5 * sum.value();
}

std::vector<double> cell_means(const GridFunction& u, const GridDomain& d) {
  check_on(u, d, "cell_means");
  std::vector<double> out(d.cell_count());
  const double k = double(d.corners_per_cell());
  for (std::size_t c = 0; c < d.cell_count(); ++c) {
    double acc = 0.0;
    for (auto node : d.cell_corners(c)) acc += u[node];
    out[c] = acc / k;
  }
  return out;
}

double dp_norm(const GridFunction& u, const GridStructure& s, double p) {
  require(p > 1.0, ErrorCode::InvalidArgument, "dp_norm needs p > 1");
  const auto& d = s.domain();
  const auto means = cell_means(u, d);
  const auto gamma = carre_du_champ(u, u, s);
  CompensatedSum sum;
  for (std::size_t c = 0; c < d.cell_count(); ++c) {
    const double m = d.cell_measure(c);
    sum.add(std::pow(std::abs(means[c]), p) * m);
    sum.add(std::pow(std::max(gamma[c], 0.0), 0.5 * p) * m);
  }
  return std::pow(sum.value(), 1.0 / p);
}

namespace {

template <class F>
GridFunction nodewise(const GridFunction& u, F&& f) {
  GridFunction r(u);
  for (auto& x : r.values()) x = f(x);
  return r;
}

template <class F>
GridFunction nodewise2(const GridFunction& u, const GridFunction& v,
                       const char* what, F&& f) {
  check_same(u, v, what);
  GridFunction r(u);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = f(u[i], v[i]);
  return r;
}

}  // namespace

GridFunction meet(const GridFunction& u, const GridFunction& v) {
  return nodewise2(u, v, "meet", [](double a, double b) { return std::min(a, b); });
}

GridFunction join(const GridFunction& u, const GridFunction& v) {
  return nodewise2(u, v, "join", [](double a, double b) { return std::max(a, b); });
}

GridFunction positive_part(const GridFunction& u) {
  return nodewise(u, [](double a) { return std::max(a, 0.0); });
}

GridFunction negative_part(const GridFunction& u) {
  return nodewise(u, [](double a) { return std::min(a, 0.0); });
}

GridFunction unit_truncation(const GridFunction& u, double alpha) {
  require(alpha > 0.0, ErrorCode::InvalidArgument, "truncation level > 0");
  return nodewise(u, [alpha](double a) { return std::min(std::max(a, 0.0), alpha); });
}

GridFunction truncate(const GridFunction& u, double n) {
  require(n >= 0.0, ErrorCode::InvalidArgument, "truncation level >= 0");
  return nodewise(u, [n](double a) { return std::min(std::max(a, -n), n); });
}

GridFunction product(const GridFunction& u, const GridFunction& v) {
  return nodewise2(u, v, "product", [](double a, double b) { return a * b; });
}

GridFunction add_constant(const GridFunction& u, double c) {
  return nodewise(u, [c](double a) { return a + c; });
}

}  // namespace npf
