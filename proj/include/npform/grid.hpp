// SPDX-License-Identifier: Apache-2.0
#ifndef NPFORM_GRID_HPP
#define NPFORM_GRID_HPP

// Rectangular grids in dimension 1..3, a per-cell symmetric coefficient field
// G and the cell-based carre du champ Gamma(u,v) = 2 (G grad u, grad v).
//
// Functions are nodal; gradients live on cells and are the average of the
// forward differences along the cell's edges in each axis. Cells are the
// integration atoms: every integral below is a sum over cells weighted by
// m(c) = density(c) * cell volume.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace npf {

using Point = std::array<double, 3>;
using Mask = std::vector<std::uint8_t>;

class GridDomain {
 public:
  /// `extent[i]` is [a_i, b_i]; `shape[i]` >= 2 is the node count along axis
  /// i. `density` is empty (unit density) or one positive weight per cell.
  GridDomain(std::vector<std::pair<double, double>> extent,
             std::vector<std::size_t> shape, std::vector<double> density = {});

  std::size_t dim() const { return shape_.size(); }
  const std::vector<std::size_t>& shape() const { return shape_; }
  std::vector<std::size_t> cell_shape() const;
  std::size_t node_count() const { return node_count_; }
  std::size_t cell_count() const { return cell_count_; }
  std::size_t corners_per_cell() const { return std::size_t{1} << dim(); }

  double lower(std::size_t axis) const { return extent_[axis].first; }
  double upper(std::size_t axis) const { return extent_[axis].second; }
  double spacing(std::size_t axis) const { return spacing_[axis]; }
  double max_spacing() const;
  double cell_volume() const { return cell_volume_; }

  double cell_measure(std::size_t c) const {
    return density_.empty() ? cell_volume_ : density_[c] * cell_volume_;
  }
  double total_measure() const;
  /// Lumped nodal measure: each cell hands m(c)/2^n to each of its corners.
  const std::vector<double>& node_measure() const { return node_measure_; }
  const std::vector<double>& density() const { return density_; }

  std::array<std::size_t, 3> node_multi(std::size_t node) const;
  std::size_t node_index(const std::array<std::size_t, 3>& multi) const;
  std::array<std::size_t, 3> cell_multi(std::size_t cell) const;
  std::size_t cell_index(const std::array<std::size_t, 3>& multi) const;

  Point node_coords(std::size_t node) const;
  Point cell_center(std::size_t cell) const;
  /// Node nearest to `x` (coordinates beyond dim() are ignored).
  std::size_t nearest_node(const Point& x) const;

  /// Corner `k` of cell `c`; bit d of k selects the upper node along axis d.
  std::size_t cell_corner(std::size_t c, std::size_t k) const {
    return corners_[c * corners_per_cell() + k];
  }
  std::span<const std::size_t> cell_corners(std::size_t c) const {
    return {corners_.data() + c * corners_per_cell(), corners_per_cell()};
  }

  bool on_boundary(std::size_t node) const;
  Mask boundary_mask() const;

  /// Same node shape and extent.
  bool compatible(const GridDomain& other) const;

  /// Same extent and density law, node counts (shape-1)*factor+1.
  GridDomain refined(std::size_t factor) const;

 private:
  std::vector<std::pair<double, double>> extent_;
  std::vector<std::size_t> shape_;
  std::vector<double> spacing_;
  std::vector<double> density_;
  std::vector<double> node_measure_;
  std::vector<std::size_t> corners_;
  std::size_t node_count_ = 0;
  std::size_t cell_count_ = 0;
  double cell_volume_ = 0.0;
};

/// Per-cell symmetric n x n matrices with ellipticity bounds
/// alpha |xi|^2 <= (G xi, xi) <= beta |xi|^2, checked at construction.
class CoefficientField {
 public:
  static CoefficientField identity(std::size_t dim, std::size_t cells);
  static CoefficientField scalar(std::size_t dim, std::size_t cells, double v);

  /// `matrices` holds cells * dim * dim entries, row-major per cell.
  CoefficientField(std::size_t dim, std::vector<double> matrices, double alpha,
                   double beta);

  std::size_t dim() const { return dim_; }
  std::size_t cell_count() const { return data_.size() / (dim_ * dim_); }
  std::span<const double> matrix(std::size_t c) const {
    return {data_.data() + c * dim_ * dim_, dim_ * dim_};
  }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

  /// Smallest and largest eigenvalue of G(c).
  std::pair<double, double> eigen_range(std::size_t c) const;

  CoefficientField scaled(double t) const;

 private:
  CoefficientField() = default;
  std::size_t dim_ = 0;
  std::vector<double> data_;
  double alpha_ = 1.0;
  double beta_ = 1.0;
};

class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(const GridDomain& d, double fill = 0.0);
  GridFunction(const GridDomain& d, std::vector<double> values, Mask mask = {});

  static GridFunction sample(const GridDomain& d,
                             const std::function<double(const Point&)>& f);

  std::size_t size() const { return values_.size(); }
  const std::vector<std::size_t>& shape() const { return shape_; }
  bool same_shape(const GridFunction& o) const { return shape_ == o.shape_; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  /// Nodes where Dirichlet data is pinned (1 = masked).
  const Mask& mask() const { return mask_; }
  Mask& mask() { return mask_; }
  bool masked(std::size_t i) const { return mask_[i] != 0; }
  bool any_masked() const;

  GridFunction with_mask(Mask m) const;

  GridFunction& operator+=(const GridFunction& o);
  GridFunction& operator-=(const GridFunction& o);
  GridFunction& operator*=(double t);

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
  Mask mask_;
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(double t, GridFunction a);

/// One n-vector per cell.
struct CellCovector {
  std::size_t dim = 0;
  std::vector<double> data;

  std::size_t cell_count() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const double> at(std::size_t c) const {
    return {data.data() + c * dim, dim};
  }
};

/// A domain with its coefficient field: the discrete (X, m, E, Gamma).
class GridStructure {
 public:
  GridStructure(GridDomain domain, CoefficientField field);

  const GridDomain& domain() const { return domain_; }
  const CoefficientField& field() const { return field_; }
  std::size_t dim() const { return domain_.dim(); }

  /// grad_h u on cell c written into g[0..dim).
  void cell_gradient(std::span<const double> u, std::size_t c,
                     double* g) const;
  /// 2 (G(c) a, b) for cell vectors a, b.
  double cell_gamma(std::size_t c, const double* a, const double* b) const;

  /// The same domain with G scaled by t.
  GridStructure scaled(double t) const;

 private:
  GridDomain domain_;
  CoefficientField field_;
};

using StructurePtr = std::shared_ptr<const GridStructure>;

StructurePtr make_structure(GridDomain domain, CoefficientField field);
StructurePtr make_identity_structure(GridDomain domain);

CellCovector gradient(const GridFunction& u, const GridDomain& d);

/// Per-cell Gamma(u, v).
std::vector<double> carre_du_champ(const GridFunction& u, const GridFunction& v,
                                   const GridStructure& s);

/// E(u, v) = 1/2 sum_c Gamma(u, v)(c) m(c).
double energy(const GridFunction& u, const GridFunction& v,
              const GridStructure& s);

/// Arithmetic mean of the corner values of each cell.
std::vector<double> cell_means(const GridFunction& u, const GridDomain& d);

/// (sum |u_bar|^p m + sum Gamma(u)^{p/2} m)^{1/p}.
double dp_norm(const GridFunction& u, const GridStructure& s, double p);

// Nodewise lattice operations. The mask of the first argument is kept.
GridFunction meet(const GridFunction& u, const GridFunction& v);  // u ^ v
GridFunction join(const GridFunction& u, const GridFunction& v);  // u v v
GridFunction positive_part(const GridFunction& u);
/// u ^ 0, the contraction T_- (values <= 0).
GridFunction negative_part(const GridFunction& u);
/// u+ ^ alpha, i.e. T_alpha; alpha = 1 is the unit contraction.
GridFunction unit_truncation(const GridFunction& u, double alpha = 1.0);
/// ((-n) v u) ^ n.
GridFunction truncate(const GridFunction& u, double n);
GridFunction product(const GridFunction& u, const GridFunction& v);
GridFunction add_constant(const GridFunction& u, double c);

/// Neumaier-compensated sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace npf

#endif  // NPFORM_GRID_HPP
