// SPDX-License-Identifier: Apache-2.0
// Shared helpers for the unit and acceptance tests. The oracles here are
// written against explicit node coordinates and do not call the library's
// cell-corner tables or assembly routines.
#ifndef NPFORM_TESTS_SUPPORT_HPP
#define NPFORM_TESTS_SUPPORT_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "npform/grid.hpp"

namespace testsupport {

inline npf::GridDomain unit_grid(std::vector<std::size_t> shape) {
  std::vector<std::pair<double, double>> ext(shape.size(), {0.0, 1.0});
  return npf::GridDomain(ext, std::move(shape));
}

inline npf::GridFunction random_function(const npf::GridDomain& d,
                                         std::mt19937_64& rng, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(d.node_count());
  for (auto& x : v) x = dist(rng);
  return npf::GridFunction(d, std::move(v));
}

/// Smooth random trigonometric function (few low modes).
inline npf::GridFunction random_smooth(const npf::GridDomain& d,
                                       std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a(-1.0, 1.0);
  double c[3][3];
  for (auto& row : c)
    for (auto& x : row) x = a(rng);
  return npf::GridFunction::sample(d, [&](const npf::Point& x) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
      double t = c[k][0];
      for (std::size_t i = 0; i < d.dim(); ++i) t += (k + 1) * c[k][1 + (i % 2)] * x[i];
      s += std::sin(t);
    }
    return s;
  });
}

/// Random symmetric matrices with eigenvalues in [lo, hi], one per cell.
inline npf::CoefficientField random_field(std::size_t dim, std::size_t cells,
                                          std::mt19937_64& rng, double lo = 0.5,
                                          double hi = 2.0) {
  std::uniform_real_distribution<double> eig(lo, hi), ang(0.0, 6.283185307179586);
  std::vector<double> data;
  data.reserve(cells * dim * dim);
  for (std::size_t c = 0; c < cells; ++c) {
    Eigen::MatrixXd q = Eigen::MatrixXd::Identity(Eigen::Index(dim), Eigen::Index(dim));
    if (dim >= 2) {
      // Product of plane rotations.
      for (std::size_t i = 0; i + 1 < dim; ++i) {
        const double t = ang(rng);
        Eigen::MatrixXd r = Eigen::MatrixXd::Identity(Eigen::Index(dim), Eigen::Index(dim));
        r(Eigen::Index(i), Eigen::Index(i)) = std::cos(t);
        r(Eigen::Index(i), Eigen::Index(i + 1)) = -std::sin(t);
        r(Eigen::Index(i + 1), Eigen::Index(i)) = std::sin(t);
        r(Eigen::Index(i + 1), Eigen::Index(i + 1)) = std::cos(t);
        q = q * r;
      }
    }
    Eigen::VectorXd l = Eigen::VectorXd::Zero(Eigen::Index(dim));
    for (auto& x : l) x = eig(rng);
    const Eigen::MatrixXd g = q * l.asDiagonal() * q.transpose();
    for (Eigen::Index i = 0; i < Eigen::Index(dim); ++i)
      for (Eigen::Index j = 0; j < Eigen::Index(dim); ++j)
        data.push_back(0.5 * (g(i, j) + g(j, i)));
  }
  return npf::CoefficientField(dim, std::move(data), lo, hi);
}

/// Dense matrix K with u^T K v = sum_c Gamma(u, v)(c) m(c), built directly
/// from node coordinates for 1-D and 2-D grids (row-major, last axis fastest).
inline Eigen::MatrixXd stiffness_oracle(const npf::GridDomain& d,
                                        const npf::CoefficientField& g) {
  const auto& s = d.shape();
  const Eigen::Index n = Eigen::Index(d.node_count());
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  if (d.dim() == 1) {
    const double h = d.spacing(0);
    for (std::size_t i = 0; i + 1 < s[0]; ++i) {
      const double gi = g.matrix(i)[0];
      const double m = d.cell_measure(i);
      // Gamma = 2 G ((u_{i+1} - u_i)/h)^2.
      const double w = 2.0 * gi * m / (h * h);
      const Eigen::Index a = Eigen::Index(i), b = Eigen::Index(i + 1);
      k(a, a) += w;
      k(b, b) += w;
      k(a, b) -= w;
      k(b, a) -= w;
    }
    return k;
  }
  const double hx = d.spacing(0), hy = d.spacing(1);
  const std::size_t nx = s[0], ny = s[1];
  for (std::size_t i = 0; i + 1 < nx; ++i)
    for (std::size_t j = 0; j + 1 < ny; ++j) {
      const std::size_t cell = i * (ny - 1) + j;
      const auto gm = g.matrix(cell);
      const double m = d.cell_measure(cell);
      const Eigen::Index ids[4] = {Eigen::Index(i * ny + j), Eigen::Index(i * ny + j + 1),
                                   Eigen::Index((i + 1) * ny + j),
                                   Eigen::Index((i + 1) * ny + j + 1)};
      // Rows: d/dx and d/dy of the cell-averaged forward differences.
      const double bx[4] = {-0.5 / hx, -0.5 / hx, 0.5 / hx, 0.5 / hx};
      const double by[4] = {-0.5 / hy, 0.5 / hy, -0.5 / hy, 0.5 / hy};
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          const double v = gm[0] * bx[a] * bx[b] + gm[1] * bx[a] * by[b] +
                           gm[2] * by[a] * bx[b] + gm[3] * by[a] * by[b];
          k(ids[a], ids[b]) += 2.0 * m * v;
        }
    }
  return k;
}

inline Eigen::VectorXd as_vector(const npf::GridFunction& u) {
  return Eigen::Map<const Eigen::VectorXd>(u.values().data(), Eigen::Index(u.size()));
}

}  // namespace testsupport

#endif  // NPFORM_TESTS_SUPPORT_HPP
