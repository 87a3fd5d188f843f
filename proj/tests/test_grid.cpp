// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "npform/error.hpp"
#include "npform/grid.hpp"
#include "support.hpp"

using namespace npf;
using testsupport::unit_grid;

TEST_CASE("domain counts, spacing and lumped measure") {
  GridDomain d({{0.0, 2.0}, {-1.0, 1.0}}, {5, 3});
  CHECK(d.node_count() == 15);
  CHECK(d.cell_count() == 8);
  CHECK(d.spacing(0) == doctest::Approx(0.5));
  CHECK(d.spacing(1) == doctest::Approx(1.0));
  CHECK(d.total_measure() == doctest::Approx(4.0));
  double lumped = 0.0;
  for (double m : d.node_measure()) lumped += m;
  CHECK(lumped == doctest::Approx(4.0));
  CHECK_THROWS_AS(GridDomain({{0.0, 1.0}}, {1}), Error);
  CHECK_THROWS_AS(GridDomain({{1.0, 0.0}}, {4}), Error);
  CHECK_THROWS_AS(GridDomain({{0.0, 1.0}}, {3}, {1.0, -1.0}), Error);
}

TEST_CASE("gradient of constants and affine functions") {
  const auto d1 = unit_grid({7});
  const auto x = GridFunction::sample(d1, [](const Point& p) { return p[0]; });
  const auto g1 = gradient(x, d1);
  for (std::size_t c = 0; c < d1.cell_count(); ++c) CHECK(g1.at(c)[0] == doctest::Approx(1.0));

  const auto d2 = unit_grid({5, 6});
  const auto u = GridFunction::sample(d2, [](const Point& p) { return 3 * p[0] - 2 * p[1]; });
  const auto g2 = gradient(u, d2);
  for (std::size_t c = 0; c < d2.cell_count(); ++c) {
    CHECK(g2.at(c)[0] == doctest::Approx(3.0));
    CHECK(g2.at(c)[1] == doctest::Approx(-2.0));
  }
  const auto k = gradient(GridFunction(d2, 4.2), d2);
  for (double v : k.data) CHECK(v == 0.0);
  CHECK_THROWS_AS(gradient(x, d2), Error);
}

TEST_CASE("gradient is linear") {
  std::mt19937_64 rng(11);
  const auto d = unit_grid({6, 5});
  const auto u = testsupport::random_function(d, rng);
  const auto v = testsupport::random_function(d, rng);
  const auto lhs = gradient(2.5 * GridFunction(u) + (-1.5) * GridFunction(v), d);
  const auto gu = gradient(u, d), gv = gradient(v, d);
  for (std::size_t i = 0; i < lhs.data.size(); ++i)
    CHECK(lhs.data[i] == doctest::Approx(2.5 * gu.data[i] - 1.5 * gv.data[i]).epsilon(1e-12));
}

TEST_CASE("carre du champ closed forms") {
  const auto d1 = unit_grid({4});
  auto s1 = make_identity_structure(d1);
  const auto x = GridFunction::sample(d1, [](const Point& p) { return p[0]; });
  for (double g : carre_du_champ(x, x, *s1)) CHECK(g == doctest::Approx(2.0));

  const auto d2 = unit_grid({4, 4});
  auto s2 = make_identity_structure(d2);
  const auto gx = GridFunction::sample(d2, [](const Point& p) { return p[0]; });
  const auto gy = GridFunction::sample(d2, [](const Point& p) { return p[1]; });
  for (double g : carre_du_champ(gx, gy, *s2)) CHECK(g == doctest::Approx(0.0));
  for (double g : carre_du_champ(gx, gx, *s2)) CHECK(g == doctest::Approx(2.0));
  for (double g : carre_du_champ(gx, GridFunction(d2, 3.0), *s2)) CHECK(g == 0.0);
}

TEST_CASE("energy closed forms") {
  const auto d1 = unit_grid({9});
  auto s1 = make_identity_structure(d1);
  const auto x = GridFunction::sample(d1, [](const Point& p) { return p[0]; });
  CHECK(energy(x, x, *s1) == doctest::Approx(1.0).epsilon(1e-14));

  const auto d2 = unit_grid({5, 5});
  auto s2 = make_identity_structure(d2);
  const auto u = GridFunction::sample(d2, [](const Point& p) { return p[0] + p[1]; });
  CHECK(energy(u, u, *s2) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(energy(GridFunction(d2, 1.0), GridFunction(d2, 1.0), *s2) == 0.0);
}

TEST_CASE("energy matches an independently assembled stiffness matrix") {
  std::mt19937_64 rng(5);
  for (std::size_t dim : {1u, 2u}) {
    const auto d = dim == 1 ? unit_grid({9}) : unit_grid({6, 7});
    auto s = make_structure(d, testsupport::random_field(dim, d.cell_count(), rng));
    const auto k = testsupport::stiffness_oracle(d, s->field());
    for (int t = 0; t < 10; ++t) {
      const auto u = testsupport::random_function(d, rng);
      const auto v = testsupport::random_function(d, rng);
      const double oracle =
          0.5 * testsupport::as_vector(u).dot(k * testsupport::as_vector(v));
      CHECK(energy(u, v, *s) == doctest::Approx(oracle).epsilon(1e-12));
    }
    // Symmetric positive semidefinite.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    CHECK(es.eigenvalues().minCoeff() > -1e-10 * es.eigenvalues().maxCoeff());
  }
}

TEST_CASE("per-cell Cauchy-Schwarz and subadditivity") {
  std::mt19937_64 rng(7);
  const auto d = unit_grid({6, 6});
  auto s = make_structure(d, testsupport::random_field(2, d.cell_count(), rng));
  for (int t = 0; t < 50; ++t) {
    const auto u = testsupport::random_function(d, rng);
    const auto v = testsupport::random_function(d, rng);
    const auto guv = carre_du_champ(u, v, *s);
    const auto gu = carre_du_champ(u, u, *s);
    const auto gv = carre_du_champ(v, v, *s);
    const auto gs = carre_du_champ(u + v, u + v, *s);
    for (std::size_t c = 0; c < guv.size(); ++c) {
      CHECK(gu[c] >= 0.0);
      CHECK(std::abs(guv[c]) <= std::sqrt(gu[c] * gv[c]) * (1 + 1e-12) + 1e-300);
      CHECK(std::sqrt(gs[c]) <= (std::sqrt(gu[c]) + std::sqrt(gv[c])) * (1 + 1e-12));
    }
  }
}

TEST_CASE("dp norm") {
  const auto d = unit_grid({2});
  auto s = make_identity_structure(d);
  const auto x = GridFunction::sample(d, [](const Point& p) { return p[0]; });
  CHECK(dp_norm(x, *s, 2.0) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(dp_norm(GridFunction(d), *s, 3.0) == 0.0);
  CHECK_THROWS_AS(dp_norm(x, *s, 1.0), Error);

  std::mt19937_64 rng(3);
  const auto d2 = unit_grid({5, 4});
  auto s2 = make_identity_structure(d2);
  for (int t = 0; t < 20; ++t) {
    const auto u = testsupport::random_function(d2, rng);
    const auto v = testsupport::random_function(d2, rng);
    for (double p : {1.5, 2.0, 3.0}) {
      CHECK(dp_norm(u + v, *s2, p) <= dp_norm(u, *s2, p) + dp_norm(v, *s2, p) + 1e-12);
      CHECK(dp_norm(-2.0 * GridFunction(u), *s2, p) ==
            doctest::Approx(2.0 * dp_norm(u, *s2, p)).epsilon(1e-12));
    }
  }
}

TEST_CASE("lattice operations") {
  std::mt19937_64 rng(9);
  const auto d = unit_grid({4, 5});
  const auto u = testsupport::random_function(d, rng, -3, 3);
  const auto v = testsupport::random_function(d, rng, -3, 3);
  const auto lo = meet(u, v), hi = join(u, v);
  for (std::size_t i = 0; i < u.size(); ++i) {
    CHECK(lo[i] + hi[i] == doctest::Approx(u[i] + v[i]).epsilon(1e-15));
    CHECK(positive_part(u)[i] == std::max(u[i], 0.0));
    CHECK(negative_part(u)[i] == std::min(u[i], 0.0));
    CHECK(product(u, v)[i] == u[i] * v[i]);
  }
  const auto one = unit_truncation(GridFunction(d, 5.0));
  for (double x : one.values()) CHECK(x == 1.0);
  const auto two = truncate(GridFunction(d, -7.0), 2.0);
  for (double x : two.values()) CHECK(x == -2.0);
  CHECK_THROWS_AS(meet(u, GridFunction(unit_grid({3, 3}))), Error);
}

TEST_CASE("coefficient field validation") {
  CHECK_THROWS_AS(CoefficientField(2, {1.0, 0.5, 0.0, 1.0}, 0.1, 10.0), Error);
  CHECK_THROWS_AS(CoefficientField(2, {3.0, 0.0, 0.0, 1.0}, 0.5, 2.0), Error);
  const CoefficientField ok(2, {2.0, 0.0, 0.0, 0.5}, 0.5, 2.0);
  const auto [lo, hi] = ok.eigen_range(0);
  CHECK(lo == doctest::Approx(0.5));
  CHECK(hi == doctest::Approx(2.0));
}

TEST_CASE("masked nodes must carry finite values") {
  const auto d = unit_grid({3});
  CHECK_THROWS_AS(GridFunction(d, {0.0, NAN, 1.0}, {0, 1, 0}), Error);
  CHECK_THROWS_AS(GridFunction(d, {0.0, 1.0}), Error);
}
