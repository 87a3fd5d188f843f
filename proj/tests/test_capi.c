/* SPDX-License-Identifier: Apache-2.0 */
/* Exercises the C interface from C. Expected values are closed forms. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "npform.h"

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: expectation failed: %s (last error: %s)\n", \
              __FILE__, __LINE__, #cond, npf_last_error());           \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

#define NEAR(a, b, tol) EXPECT(fabs((a) - (b)) <= (tol))

static void test_domain_and_forms(void) {
  const double lo[1] = {0.0}, hi[1] = {1.0};
  const size_t shape[1] = {41};
  npf_domain* d = NULL;
  EXPECT(npf_domain_create(1, lo, hi, shape, &d) == NPF_OK);
  size_t n = 0, cells = 0;
  EXPECT(npf_domain_node_count(d, &n) == NPF_OK && n == 41);
  EXPECT(npf_domain_cell_count(d, &cells) == NPF_OK && cells == 40);
  double x = 0.0;
  EXPECT(npf_domain_node_coords(d, 10, &x) == NPF_OK);
  NEAR(x, 0.25, 1e-15);

  npf_context* c = NULL;
  EXPECT(npf_context_create(d, "identity", 2.0, -1.0, &c) == NPF_OK);
  double u[41], v[41], k[41];
  for (int i = 0; i < 41; ++i) {
    const double t = i / 40.0;
    u[i] = t;
    v[i] = t * t;
  }
  /* E(u, v) = 1/2 sum 2 u' v' h telescopes to v(1) - v(0) = 1 since u' = 1. */
  double e = 0.0, ep = 0.0, jp = 0.0;
  EXPECT(npf_energy(c, u, v, 41, &e) == NPF_OK);
  NEAR(e, 1.0, 1e-12);
  EXPECT(npf_p_form(c, u, v, 41, &ep) == NPF_OK);
  NEAR(ep, 2.0 * e, 1e-12);
  /* J_2(u) = 1/2 sum 2 |u'|^2 h = 1. */
  EXPECT(npf_p_energy(c, u, 41, &jp) == NPF_OK);
  NEAR(jp, 1.0, 1e-12);
  EXPECT(npf_lp_apply(c, u, 41, k) == NPF_OK);
  double pair = 0.0;
  for (int i = 0; i < 41; ++i) pair += k[i] * v[i];
  NEAR(pair, ep, 1e-12);

  /* Intrinsic distance in 1-D with G = I is |x - x0| / sqrt(2). */
  double rho[41], metr = -1.0;
  EXPECT(npf_intrinsic_distance(c, 20, NPF_STENCIL_N16, rho, 41, &metr) == NPF_OK);
  for (int i = 0; i < 41; ++i) NEAR(rho[i], fabs(i / 40.0 - 0.5) / sqrt(2.0), 1e-14);
  NEAR(metr, 0.0, 1e-15);

  /* Errors. */
  EXPECT(npf_energy(c, u, v, 40, &e) == NPF_ERR_SHAPE_MISMATCH);
  EXPECT(strstr(npf_last_error(), "node count") != NULL);
  EXPECT(npf_energy(c, NULL, v, 41, &e) == NPF_ERR_NULL_POINTER);
  npf_context* bad = NULL;
  EXPECT(npf_context_create(d, "identity", 0.5, -1.0, &bad) == NPF_ERR_INVALID_ARGUMENT);
  EXPECT(bad == NULL);
  EXPECT(npf_context_create(d, "chequered", 2.0, -1.0, &bad) == NPF_ERR_INVALID_ARGUMENT);
  EXPECT(npf_intrinsic_distance(c, 99, NPF_STENCIL_N8, rho, 41, NULL) == NPF_ERR_INVALID_ARGUMENT);

  npf_context_destroy(c);
  npf_domain_destroy(d);
}

static void test_capacity_and_solve(void) {
  const double lo[1] = {0.0}, hi[1] = {1.0};
  const size_t shape[1] = {41};
  npf_domain* d = NULL;
  EXPECT(npf_domain_create(1, lo, hi, shape, &d) == NPF_OK);
  unsigned char inner[41], outer[41];
  EXPECT(npf_domain_boundary_mask(d, outer, 41) == NPF_OK);
  for (int i = 0; i < 41; ++i) inner[i] = (i >= 10 && i <= 30);

  const double ps[2] = {2.0, 3.0};
  for (int t = 0; t < 2; ++t) {
    npf_context* c = NULL;
    EXPECT(npf_context_create(d, "identity", ps[t], -1.0, &c) == NPF_OK);
    double cap = 0.0, pot[41];
    EXPECT(npf_capacity(c, inner, outer, 41, &cap, pot) == NPF_OK);
    /* 2^{p/2} (0.25^{1-p} + 0.25^{1-p}). */
    const double exact = pow(2.0, ps[t] / 2) * 2.0 * pow(0.25, 1.0 - ps[t]);
    NEAR(cap, exact, 1e-8 * exact);
    NEAR(pot[20], 1.0, 1e-12);
    NEAR(pot[5], 0.5, 1e-9);

    /* Dirichlet data 0 and 3 at the ends: the solution is 3x for every p. */
    double b[41] = {0}, sol[41], res = -1.0;
    int its = -1;
    b[40] = 3.0;
    EXPECT(npf_solve_dirichlet(c, b, outer, 41, 0.0, 0, sol, &res, &its) == NPF_OK);
    for (int i = 0; i < 41; ++i) NEAR(sol[i], 3.0 * i / 40.0, 1e-9);
    EXPECT(res <= 1e-10);
    npf_context_destroy(c);
  }

  /* Constant scalar field 2 doubles Gamma: cap_2 = 2 * 16. */
  npf_context* s = NULL;
  EXPECT(npf_context_create(d, "scalar:2", 2.0, -1.0, &s) == NPF_OK);
  double cap = 0.0;
  EXPECT(npf_capacity(s, inner, outer, 41, &cap, NULL) == NPF_OK);
  NEAR(cap, 32.0, 1e-8);
  npf_context_destroy(s);

  /* The same through per-cell matrices. */
  double g[40];
  for (int i = 0; i < 40; ++i) g[i] = 2.0;
  npf_context* m = NULL;
  EXPECT(npf_context_create_matrices(d, g, 40, 2.0, -1.0, &m) == NPF_OK);
  EXPECT(npf_capacity(m, inner, outer, 41, &cap, NULL) == NPF_OK);
  NEAR(cap, 32.0, 1e-8);
  npf_context_destroy(m);
  EXPECT(npf_context_create_matrices(d, g, 39, 2.0, -1.0, &m) == NPF_ERR_SHAPE_MISMATCH);
  npf_domain_destroy(d);
}

static void test_nonconvergence(void) {
  const double lo[2] = {-1.0, -1.0}, hi[2] = {1.0, 1.0};
  const size_t shape[2] = {17, 17};
  npf_domain* d = NULL;
  EXPECT(npf_domain_create(2, lo, hi, shape, &d) == NPF_OK);
  npf_context* c = NULL;
  EXPECT(npf_context_create(d, "identity", 4.0, -1.0, &c) == NPF_OK);
  double b[289], sol[289], xy[2], res = 0.0;
  unsigned char mask[289];
  int its = -1;
  EXPECT(npf_domain_boundary_mask(d, mask, 289) == NPF_OK);
  for (size_t j = 0; j < 289; ++j) {
    npf_domain_node_coords(d, j, xy);
    b[j] = xy[0] * xy[0] * xy[0] - 3 * xy[0] * xy[1] * xy[1];
  }
  EXPECT(npf_solve_dirichlet(c, b, mask, 289, 0.0, 1, sol, &res, &its) == NPF_ERR_NONCONVERGENCE);
  EXPECT(its == 1);
  EXPECT(res > 0.0);
  npf_context_destroy(c);

  double ko = 0.0, ki = 0.0;
  EXPECT(npf_qr_dilatations(d, NPF_MAP_POWER, 2.0, NULL, &ko, &ki) == NPF_OK);
  NEAR(ko, 1.0, 1e-10);
  NEAR(ki, 1.0, 1e-10);
  EXPECT(npf_qr_dilatations(d, NPF_MAP_RADIAL, 3.0, NULL, &ko, &ki) == NPF_OK);
  NEAR(ko, 3.0, 1e-8);
  NEAR(ki, 3.0, 1e-8);
  const double a[4] = {2.0, 0.0, 0.0, 1.0};
  EXPECT(npf_qr_dilatations(d, NPF_MAP_LINEAR, 0.0, a, &ko, &ki) == NPF_OK);
  NEAR(ko, 2.0, 1e-12);
  EXPECT(npf_qr_dilatations(d, NPF_MAP_POWER, 2.5, NULL, &ko, &ki) == NPF_ERR_INVALID_ARGUMENT);
  npf_domain_destroy(d);
}

static void test_runs(void) {
  const char* cfg =
      "{\"command\":\"capacity\",\"p\":2,"
      "\"domain\":{\"dim\":1,\"extent\":[[0,1]],\"shape\":[41]},"
      "\"condenser\":{\"inner\":{\"type\":\"interval\",\"lo\":0.25,\"hi\":0.75}}}";
  npf_run* r = NULL;
  EXPECT(npf_run_config(cfg, NULL, &r) == NPF_OK);
  EXPECT(npf_run_exit_code(r) == 0);
  EXPECT(strstr(npf_run_report(r), "\"capacity\": 16") != NULL);
  EXPECT(npf_run_output_path(r) == NULL);
  npf_run_destroy(r);

  const char* missing =
      "{\"command\":\"capacity\",\"domain\":{\"dim\":1,\"extent\":[[0,1]],\"shape\":[5]},"
      "\"condenser\":{\"inner\":{\"type\":\"nodes\",\"ids\":[2]}}}";
  EXPECT(npf_run_config(missing, NULL, &r) == NPF_OK);
  EXPECT(npf_run_exit_code(r) == 1);
  EXPECT(strstr(npf_run_message(r), "'p'") != NULL);
  npf_run_destroy(r);

  npf_run_options o;
  memset(&o, 0, sizeof o);
  o.csv = 1;
  EXPECT(npf_run_config(cfg, &o, &r) == NPF_OK);
  EXPECT(strncmp(npf_run_report(r), "kind,suite,check,key,index,value\n", 33) == 0);
  npf_run_destroy(r);
  EXPECT(npf_run_config(NULL, NULL, &r) == NPF_ERR_NULL_POINTER);
  EXPECT(strcmp(npf_status_name(NPF_ERR_CONFIG), "config") == 0);
  EXPECT(strlen(npf_version()) > 0);
}

int main(void) {
  test_domain_and_forms();
  test_capacity_and_solve();
  test_nonconvergence();
  test_runs();
  if (failures) {
    fprintf(stderr, "%d expectation(s) failed\n", failures);
    return 1;
  }
  printf("c api: all expectations passed\n");
  return 0;
}
