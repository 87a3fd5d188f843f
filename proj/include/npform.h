/* SPDX-License-Identifier: Apache-2.0 */
#ifndef NPFORM_H
#define NPFORM_H

/*
 * C interface of the npform library.
 *
 * Objects are opaque handles created by npf_*_create and released by the
 * matching npf_*_destroy. Every fallible call returns an npf_status; on
 * failure npf_last_error() describes the problem. The message is stored per
 * thread and stays valid until the next failing call on that thread.
 *
 * Grid functions cross the boundary as arrays of node values in row-major
 * order (last axis fastest); masks are arrays of bytes, nonzero = set.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(NPFORM_BUILDING)
#define NPF_API __declspec(dllexport)
#else
#define NPF_API __declspec(dllimport)
#endif
#else
#define NPF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum npf_status {
  NPF_OK = 0,
  NPF_ERR_INVALID_ARGUMENT = 1,
  NPF_ERR_SHAPE_MISMATCH = 2,
  NPF_ERR_PRECONDITION = 3,
  NPF_ERR_NONCONVERGENCE = 4,
  NPF_ERR_CONFIG = 5,
  NPF_ERR_INTERNAL = 6,
  NPF_ERR_NULL_POINTER = 7
} npf_status;

typedef enum npf_stencil { NPF_STENCIL_N8 = 8, NPF_STENCIL_N16 = 16 } npf_stencil;

typedef enum npf_mapping_kind {
  NPF_MAP_POWER = 0,
  NPF_MAP_RADIAL = 1,
  NPF_MAP_LINEAR = 2
} npf_mapping_kind;

typedef struct npf_domain npf_domain;
typedef struct npf_context npf_context;
typedef struct npf_run npf_run;

NPF_API const char* npf_version(void);
NPF_API const char* npf_last_error(void);
NPF_API const char* npf_status_name(npf_status s);

/* Worker count for parallel sections; 0 selects the hardware concurrency.
 * Results do not depend on it. */
NPF_API npf_status npf_set_threads(unsigned n);

/* ---- domains -------------------------------------------------------- */

/* `lower`, `upper` and `shape` hold `dim` entries (1 <= dim <= 3). */
NPF_API npf_status npf_domain_create(size_t dim, const double* lower, const double* upper,
                                     const size_t* shape, npf_domain** out);
NPF_API void npf_domain_destroy(npf_domain* d);
NPF_API npf_status npf_domain_node_count(const npf_domain* d, size_t* out);
NPF_API npf_status npf_domain_cell_count(const npf_domain* d, size_t* out);
/* Writes dim coordinates of node `node` into `xyz`. */
NPF_API npf_status npf_domain_node_coords(const npf_domain* d, size_t node, double* xyz);
NPF_API npf_status npf_domain_boundary_mask(const npf_domain* d, unsigned char* mask,
                                            size_t n);

/* ---- p-form contexts ------------------------------------------------ */

/* `field` is "identity" or "scalar:<v>". eps < 0 selects the default
 * regularization (0 for p >= 2, 1e-12 below). */
NPF_API npf_status npf_context_create(const npf_domain* d, const char* field, double p,
                                      double eps, npf_context** out);
/* Per-cell symmetric matrices, cells * dim * dim entries row-major. */
NPF_API npf_status npf_context_create_matrices(const npf_domain* d, const double* matrices,
                                               size_t count, double p, double eps,
                                               npf_context** out);
NPF_API void npf_context_destroy(npf_context* c);
NPF_API npf_status npf_context_p(const npf_context* c, double* out);

/* E(u, v) = 1/2 sum Gamma(u, v) m. */
NPF_API npf_status npf_energy(const npf_context* c, const double* u, const double* v,
                              size_t n, double* out);
/* E^p(u, v). */
NPF_API npf_status npf_p_form(const npf_context* c, const double* u, const double* v,
                              size_t n, double* out);
/* J_p(u). */
NPF_API npf_status npf_p_energy(const npf_context* c, const double* u, size_t n,
                                double* out);
/* coeffs[j] = E^p(u, phi_j). */
NPF_API npf_status npf_lp_apply(const npf_context* c, const double* u, size_t n,
                                double* coeffs);

/* ---- solvers -------------------------------------------------------- */

/* Minimizes J_p with u = boundary on mask. grad_tol <= 0 and max_iter <= 0
 * select the defaults. On NPF_ERR_NONCONVERGENCE the last iterate is still
 * written to `solution` and `residual`/`iterations` are set. */
NPF_API npf_status npf_solve_dirichlet(const npf_context* c, const double* boundary,
                                       const unsigned char* mask, size_t n, double grad_tol,
                                       int max_iter, double* solution, double* residual,
                                       int* iterations);

/* Condenser capacity of `inner` against `outer`; `potential` may be NULL. */
NPF_API npf_status npf_capacity(const npf_context* c, const unsigned char* inner,
                                const unsigned char* outer, size_t n, double* value,
                                double* potential);

/* ---- intrinsic metric ----------------------------------------------- */

NPF_API npf_status npf_intrinsic_distance(const npf_context* c, size_t source,
                                          npf_stencil stencil, double* distance, size_t n,
                                          double* metrication);

/* ---- quasiregular mappings ------------------------------------------ */

/* param is k for power maps, a for radial stretches, and unused for linear
 * maps, which read dim*dim row-major entries from `matrix`. */
NPF_API npf_status npf_qr_dilatations(const npf_domain* d, npf_mapping_kind kind,
                                      double param, const double* matrix, double* k_outer,
                                      double* k_inner);

/* ---- batch runs ----------------------------------------------------- */

typedef struct npf_run_options {
  int has_seed;
  uint64_t seed;
  int has_tol;
  double tol;
  int csv;
  /* Directory for relative paths in the config; may be NULL. */
  const char* base_dir;
} npf_run_options;

/* Runs one JSON config. Returns NPF_OK whenever a run handle was produced,
 * including runs whose exit code is nonzero; `opts` may be NULL. */
NPF_API npf_status npf_run_config(const char* config_json, const npf_run_options* opts,
                                  npf_run** out);
/* 0 ok, 1 config error, 2 computation failure, 3 failed checks. */
NPF_API int npf_run_exit_code(const npf_run* r);
NPF_API const char* npf_run_report(const npf_run* r);
NPF_API const char* npf_run_message(const npf_run* r);
/* The config's "output" path or NULL. */
NPF_API const char* npf_run_output_path(const npf_run* r);
NPF_API void npf_run_destroy(npf_run* r);

#ifdef __cplusplus
}
#endif

#endif /* NPFORM_H */
