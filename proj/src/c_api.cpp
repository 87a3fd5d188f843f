// SPDX-License-Identifier: Apache-2.0
#include "npform.h"

#include <cmath>
#include <string>

#include "npform/capacity.hpp"
#include "npform/commands.hpp"
#include "npform/error.hpp"
#include "npform/intrinsic.hpp"
#include "npform/parallel.hpp"
#include "npform/pform.hpp"
#include "npform/quasiregular.hpp"
#include "npform/solver.hpp"

struct npf_domain {
  npf::GridDomain domain;
};

struct npf_context {
  npf::PFormContext ctx;
};

struct npf_run {
  npf::RunOutcome outcome;
};

namespace {

thread_local std::string last_error;

npf_status fail(npf_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

npf_status to_status(npf::ErrorCode c) {
  switch (c) {
    case npf::ErrorCode::InvalidArgument: return NPF_ERR_INVALID_ARGUMENT;
    case npf::ErrorCode::ShapeMismatch: return NPF_ERR_SHAPE_MISMATCH;
    case npf::ErrorCode::Precondition: return NPF_ERR_PRECONDITION;
    case npf::ErrorCode::NonConvergence: return NPF_ERR_NONCONVERGENCE;
    case npf::ErrorCode::Config: return NPF_ERR_CONFIG;
    case npf::ErrorCode::Internal: return NPF_ERR_INTERNAL;
  }
  return NPF_ERR_INTERNAL;
}

// Runs `body`, translating exceptions into status codes.
template <class F>
npf_status guarded(F&& body) {
  try {
    return body();
  } catch (const npf::Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(NPF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(NPF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(NPF_ERR_INTERNAL, "unknown exception");
  }
}

#define NPF_NONNULL(p)                                                 \
  do {                                                                 \
    if (!(p)) return fail(NPF_ERR_NULL_POINTER, #p " must not be NULL"); \
  } while (0)

npf_status check_len(const npf::GridDomain& d, size_t n) {
  if (n != d.node_count())
    return fail(NPF_ERR_SHAPE_MISMATCH, "array length " + std::to_string(n) +
                                            " does not match node count " +
                                            std::to_string(d.node_count()));
  return NPF_OK;
}

npf::GridFunction nodal(const npf::GridDomain& d, const double* v) {
  return npf::GridFunction(d, std::vector<double>(v, v + d.node_count()));
}

npf::Mask mask_of(const unsigned char* m, size_t n) {
  npf::Mask out(n);
  for (size_t i = 0; i < n; ++i) out[i] = m[i] ? 1 : 0;
  return out;
}

std::optional<double> eps_of(double eps) {
  if (eps < 0.0) return std::nullopt;
  return eps;
}

}  // namespace

extern "C" {

const char* npf_version(void) { return "1.0.0"; }

const char* npf_last_error(void) { return last_error.c_str(); }

const char* npf_status_name(npf_status s) {
  switch (s) {
    case NPF_OK: return "ok";
    case NPF_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case NPF_ERR_SHAPE_MISMATCH: return "shape_mismatch";
    case NPF_ERR_PRECONDITION: return "precondition";
    case NPF_ERR_NONCONVERGENCE: return "nonconvergence";
    case NPF_ERR_CONFIG: return "config";
    case NPF_ERR_INTERNAL: return "internal";
    case NPF_ERR_NULL_POINTER: return "null_pointer";
  }
  return "unknown";
}

npf_status npf_set_threads(unsigned n) {
  npf::set_thread_count(n);
  return NPF_OK;
}

npf_status npf_domain_create(size_t dim, const double* lower, const double* upper,
                             const size_t* shape, npf_domain** out) {
  NPF_NONNULL(lower);
  NPF_NONNULL(upper);
  NPF_NONNULL(shape);
  NPF_NONNULL(out);
  *out = nullptr;
  return guarded([&] {
    if (dim < 1 || dim > 3) return fail(NPF_ERR_INVALID_ARGUMENT, "dim must be 1, 2 or 3");
    std::vector<std::pair<double, double>> ext;
    std::vector<std::size_t> sh;
    for (size_t i = 0; i < dim; ++i) {
      ext.emplace_back(lower[i], upper[i]);
      sh.push_back(shape[i]);
    }
    *out = new npf_domain{npf::GridDomain(std::move(ext), std::move(sh))};
    return NPF_OK;
  });
}

void npf_domain_destroy(npf_domain* d) { delete d; }

npf_status npf_domain_node_count(const npf_domain* d, size_t* out) {
  NPF_NONNULL(d);
  NPF_NONNULL(out);
  *out = d->domain.node_count();
  return NPF_OK;
}

npf_status npf_domain_cell_count(const npf_domain* d, size_t* out) {
  NPF_NONNULL(d);
  NPF_NONNULL(out);
  *out = d->domain.cell_count();
  return NPF_OK;
}

npf_status npf_domain_node_coords(const npf_domain* d, size_t node, double* xyz) {
  NPF_NONNULL(d);
  NPF_NONNULL(xyz);
  if (node >= d->domain.node_count()) return fail(NPF_ERR_INVALID_ARGUMENT, "node out of range");
  const auto x = d->domain.node_coords(node);
  for (size_t i = 0; i < d->domain.dim(); ++i) xyz[i] = x[i];
  return NPF_OK;
}

npf_status npf_domain_boundary_mask(const npf_domain* d, unsigned char* mask, size_t n) {
  NPF_NONNULL(d);
  NPF_NONNULL(mask);
  if (auto s = check_len(d->domain, n); s != NPF_OK) return s;
  const auto m = d->domain.boundary_mask();
  for (size_t i = 0; i < n; ++i) mask[i] = m[i];
  return NPF_OK;
}

npf_status npf_context_create(const npf_domain* d, const char* field, double p, double eps,
                              npf_context** out) {
  NPF_NONNULL(d);
  NPF_NONNULL(field);
  NPF_NONNULL(out);
  *out = nullptr;
  return guarded([&] {
    const std::string f(field);
    npf::StructurePtr s;
    if (f == "identity") {
      s = npf::make_identity_structure(d->domain);
    } else if (f.rfind("scalar:", 0) == 0) {
      const double v = std::stod(f.substr(7));
      s = npf::make_structure(d->domain, npf::CoefficientField::scalar(
                                             d->domain.dim(), d->domain.cell_count(), v));
    } else {
      return fail(NPF_ERR_INVALID_ARGUMENT, "field must be identity or scalar:<v>");
    }
    *out = new npf_context{npf::PFormContext::make(std::move(s), p, eps_of(eps))};
    return NPF_OK;
  });
}

npf_status npf_context_create_matrices(const npf_domain* d, const double* matrices,
                                       size_t count, double p, double eps, npf_context** out) {
  NPF_NONNULL(d);
  NPF_NONNULL(matrices);
  NPF_NONNULL(out);
  *out = nullptr;
  return guarded([&] {
    npf::DomainSpec spec;
    for (size_t i = 0; i < d->domain.dim(); ++i)
      spec.extent.emplace_back(d->domain.lower(i), d->domain.upper(i));
    spec.shape = d->domain.shape();
    spec.field = "file:";
    spec.field_matrices.assign(matrices, matrices + count);
    const size_t want = d->domain.cell_count() * d->domain.dim() * d->domain.dim();
    if (count != want)
      return fail(NPF_ERR_SHAPE_MISMATCH, "expected " + std::to_string(want) + " matrix entries");
    auto s = npf::build_structure(spec);
    *out = new npf_context{npf::PFormContext::make(std::move(s), p, eps_of(eps))};
    return NPF_OK;
  });
}

void npf_context_destroy(npf_context* c) { delete c; }

npf_status npf_context_p(const npf_context* c, double* out) {
  NPF_NONNULL(c);
  NPF_NONNULL(out);
  *out = c->ctx.p;
  return NPF_OK;
}

npf_status npf_energy(const npf_context* c, const double* u, const double* v, size_t n,
                      double* out) {
  NPF_NONNULL(c);
  NPF_NONNULL(u);
  NPF_NONNULL(v);
  NPF_NONNULL(out);
  return guarded([&] {
    const auto& d = c->ctx.domain();
    if (auto s = check_len(d, n); s != NPF_OK) return s;
    *out = npf::energy(nodal(d, u), nodal(d, v), *c->ctx.structure);
    return NPF_OK;
  });
}

npf_status npf_p_form(const npf_context* c, const double* u, const double* v, size_t n,
                      double* out) {
  NPF_NONNULL(c);
  NPF_NONNULL(u);
  NPF_NONNULL(v);
  NPF_NONNULL(out);
  return guarded([&] {
    const auto& d = c->ctx.domain();
    if (auto s = check_len(d, n); s != NPF_OK) return s;
    *out = npf::p_form(nodal(d, u), nodal(d, v), c->ctx);
    return NPF_OK;
  });
}

npf_status npf_p_energy(const npf_context* c, const double* u, size_t n, double* out) {
  NPF_NONNULL(c);
  NPF_NONNULL(u);
  NPF_NONNULL(out);
  return guarded([&] {
    const auto& d = c->ctx.domain();
    if (auto s = check_len(d, n); s != NPF_OK) return s;
    *out = npf::p_energy(nodal(d, u), c->ctx);
    return NPF_OK;
  });
}

npf_status npf_lp_apply(const npf_context* c, const double* u, size_t n, double* coeffs) {
  NPF_NONNULL(c);
  NPF_NONNULL(u);
  NPF_NONNULL(coeffs);
  return guarded([&] {
    const auto& d = c->ctx.domain();
    if (auto s = check_len(d, n); s != NPF_OK) return s;
    const auto k = npf::lp_coefficients(nodal(d, u), c->ctx);
    std::copy(k.begin(), k.end(), coeffs);
    return NPF_OK;
  });
}

npf_status npf_solve_dirichlet(const npf_context* c, const double* boundary,
                               const unsigned char* mask, size_t n, double grad_tol,
                               int max_iter, double* solution, double* residual,
                               int* iterations) {
  NPF_NONNULL(c);
  NPF_NONNULL(boundary);
  NPF_NONNULL(mask);
  NPF_NONNULL(solution);
  return guarded([&] {
    const auto& d = c->ctx.domain();
    if (auto s = check_len(d, n); s != NPF_OK) return s;
    npf::SolveOptions opts;
    if (grad_tol > 0.0) opts.grad_tol = grad_tol;
    if (max_iter > 0) opts.max_iter = max_iter;
    auto write = [&](const npf::SolveResult& r) {
      std::copy(r.solution.values().begin(), r.solution.values().end(), solution);
      if (residual) *residual = r.residual_norm;
      if (iterations) *iterations = r.iterations;
    };
    try {
      write(npf::solve_dirichlet(c->ctx, nodal(d, boundary).with_mask(mask_of(mask, n)), opts));
    } catch (const npf::SolveError& e) {
      write(e.partial());
      throw;
    }
    return NPF_OK;
  });
}

npf_status npf_capacity(const npf_context* c, const unsigned char* inner,
                        const unsigned char* outer, size_t n, double* value, double* potential) {
  NPF_NONNULL(c);
  NPF_NONNULL(inner);
  NPF_NONNULL(outer);
  NPF_NONNULL(value);
  return guarded([&] {
    const auto& d = c->ctx.domain();
    if (auto s = check_len(d, n); s != NPF_OK) return s;
    const auto r = npf::capacity(npf::Condenser{mask_of(inner, n), mask_of(outer, n)}, c->ctx);
    *value = r.value;
    if (potential)
      std::copy(r.potential.values().begin(), r.potential.values().end(), potential);
    return NPF_OK;
  });
}

npf_status npf_intrinsic_distance(const npf_context* c, size_t source, npf_stencil stencil,
                                  double* distance, size_t n, double* metrication) {
  NPF_NONNULL(c);
  NPF_NONNULL(distance);
  return guarded([&] {
    const auto& d = c->ctx.domain();
    if (auto s = check_len(d, n); s != NPF_OK) return s;
    if (source >= n) return fail(NPF_ERR_INVALID_ARGUMENT, "source node out of range");
    npf::Stencil st;
    if (stencil == NPF_STENCIL_N8)
      st = npf::Stencil::N8;
    else if (stencil == NPF_STENCIL_N16)
      st = npf::Stencil::N16;
    else
      return fail(NPF_ERR_INVALID_ARGUMENT, "stencil must be NPF_STENCIL_N8 or NPF_STENCIL_N16");
    const auto rho = npf::intrinsic_distance(source, *c->ctx.structure, st);
    std::copy(rho.distance.begin(), rho.distance.end(), distance);
    if (metrication) *metrication = rho.metrication;
    return NPF_OK;
  });
}

npf_status npf_qr_dilatations(const npf_domain* d, npf_mapping_kind kind, double param,
                              const double* matrix, double* k_outer, double* k_inner) {
  NPF_NONNULL(d);
  NPF_NONNULL(k_outer);
  NPF_NONNULL(k_inner);
  return guarded([&] {
    npf::MappingSpec f;
    const std::size_t n = d->domain.dim();
    switch (kind) {
      case NPF_MAP_POWER:
        if (param != std::round(param))
          return fail(NPF_ERR_INVALID_ARGUMENT, "power maps need an integer exponent");
        f = npf::MappingSpec::make_power(int(param));
        break;
      case NPF_MAP_RADIAL:
        f = npf::MappingSpec::make_radial(param);
        break;
      case NPF_MAP_LINEAR:
        NPF_NONNULL(matrix);
        f = npf::MappingSpec::make_linear(std::vector<double>(matrix, matrix + n * n));
        break;
      default:
        return fail(NPF_ERR_INVALID_ARGUMENT, "unknown mapping kind");
    }
    f.validate(d->domain);
    const auto a = npf::analyze_mapping(f, d->domain);
    *k_outer = a.k_outer;
    *k_inner = a.k_inner;
    return NPF_OK;
  });
}

npf_status npf_run_config(const char* config_json, const npf_run_options* opts, npf_run** out) {
  NPF_NONNULL(config_json);
  NPF_NONNULL(out);
  *out = nullptr;
  return guarded([&] {
    npf::RunOptions o;
    if (opts) {
      if (opts->has_seed) o.seed = opts->seed;
      if (opts->has_tol) o.tol = opts->tol;
      o.csv = opts->csv != 0;
      if (opts->base_dir) o.base_dir = opts->base_dir;
    }
    *out = new npf_run{npf::run_config(config_json, o)};
    return NPF_OK;
  });
}

int npf_run_exit_code(const npf_run* r) { return r ? int(r->outcome.exit_code) : 2; }

const char* npf_run_report(const npf_run* r) { return r ? r->outcome.report.c_str() : ""; }

const char* npf_run_message(const npf_run* r) { return r ? r->outcome.message.c_str() : ""; }

const char* npf_run_output_path(const npf_run* r) {
  return r && r->outcome.output ? r->outcome.output->c_str() : nullptr;
}

void npf_run_destroy(npf_run* r) { delete r; }

}  // extern "C"
