// SPDX-License-Identifier: Apache-2.0
#include "npform/solver.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "npform/log.hpp"

namespace npf {

namespace {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct FreeSet {
  std::vector<int> index;  // node -> free slot or -1
  std::vector<std::size_t> nodes;
};

FreeSet free_set(const Mask& mask) {
  FreeSet f;
  f.index.assign(mask.size(), -1);
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (!mask[j]) {
      f.index[j] = int(f.nodes.size());
      f.nodes.push_back(j);
    }
  return f;
}

Vec gather(const std::vector<double>& full, const FreeSet& f) {
  Vec x(Eigen::Index(f.nodes.size()));
  for (std::size_t i = 0; i < f.nodes.size(); ++i) x[Eigen::Index(i)] = full[f.nodes[i]];
  return x;
}

void scatter(const Vec& x, const FreeSet& f, GridFunction& u) {
  for (std::size_t i = 0; i < f.nodes.size(); ++i) u[f.nodes[i]] = x[Eigen::Index(i)];
}

SpMat restrict_free(const SpMat& h, const FreeSet& f) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(std::size_t(h.nonZeros()));
  for (int col = 0; col < h.outerSize(); ++col)
    for (SpMat::InnerIterator it(h, col); it; ++it) {
      const int a = f.index[std::size_t(it.row())];
      const int b = f.index[std::size_t(it.col())];
      if (a >= 0 && b >= 0) trip.emplace_back(a, b, it.value());
    }
  const auto n = Eigen::Index(f.nodes.size());
  SpMat r(n, n);
  r.setFromTriplets(trip.begin(), trip.end());
  return r;
}

double inf_norm(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

void validate_boundary(const PFormContext& ctx, const GridFunction& boundary) {
  require(boundary.shape() == ctx.domain().shape(), ErrorCode::ShapeMismatch,
          "boundary data does not match the grid shape");
  require(boundary.any_masked(), ErrorCode::Precondition,
          "boundary mask is empty; the Dirichlet problem needs pinned nodes");
}

// p = 2 solution with the same Dirichlet data.
GridFunction linear_solve(const PFormContext& ctx, const GridFunction& boundary,
                          const FreeSet& f) {
  GridFunction u(boundary);
  if (f.nodes.empty()) return u;
  for (auto j : f.nodes) u[j] = 0.0;
  const SpMat full = gamma_matrix(*ctx.structure);
  Vec b(Eigen::Index(u.size()));
  for (std::size_t j = 0; j < u.size(); ++j) b[Eigen::Index(j)] = u[j];
  const Vec rhs_full = full * b;
  const SpMat a = restrict_free(full, f);
  Vec rhs(Eigen::Index(f.nodes.size()));
  for (std::size_t i = 0; i < f.nodes.size(); ++i)
    rhs[Eigen::Index(i)] = -rhs_full[Eigen::Index(f.nodes[i])];
  Eigen::SimplicialLDLT<SpMat> solver(a);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::Internal, "linear solve: factorization failed");
  const Vec x = solver.solve(rhs);
  scatter(x, f, u);
  return u;
}

GridFunction starting_point(const PFormContext& ctx, const GridFunction& boundary,
                            const SolveOptions& opts, const FreeSet& f) {
  if (!opts.initial_guess) return linear_solve(ctx, boundary, f);
  const GridFunction& g = *opts.initial_guess;
  require(g.shape() == boundary.shape(), ErrorCode::ShapeMismatch,
          "initial guess does not match the grid shape");
  GridFunction u(boundary);
  for (auto j : f.nodes) {
    require(std::isfinite(g[j]), ErrorCode::InvalidArgument,
            "initial guess has a non-finite value");
    u[j] = g[j];
  }
  return u;
}

class Problem {
 public:
  Problem(const PFormContext& ctx, const FreeSet& f) : ctx_(ctx), f_(f) {}

  double energy(const GridFunction& u) const { return p_energy(u, ctx_); }
  Vec grad(const GridFunction& u) const { return gather(lp_coefficients(u, ctx_), f_); }
  SpMat hessian(const GridFunction& u) const {
    return restrict_free(p_hessian(u, ctx_), f_);
  }
  GridFunction moved(const GridFunction& u, const Vec& x) const {
    GridFunction r(u);
    scatter(x, f_, r);
    return r;
  }
  Vec free_values(const GridFunction& u) const { return gather(u.values(), f_); }

 private:
  const PFormContext& ctx_;
  const FreeSet& f_;
};

// Accepts a trial whose energy increase is at roundoff level if it still
// lowers the gradient norm.
bool roundoff_accept(double j_old, double j_new, double g_old, double g_new) {
  return j_new <= j_old + 8.0 * kEps * std::abs(j_old) && g_new < g_old;
}

[[noreturn]] void fail(const std::string& why, SolveResult r) {
  std::ostringstream os;
  os << why << " after " << r.iterations << " iterations (residual "
     << r.residual_norm << ")";
  throw SolveError(os.str(), std::move(r));
}

SolveResult newton(const Problem& pb, GridFunction u, const SolveOptions& opts) {
  SolveResult res;
  res.method = method_name(opts.method);
  double j = pb.energy(u);
  res.energy_trace.push_back(j);
  double lambda = 0.0;
  for (int it = 0;; ++it) {
    const Vec g = pb.grad(u);
    const double gn = inf_norm(g);
    res.residual_norm = gn;
    res.iterations = it;
    log::debug("newton it " + std::to_string(it) + " J=" + std::to_string(j) +
               " |g|=" + std::to_string(gn));
    if (gn <= opts.grad_tol) {
      res.converged = true;
      break;
    }
    if (it >= opts.max_iter) break;
    const SpMat h = pb.hessian(u);
    double dscale = h.size() ? h.diagonal().cwiseAbs().mean() : 1.0;
    if (!(dscale > 0.0)) dscale = 1.0;
    const Vec x = pb.free_values(u);

    bool accepted = false;
    while (!accepted && lambda <= 1e12) {
      SpMat hl = h;
      if (lambda > 0.0)
        for (Eigen::Index i = 0; i < hl.rows(); ++i) hl.coeffRef(i, i) += lambda * dscale;
      Eigen::SimplicialLDLT<SpMat> solver(hl);
      if (solver.info() != Eigen::Success || solver.vectorD().minCoeff() <= 0.0) {
        lambda = std::max(1e-10, lambda * 10.0);
        continue;
      }
      const Vec d = -solver.solve(g);
      const double gd = g.dot(d);
      if (!(gd < 0.0)) {
        lambda = std::max(1e-10, lambda * 10.0);
        continue;
      }
      const double predicted = -(gd + 0.5 * d.dot(h * d));
      double t = 1.0;
      for (int ls = 0; ls < 60; ++ls, t *= opts.backtrack) {
        GridFunction trial = pb.moved(u, x + t * d);
        const double jt = pb.energy(trial);
        bool ok = jt <= j + opts.armijo_c1 * t * gd;
        if (!ok && jt <= j + 8.0 * kEps * std::abs(j))
          ok = roundoff_accept(j, jt, gn, inf_norm(pb.grad(trial)));
        if (!ok) continue;
        if (t == 1.0 && predicted > 0.0 && (j - jt) / predicted > 0.75)
          lambda = lambda < 1e-9 ? 0.0 : lambda / 4.0;
        else if (t < 1.0 || (predicted > 0.0 && (j - jt) / predicted < 0.25))
          lambda = std::max(1e-10, lambda * 4.0);
        u = std::move(trial);
        j = jt;
        res.energy_trace.push_back(j);
        accepted = true;
        break;
      }
      if (!accepted) lambda = std::max(1e-10, lambda * 10.0);
    }
    if (!accepted) {
      res.solution = u;
      fail("newton stagnated", std::move(res));
    }
  }
  res.solution = std::move(u);
  if (!res.converged) fail("newton did not converge", std::move(res));
  return res;
}

SolveResult first_order(const Problem& pb, GridFunction u, const SolveOptions& opts,
                        const Vec& precond) {
  const bool lbfgs = opts.method == SolveOptions::Method::Lbfgs;
  SolveResult res;
  res.method = method_name(opts.method);
  double j = pb.energy(u);
  res.energy_trace.push_back(j);
  std::deque<std::pair<Vec, Vec>> mem;
  Vec g = pb.grad(u);
  for (int it = 0;; ++it) {
    const double gn = inf_norm(g);
    res.residual_norm = gn;
    res.iterations = it;
    if (gn <= opts.grad_tol) {
      res.converged = true;
      break;
    }
    if (it >= opts.max_iter) break;
    Vec d;
    if (lbfgs && !mem.empty()) {
      Vec q = g;
      std::vector<double> alpha(mem.size());
      for (std::size_t k = mem.size(); k-- > 0;) {
        const auto& [s, y] = mem[k];
        alpha[k] = s.dot(q) / y.dot(s);
        q -= alpha[k] * y;
      }
      const auto& [s, y] = mem.back();
      q *= s.dot(y) / y.dot(y);
      for (std::size_t k = 0; k < mem.size(); ++k) {
        const auto& [sk, yk] = mem[k];
        const double beta = yk.dot(q) / yk.dot(sk);
        q += (alpha[k] - beta) * sk;
      }
      d = -q;
    } else {
      d = -g.cwiseQuotient(precond);
    }
    double gd = g.dot(d);
    if (!(gd < 0.0)) {
      mem.clear();
      d = -g.cwiseQuotient(precond);
      gd = g.dot(d);
    }
    const Vec x = pb.free_values(u);
    bool accepted = false;
    double t = 1.0;
    for (int ls = 0; ls < 60; ++ls, t *= opts.backtrack) {
      GridFunction trial = pb.moved(u, x + t * d);
      const double jt = pb.energy(trial);
      bool ok = jt <= j + opts.armijo_c1 * t * gd;
      Vec gt;
      if (!ok && jt <= j + 8.0 * kEps * std::abs(j)) {
        gt = pb.grad(trial);
        ok = roundoff_accept(j, jt, gn, inf_norm(gt));
      }
      if (!ok) continue;
      if (gt.size() == 0) gt = pb.grad(trial);
      const Vec s = t * d;
      const Vec y = gt - g;
      if (lbfgs && s.dot(y) > 1e-300) {
        mem.emplace_back(s, y);
        if (int(mem.size()) > opts.lbfgs_memory) mem.pop_front();
      }
      u = std::move(trial);
      j = jt;
      g = std::move(gt);
      res.energy_trace.push_back(j);
      accepted = true;
      break;
    }
    if (!accepted) {
      res.solution = u;
      fail(std::string(res.method) + " line search failed", std::move(res));
    }
  }
  res.solution = std::move(u);
  if (!res.converged) fail(res.method + " did not converge", std::move(res));
  return res;
}

// Diagonal of the p = 2 stiffness on the free nodes.
Vec jacobi(const PFormContext& ctx, const FreeSet& f) {
  Vec d = restrict_free(gamma_matrix(*ctx.structure), f).diagonal().cwiseAbs();
  const double floor = d.size() ? std::max(d.maxCoeff(), 1e-300) * 1e-12 : 1.0;
  return d.cwiseMax(floor);
}

}  // namespace

void SolveOptions::validate() const {
  require(grad_tol > 0.0 && std::isfinite(grad_tol), ErrorCode::InvalidArgument,
          "grad_tol must be > 0");
  require(max_iter >= 1, ErrorCode::InvalidArgument, "max_iter must be >= 1");
  require(armijo_c1 > 0.0 && armijo_c1 < 1.0, ErrorCode::InvalidArgument,
          "armijo c1 must lie in (0, 1)");
  require(backtrack > 0.0 && backtrack < 1.0, ErrorCode::InvalidArgument,
          "backtrack factor must lie in (0, 1)");
  require(lbfgs_memory >= 1, ErrorCode::InvalidArgument, "lbfgs memory must be >= 1");
}

const char* method_name(SolveOptions::Method m) {
  switch (m) {
    case SolveOptions::Method::NewtonRegularized: return "newton_regularized";
    case SolveOptions::Method::Lbfgs: return "lbfgs";
    case SolveOptions::Method::GradientArmijo: return "gradient_armijo";
  }
  return "unknown";
}

SolveOptions::Method parse_method(const std::string& name) {
  if (name == "newton_regularized" || name == "newton")
    return SolveOptions::Method::NewtonRegularized;
  if (name == "lbfgs") return SolveOptions::Method::Lbfgs;
  if (name == "gradient_armijo") return SolveOptions::Method::GradientArmijo;
  throw Error(ErrorCode::InvalidArgument, "unknown solver method '" + name + "'");
}

SolveResult solve_dirichlet(const PFormContext& ctx, const GridFunction& boundary,
                            const SolveOptions& opts) {
  opts.validate();
  validate_boundary(ctx, boundary);
  const FreeSet f = free_set(boundary.mask());
  GridFunction u = starting_point(ctx, boundary, opts, f);
  const Problem pb(ctx, f);
  if (f.nodes.empty()) {
    SolveResult r;
    r.solution = u;
    r.converged = true;
    r.method = method_name(opts.method);
    r.energy_trace.push_back(pb.energy(u));
    return r;
  }
  if (opts.method == SolveOptions::Method::NewtonRegularized)
    return newton(pb, std::move(u), opts);
  const Vec pre = jacobi(ctx, f);
  return first_order(pb, std::move(u), opts, pre);
}

SolveResult solve_obstacle(const PFormContext& ctx, const GridFunction& obstacle,
                           const GridFunction& boundary, const SolveOptions& opts) {
  opts.validate();
  validate_boundary(ctx, boundary);
  require(obstacle.shape() == boundary.shape(), ErrorCode::ShapeMismatch,
          "obstacle does not match the grid shape");
  for (std::size_t j = 0; j < obstacle.size(); ++j) {
    require(!std::isnan(obstacle[j]) && obstacle[j] != std::numeric_limits<double>::infinity(),
            ErrorCode::InvalidArgument, "obstacle must be finite or -inf");
    if (boundary.masked(j) && obstacle[j] > boundary[j] + 1e-12)
      throw Error(ErrorCode::Precondition,
                  "infeasible: obstacle exceeds boundary data at node " +
                      std::to_string(j));
  }
  const FreeSet f = free_set(boundary.mask());
  const Problem pb(ctx, f);
  const Vec psi = gather(obstacle.values(), f);
  GridFunction u = starting_point(ctx, boundary, opts, f);
  Vec x = pb.free_values(u).cwiseMax(psi);
  u = pb.moved(u, x);

  SolveResult res;
  res.method = "projected_newton";
  double j = pb.energy(u);
  res.energy_trace.push_back(j);
  double lambda = 0.0;
  const Eigen::Index n = x.size();
  auto project = [&](const Vec& y) { return Vec(y.cwiseMax(psi)); };
  auto kkt = [&](const Vec& xv, const Vec& g) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      r = std::max(r, xv[i] > psi[i] ? std::abs(g[i]) : std::max(0.0, -g[i]));
    return r;
  };

  for (int it = 0;; ++it) {
    const Vec g = pb.grad(u);
    const double rn = kkt(x, g);
    res.residual_norm = rn;
    res.iterations = it;
    if (rn <= opts.grad_tol) {
      res.converged = true;
      break;
    }
    if (it >= opts.max_iter) break;
    const SpMat h = pb.hessian(u);
    Vec diag = h.diagonal().cwiseAbs();
    const double dfloor = n ? std::max(diag.maxCoeff(), 1e-300) * 1e-12 : 1.0;
    diag = diag.cwiseMax(dfloor);

    const double w = inf_norm(x - project(x - g.cwiseQuotient(diag)));
    const double delta = std::min(1e-6 * (1.0 + inf_norm(x)), w);
    std::vector<int> inactive_index(std::size_t(n), -1);
    std::vector<Eigen::Index> inactive;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!(x[i] - psi[i] <= delta && g[i] > 0.0)) {
        inactive_index[std::size_t(i)] = int(inactive.size());
        inactive.push_back(i);
      }

    bool accepted = false;
    auto try_arc = [&](const Vec& d, const Vec& model_dir) {
      double t = 1.0;
      for (int ls = 0; ls < 60; ++ls, t *= opts.backtrack) {
        const Vec xt = project(x + t * d);
        const Vec step = xt - x;
        if (inf_norm(step) == 0.0) return false;
        GridFunction trial = pb.moved(u, xt);
        const double jt = pb.energy(trial);
        const double model = t * g.dot(model_dir) + g.dot(step - t * model_dir);
        bool ok = jt <= j + opts.armijo_c1 * std::min(model, 0.0);
        if (!ok && jt <= j + 8.0 * kEps * std::abs(j))
          ok = roundoff_accept(j, jt, rn, kkt(xt, pb.grad(trial)));
        if (!ok) continue;
        x = xt;
        u = std::move(trial);
        j = jt;
        res.energy_trace.push_back(j);
        return true;
      }
      return false;
    };

    while (!accepted && lambda <= 1e12 && !inactive.empty()) {
      std::vector<Eigen::Triplet<double>> trip;
      for (int col = 0; col < h.outerSize(); ++col)
        for (SpMat::InnerIterator itr(h, col); itr; ++itr) {
          const int a = inactive_index[std::size_t(itr.row())];
          const int b = inactive_index[std::size_t(itr.col())];
          if (a >= 0 && b >= 0) trip.emplace_back(a, b, itr.value());
        }
      const auto ni = Eigen::Index(inactive.size());
      SpMat hi(ni, ni);
      hi.setFromTriplets(trip.begin(), trip.end());
      if (lambda > 0.0)
        for (Eigen::Index i = 0; i < ni; ++i)
          hi.coeffRef(i, i) += lambda * diag[inactive[std::size_t(i)]];
      Eigen::SimplicialLDLT<SpMat> solver(hi);
      if (solver.info() != Eigen::Success || solver.vectorD().minCoeff() <= 0.0) {
        lambda = std::max(1e-10, lambda * 10.0);
        continue;
      }
      Vec gi(ni);
      for (Eigen::Index i = 0; i < ni; ++i) gi[i] = g[inactive[std::size_t(i)]];
      const Vec di = -solver.solve(gi);
      Vec d = -g.cwiseQuotient(diag);
      Vec model_dir = Vec::Zero(n);
      for (Eigen::Index i = 0; i < ni; ++i) {
        d[inactive[std::size_t(i)]] = di[i];
        model_dir[inactive[std::size_t(i)]] = di[i];
      }
      if (!(gi.dot(di) < 0.0) && inf_norm(gi) > 0.0) {
        lambda = std::max(1e-10, lambda * 10.0);
        continue;
      }
      accepted = try_arc(d, model_dir);
      if (accepted)
        lambda = lambda < 1e-9 ? 0.0 : lambda / 4.0;
      else
        lambda = std::max(1e-10, lambda * 10.0);
    }
    if (!accepted) {
      // Projected scaled-gradient fallback.
      const Vec d = -g.cwiseQuotient(diag);
      accepted = try_arc(d, Vec::Zero(n));
    }
    if (!accepted) {
      res.solution = u;
      fail("projected newton stagnated", std::move(res));
    }
  }

  const Vec g = pb.grad(u);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(psi[i])) continue;
    const double gap = x[i] - psi[i];
    if (gap <= 0.0) ++res.active_nodes;
    res.complementarity = std::max(res.complementarity, std::abs(gap * g[i]));
  }
  res.solution = std::move(u);
  if (!res.converged) fail("projected newton did not converge", std::move(res));
  return res;
}

double harmonicity_residual(const GridFunction& u, const Mask& region,
                            const PFormContext& ctx) {
  require(region.size() == u.size(), ErrorCode::ShapeMismatch,
          "region mask length does not match node count");
  const auto c = lp_coefficients(u, ctx);
  double r = 0.0;
  bool any = false;
  for (std::size_t j = 0; j < c.size(); ++j)
    if (region[j]) {
      any = true;
      r = std::max(r, std::abs(c[j]));
    }
  require(any, ErrorCode::Precondition, "harmonicity region is empty");
  return r;
}

double normalized_harmonicity_residual(const GridFunction& u, const Mask& region,
                                       const PFormContext& ctx) {
  require(region.size() == u.size(), ErrorCode::ShapeMismatch,
          "region mask length does not match node count");
  const auto c = lp_coefficients(u, ctx);
  const auto& mu = ctx.domain().node_measure();
  double r = 0.0;
  bool any = false;
  for (std::size_t j = 0; j < c.size(); ++j)
    if (region[j]) {
      any = true;
      r = std::max(r, std::abs(c[j]) / mu[j]);
    }
  require(any, ErrorCode::Precondition, "harmonicity region is empty");
  return r;
}

}  // namespace npf
