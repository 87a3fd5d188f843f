// SPDX-License-Identifier: Apache-2.0
#include "npform/commands.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "npform/capacity.hpp"
#include "npform/error.hpp"
#include "npform/intrinsic.hpp"
#include "npform/log.hpp"
#include "npform/pform.hpp"
#include "npform/quasiregular.hpp"
#include "npform/solver.hpp"

namespace npf {

namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

// Everything a command produces before serialization.
struct Outcome {
  ordered values = ordered::object();
  std::vector<std::pair<std::string, CheckReport>> checks;  // (suite, report)
  ordered arrays = ordered::object();
  std::string status = "ok";
  ExitCode code = ExitCode::Ok;
  std::vector<std::string> notes;
};

void add_suite(Outcome& out, const SuiteReport& s) {
  for (const auto& c : s.checks) out.checks.emplace_back(s.suite, c);
}

ordered grid_array(const GridFunction& u) {
  ordered g = ordered::object();
  g["shape"] = u.shape();
  g["values"] = u.values();
  return g;
}

PFormContext make_context(const RunConfig& cfg, StructurePtr s, double p) {
  return PFormContext::make(std::move(s), p, cfg.eps);
}

// ---------------------------------------------------------------- solve

Outcome cmd_solve(const RunConfig& cfg, const PFormContext& ctx) {
  const auto& b = *cfg.solve;
  const auto& d = ctx.domain();
  Mask mask = d.boundary_mask();
  if (b.pinned) mask = mask_union(mask, build_mask(*b.pinned, d));
  const GridFunction boundary = build_function(b.boundary, d).with_mask(mask);
  std::optional<GridFunction> obstacle;
  if (b.obstacle) obstacle = build_function(*b.obstacle, d);

  Outcome out;
  SolveResult res;
  try {
    res = obstacle ? solve_obstacle(ctx, *obstacle, boundary, cfg.solver)
                   : solve_dirichlet(ctx, boundary, cfg.solver);
  } catch (const SolveError& e) {
    res = e.partial();
    out.status = "nonconvergence";
    out.code = ExitCode::ComputeError;
    out.notes.push_back(e.what());
  }
  out.values["method"] = res.method;
  out.values["converged"] = res.converged;
  out.values["iterations"] = res.iterations;
  out.values["residual_norm"] = res.residual_norm;
  out.values["grad_tol"] = cfg.solver.grad_tol;
  out.values["energy"] = res.energy_trace.empty() ? 0.0 : res.energy_trace.back();
  out.values["free_nodes"] = d.node_count() - mask_count(mask);
  if (obstacle) {
    out.values["complementarity"] = res.complementarity;
    out.values["active_nodes"] = res.active_nodes;
  }
  CheckReport conv;
  conv.check = "residual";
  conv.p = ctx.p;
  conv.grid = d.shape();
  conv.set(res.residual_norm, cfg.solver.grad_tol, cfg.solver.grad_tol - res.residual_norm, 0.0);
  out.checks.emplace_back("solve", conv);
  out.arrays["energy_trace"] = res.energy_trace;
  if (b.include_solution) out.arrays["solution"] = grid_array(res.solution);
  return out;
}

// ---------------------------------------------------------------- capacity

// Closed form on an interval with constant scalar coefficient and unit
// density: (2v)^{p/2} (gap_left^{1-p} + gap_right^{1-p}).
std::optional<double> interval_closed_form(const RunConfig& cfg, const Condenser& c,
                                           const GridDomain& d, double p) {
  if (d.dim() != 1 || !cfg.domain.density.empty()) return std::nullopt;
  if (cfg.condenser->outer.type != ShapeSpec::Type::DomainBoundary) return std::nullopt;
  double v = 1.0;
  if (cfg.domain.field.rfind("scalar:", 0) == 0)
    v = std::stod(cfg.domain.field.substr(7));
  else if (cfg.domain.field != "identity")
    return std::nullopt;
  std::size_t first = d.node_count(), last = 0;
  for (std::size_t j = 0; j < d.node_count(); ++j)
    if (c.inner[j]) {
      first = std::min(first, j);
      last = std::max(last, j);
    }
  for (std::size_t j = first; j <= last; ++j)
    if (!c.inner[j]) return std::nullopt;  // not an interval of nodes
  const double a = d.node_coords(first)[0] - d.lower(0);
  const double b = d.upper(0) - d.node_coords(last)[0];
  return std::pow(2.0 * v, 0.5 * p) * (std::pow(a, 1.0 - p) + std::pow(b, 1.0 - p));
}

Outcome cmd_capacity(const RunConfig& cfg, const PFormContext& ctx) {
  const auto& b = *cfg.condenser;
  const auto& d = ctx.domain();
  const Condenser cond{build_mask(b.inner, d), build_mask(b.outer, d)};
  try {
    cond.validate(d);
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, std::string("condenser: ") + e.what());
  }
  CapacityOptions opts;
  opts.solve = cfg.solver;
  opts.vi_samples = b.vi_samples;
  opts.seed = cfg.seed;

  const auto res = capacity(cond, ctx, opts);
  Outcome out;
  out.values["capacity"] = res.value;
  out.values["energy_value"] = res.energy_value;
  out.values["vi_residual"] = res.vi_residual;
  out.values["potential_min"] = res.potential_min;
  out.values["potential_max"] = res.potential_max;
  out.values["iterations"] = res.iterations;
  out.values["residual_norm"] = res.residual_norm;
  out.values["inner_nodes"] = res.inner_nodes;

  auto base = [&](const char* name) {
    CheckReport r;
    r.check = name;
    r.p = ctx.p;
    r.grid = d.shape();
    return r;
  };
  CheckReport range = base("potential_range");
  const double excess = std::max({0.0, -res.potential_min, res.potential_max - 1.0});
  range.set(excess, 0.0, -excess, 1e-8);
  out.checks.emplace_back("capacity", range);
  CheckReport vi = base("vi_residual");
  vi.set(res.vi_residual, 0.0, -res.vi_residual, 1e-6);
  out.checks.emplace_back("capacity", vi);
  if (const auto exact = interval_closed_form(cfg, cond, d, ctx.p); exact && !ctx.regularized()) {
    CheckReport cf = base("closed_form");
    const double err = std::abs(res.value - *exact);
    cf.set(res.value, *exact, -err, 1e-8 * std::max(1.0, *exact));
    out.checks.emplace_back("capacity", cf);
    out.values["closed_form"] = *exact;
  }
  out.arrays["potential"] = grid_array(res.potential);
  return out;
}

// ---------------------------------------------------------------- caccioppoli

Outcome cmd_caccioppoli(const RunConfig& cfg, const PFormContext& ctx) {
  const auto& b = *cfg.caccioppoli;
  const auto& d = ctx.domain();
  GridFunction u = build_function(b.function, d);
  Outcome out;
  if (b.solve) {
    Mask mask = d.boundary_mask();
    if (b.pinned) mask = mask_union(mask, build_mask(*b.pinned, d));
    const auto res = solve_dirichlet(ctx, u.with_mask(mask), cfg.solver);
    u = res.solution;
    out.values["solve_iterations"] = res.iterations;
    out.values["solve_residual"] = res.residual_norm;
  }
  CheckReport r;
  if (b.variant == "ball") {
    const std::size_t x0 = d.nearest_node(b.ball.center);
    r = check_caccioppoli_ball(u, x0, b.ball.r, b.ball.R, b.c, ctx, b.options);
  } else {
    const double alpha = b.alpha.value_or(ctx.structure->field().alpha());
    const double beta = b.beta.value_or(ctx.structure->field().beta());
    const auto phi = euclidean_bump(d, b.ball.center, b.ball.r, b.ball.R);
    r = check_caccioppoli_euclidean(u, phi, b.c, alpha, beta, ctx, b.options);
  }
  out.values["lhs"] = r.lhs;
  out.values["rhs"] = r.rhs;
  out.values["constant"] = r.value("constant");
  out.checks.emplace_back("caccioppoli", r);
  return out;
}

// ---------------------------------------------------------------- qr

Outcome cmd_qr(const RunConfig& cfg, const GridDomain& d) {
  const auto& b = *cfg.qr;
  b.mapping.validate(d);
  const auto a = analyze_mapping(b.mapping, d);
  Outcome out;
  const auto [inner, outer] = b.mapping.radii(d);
  std::size_t analyzed = 0;
  double theta_dev = 0.0;
  for (std::size_t c = 0; c < d.cell_count(); ++c) {
    if (!a.analyzed(c)) continue;
    ++analyzed;
    const auto t = a.theta_at(c);
    for (std::size_t i = 0; i < a.n; ++i)
      for (std::size_t j = 0; j < a.n; ++j)
        theta_dev = std::max(theta_dev, std::abs(t[i * a.n + j] - (i == j ? 1.0 : 0.0)));
  }
  out.values["mapping"] = mapping_kind_name(b.mapping.kind);
  out.values["n"] = a.n;
  out.values["k_outer"] = a.k_outer;
  out.values["k_inner"] = a.k_inner;
  out.values["alpha"] = a.alpha;
  out.values["beta"] = a.beta;
  out.values["theta_max_deviation_from_identity"] = theta_dev;
  out.values["analyzed_cells"] = analyzed;
  out.values["degenerate_measure"] = a.degenerate_measure;
  out.values["inner_radius"] = inner;
  out.values["outer_radius"] = outer;
  add_suite(out, check_qr_invariants(a, d));
  if (b.harmonicity) add_suite(out, verify_component_harmonicity(b.mapping, d, b.options));
  return out;
}

// ---------------------------------------------------------------- metric

bool constant_field(const CoefficientField& f) {
  const auto m0 = f.matrix(0);
  for (std::size_t c = 1; c < f.cell_count(); ++c) {
    const auto m = f.matrix(c);
    for (std::size_t k = 0; k < m.size(); ++k)
      if (m[k] != m0[k]) return false;
  }
  return true;
}

Outcome cmd_metric(const RunConfig& cfg, const GridStructure& s) {
  const auto& b = *cfg.metric;
  const auto& d = s.domain();
  const std::size_t x0 = d.nearest_node(b.source);
  const auto rho = intrinsic_distance(x0, s, b.stencil);
  Outcome out;
  double dmax = 0.0;
  for (double v : rho.distance) dmax = std::max(dmax, v);
  out.values["stencil"] = stencil_name(b.stencil);
  out.values["source_node"] = x0;
  out.values["metrication"] = rho.metrication;
  out.values["cell_metrication"] = rho.cell_metrication;
  out.values["max_distance"] = dmax;

  auto base = [&](const char* name) {
    CheckReport r;
    r.check = name;
    r.p = 2.0;
    r.grid = d.shape();
    return r;
  };
  if (constant_field(s.field())) {
    // Exact continuum distance sqrt(e^T (2G)^{-1} e) for a constant G.
    const std::size_t n = d.dim();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
    const auto m = s.field().matrix(0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) g(Eigen::Index(i), Eigen::Index(j)) = 2.0 * m[i * n + j];
    const Eigen::MatrixXd ginv = g.inverse();
    const Point p0 = d.node_coords(x0);
    double worst = -std::numeric_limits<double>::infinity();
    double least = std::numeric_limits<double>::infinity();
    std::size_t worst_node = x0;
    for (std::size_t j = 0; j < d.node_count(); ++j) {
      if (j == x0) continue;
      const Point x = d.node_coords(j);
      Eigen::VectorXd e = Eigen::VectorXd::Zero(Eigen::Index(n));
      for (std::size_t i = 0; i < n; ++i) e(Eigen::Index(i)) = x[i] - p0[i];
      const double exact = std::sqrt(e.dot(ginv * e));
      const double rel = rho[j] / exact - 1.0;
      if (rel > worst) {
        worst = rel;
        worst_node = j;
      }
      least = std::min(least, rel);
    }
    if (d.node_count() > 1) {
      CheckReport r = base("distance_vs_exact");
      r.set(worst, rho.metrication, rho.metrication - worst, 1e-12);
      r.add("max_relative_error", worst);
      r.add("min_relative_error", least);
      if (!r.passed) r.witness = "node " + std::to_string(worst_node);
      out.checks.emplace_back("metric", r);
      CheckReport lower = base("distance_not_below_exact");
      lower.set(least, 0.0, least, 1e-12);
      out.checks.emplace_back("metric", lower);
    }
  }
  if (b.cutoff_r) {
    const auto phi = cutoff_rho(rho, *b.cutoff_r, d);
    const double g = max_cell_gamma(phi, s);
    const double bound = std::pow(1.0 + rho.cell_metrication, 2);
    CheckReport r = base("cutoff_gamma");
    r.set(g, bound, bound - g, 1e-12 * bound);
    r.add("path_bound", std::pow(1.0 + rho.metrication, 2));
    out.checks.emplace_back("metric", r);
  }
  if (b.truncation) {
    const auto [r0, r1] = *b.truncation;
    const auto phi = truncation_function(rho, r0, r1, d);
    const double g = max_cell_gamma(phi, s);
    const double bound = std::pow((1.0 + rho.cell_metrication) / (r1 - r0), 2);
    CheckReport r = base("truncation_gamma");
    r.set(g, bound, bound - g, 1e-12 * bound);
    double lo = 1.0, hi = 0.0;
    for (std::size_t j = 0; j < phi.size(); ++j) {
      lo = std::min(lo, phi[j]);
      hi = std::max(hi, phi[j]);
    }
    r.add("phi_min", lo);
    r.add("phi_max", hi);
    out.checks.emplace_back("metric", r);
  }
  if (b.include_distance) out.arrays["distance"] = rho.distance;
  return out;
}

// ---------------------------------------------------------------- check

GridFunction random_function(const GridDomain& d, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(d.node_count());
  for (auto& x : v) x = dist(rng);
  return GridFunction(d, std::move(v));
}

Outcome cmd_check(const RunConfig& cfg, const PFormContext& ctx) {
  const auto& b = *cfg.check;
  const auto& d = ctx.domain();
  std::mt19937_64 rng(cfg.seed);
  CapacityOptions copts;
  copts.solve = cfg.solver;
  copts.seed = cfg.seed;
  const Mask outer = build_mask(b.outer, d);
  auto masks = [&](const std::vector<ShapeSpec>& v) {
    std::vector<Mask> out;
    for (const auto& s : v) out.push_back(build_mask(s, d));
    return out;
  };

  Outcome out;
  ordered ran = ordered::array();
  for (const auto& name : b.suites) {
    SuiteReport s;
    s.suite = name;
    if (name == "sector" || name == "monotone") {
      if (name == "monotone" && ctx.p < 2.0) {
        out.notes.push_back("monotone suite skipped: needs p >= 2");
        continue;
      }
      for (int t = 0; t < b.trials; ++t) {
        const auto u = random_function(d, rng, -1.0, 1.0);
        const auto v = random_function(d, rng, -1.0, 1.0);
        s.checks.push_back(name == "sector" ? check_sector(u, v, ctx) : check_monotone(u, v, ctx));
      }
    } else if (name == "contraction") {
      const auto tanh_map = Contraction::smooth(
          "tanh", [](double x) { return std::tanh(x); },
          [](double x) { return 1.0 / std::pow(std::cosh(x), 2); });
      const Contraction maps[] = {Contraction::unit(), Contraction::truncation(0.5),
                                  Contraction::negative_part(), tanh_map};
      for (int t = 0; t < b.trials; ++t) {
        const auto u = random_function(d, rng, -1.5, 2.5);
        const auto v = random_function(d, rng, -1.0, 1.0);
        for (const auto& m : maps) s.checks.push_back(check_contraction_operates(u, v, ctx, m));
      }
    } else if (name == "D1D2") {
      const auto sets = masks(b.d1d2);
      const auto u = capacity(Condenser{sets[0], outer}, ctx, copts).potential;
      const auto v = capacity(Condenser{sets[1], outer}, ctx, copts).potential;
      s = check_D1_D2(u, v, b.alpha, ctx);
      s.suite = name;
    } else if (name == "choquet") {
      s = check_choquet(masks(b.sets), outer, ctx, copts);
      s.suite = name;
    } else {
      s.checks.push_back(check_lemma_312(masks(b.e_sets), masks(b.f_sets), outer, ctx, copts));
    }
    ran.push_back(name);
    out.values["suite_" + name + "_passed"] = s.passed();
    out.values["suite_" + name + "_checks"] = s.checks.size();
    add_suite(out, s);
  }
  out.values["suites"] = ran;
  out.values["trials"] = b.trials;
  return out;
}

// ---------------------------------------------------------------- report

ordered check_json(const std::string& suite, const CheckReport& r) {
  ordered j = ordered::object();
  j["suite"] = suite;
  j["check"] = r.check;
  j["p"] = r.p;
  j["grid"] = r.grid;
  j["passed"] = r.passed;
  j["lhs"] = r.lhs;
  j["rhs"] = r.rhs;
  j["slack"] = r.slack;
  j["tolerance"] = r.tolerance;
  if (r.witness) j["witness"] = *r.witness;
  ordered v = ordered::object();
  for (const auto& [k, x] : r.values) v[k] = x;
  j["values"] = v;
  if (!r.notes.empty()) j["notes"] = r.notes;
  return j;
}

bool all_finite(const ordered& j, std::string& where, const std::string& path) {
  if (j.is_number_float()) {
    if (!std::isfinite(j.get<double>())) {
      where = path;
      return false;
    }
    return true;
  }
  if (j.is_object()) {
    for (const auto& [k, v] : j.items())
      if (!all_finite(v, where, path + "." + k)) return false;
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i)
      if (!all_finite(j[i], where, path + "[" + std::to_string(i) + "]")) return false;
  }
  return true;
}

std::string csv_cell(const ordered& v) {
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  return v.dump();
}

void csv_array(std::ostringstream& os, const std::string& name, const ordered& a) {
  const ordered& values = a.is_object() ? a["values"] : a;
  for (std::size_t i = 0; i < values.size(); ++i)
    os << "array,,," << name << "," << i << "," << csv_cell(values[i]) << "\n";
}

std::string to_csv(const ordered& report) {
  std::ostringstream os;
  os << "kind,suite,check,key,index,value\n";
  os << "summary,,,command,," << csv_cell(report["command"]) << "\n";
  os << "summary,,,status,," << csv_cell(report["status"]) << "\n";
  for (const char* k : {"pass", "slack", "tolerance"})
    if (report.contains(k)) os << "summary,,," << k << ",," << csv_cell(report[k]) << "\n";
  if (report.contains("values"))
    for (const auto& [k, v] : report["values"].items())
      os << "value,,," << k << ",," << csv_cell(v.is_array() ? ordered(v.dump()) : v) << "\n";
  if (report.contains("checks")) {
    std::size_t idx = 0;
    for (const auto& c : report["checks"]) {
      const std::string pre = "check," + csv_cell(c["suite"]) + "," + csv_cell(c["check"]) + ",";
      for (const char* k : {"passed", "lhs", "rhs", "slack", "tolerance"})
        os << pre << k << "," << idx << "," << csv_cell(c[k]) << "\n";
      for (const auto& [k, v] : c["values"].items())
        os << pre << k << "," << idx << "," << csv_cell(v) << "\n";
      ++idx;
    }
  }
  if (report.contains("arrays"))
    for (const auto& [k, v] : report["arrays"].items()) csv_array(os, k, v);
  if (report.contains("error")) os << "summary,,,error,," << csv_cell(report["error"]) << "\n";
  return os.str();
}

std::string serialize(const ordered& report, bool csv) {
  return csv ? to_csv(report) : report.dump(2) + "\n";
}

RunOutcome failure(const std::string& command, const std::string& status, ExitCode code,
                   const std::string& msg, const ordered& inputs, bool csv) {
  ordered rep = ordered::object();
  rep["command"] = command;
  rep["status"] = status;
  rep["inputs"] = inputs;
  rep["pass"] = false;
  rep["error"] = msg;
  RunOutcome o;
  o.exit_code = code;
  o.message = msg;
  o.report = serialize(rep, csv);
  return o;
}

bool is_config_code(ErrorCode c) {
  return c == ErrorCode::Config || c == ErrorCode::InvalidArgument ||
         c == ErrorCode::ShapeMismatch;
}

}  // namespace

RunOutcome run_config(const std::string& config_text, const RunOptions& opts) {
  RunConfig cfg;
  ordered inputs = ordered::object();
  try {
    cfg = parse_run_config(config_text, opts.base_dir);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.tol) {
      require(*opts.tol > 0.0 && std::isfinite(*opts.tol), ErrorCode::Config,
              "--tol must be a positive number");
      cfg.solver.grad_tol = *opts.tol;
    }
    inputs = ordered::parse(cfg.canonical);
    inputs["seed"] = cfg.seed;
    if (opts.tol) inputs["solver"]["grad_tol"] = *opts.tol;
  } catch (const Error& e) {
    log::info(std::string("config error: ") + e.what());
    std::string command;
    try {
      const auto j = json::parse(config_text);
      if (j.is_object() && j.contains("command") && j["command"].is_string())
        command = j["command"].get<std::string>();
    } catch (const std::exception&) {
    }
    return failure(command, "config_error", ExitCode::ConfigError, e.what(), nullptr, opts.csv);
  }

  // Materialize everything the config describes; failures here are config errors.
  StructurePtr structure;
  std::optional<PFormContext> ctx;
  try {
    structure = build_structure(cfg.domain);
    if (cfg.p && cfg.command != "qr" && cfg.command != "metric")
      ctx = make_context(cfg, structure, *cfg.p);
  } catch (const Error& e) {
    log::info(std::string("config error: ") + e.what());
    return failure(cfg.command, "config_error", ExitCode::ConfigError, e.what(), inputs, opts.csv);
  }

  log::info("running " + cfg.command + " on grid of " +
            std::to_string(structure->domain().node_count()) + " nodes");
  Outcome out;
  try {
    if (cfg.command == "solve")
      out = cmd_solve(cfg, *ctx);
    else if (cfg.command == "capacity")
      out = cmd_capacity(cfg, *ctx);
    else if (cfg.command == "caccioppoli")
      out = cmd_caccioppoli(cfg, *ctx);
    else if (cfg.command == "qr")
      out = cmd_qr(cfg, structure->domain());
    else if (cfg.command == "metric")
      out = cmd_metric(cfg, *structure);
    else
      out = cmd_check(cfg, *ctx);
  } catch (const Error& e) {
    const bool config = is_config_code(e.code());
    log::info(std::string(config ? "invalid input: " : "computation failed: ") + e.what());
    return failure(cfg.command, config ? "config_error" : "computation_error",
                   config ? ExitCode::ConfigError : ExitCode::ComputeError, e.what(), inputs,
                   opts.csv);
  } catch (const std::exception& e) {
    log::info(std::string("computation failed: ") + e.what());
    return failure(cfg.command, "computation_error", ExitCode::ComputeError, e.what(), inputs,
                   opts.csv);
  }

  // Summary margin: the check closest to failing.
  bool pass = true;
  double slack = 0.0, tol = 0.0, margin = std::numeric_limits<double>::infinity();
  ordered checks = ordered::array();
  for (const auto& [suite, r] : out.checks) {
    pass = pass && r.passed;
    if (r.slack + r.tolerance < margin) {
      margin = r.slack + r.tolerance;
      slack = r.slack;
      tol = r.tolerance;
    }
    checks.push_back(check_json(suite, r));
  }
  if (out.code == ExitCode::Ok && !pass) {
    out.code = ExitCode::SuiteFailure;
    out.status = "check_failed";
  }

  ordered rep = ordered::object();
  rep["command"] = cfg.command;
  rep["status"] = out.status;
  rep["inputs"] = inputs;
  rep["values"] = out.values;
  rep["checks"] = checks;
  rep["slack"] = slack;
  rep["tolerance"] = tol;
  rep["pass"] = pass && out.code == ExitCode::Ok;
  if (!out.arrays.empty()) rep["arrays"] = out.arrays;
  if (!out.notes.empty()) rep["notes"] = out.notes;

  std::string where;
  if (!all_finite(rep, where, "report")) {
    const std::string msg = "non-finite number at " + where;
    log::info(msg);
    rep["status"] = "non_finite";
    rep["pass"] = false;
    rep["error"] = msg;
    RunOutcome o;
    o.exit_code = ExitCode::ComputeError;
    o.message = msg;
    o.output = cfg.output;
    o.report = serialize(rep, opts.csv);
    return o;
  }

  RunOutcome o;
  o.exit_code = out.code;
  o.output = cfg.output;
  if (out.code == ExitCode::ComputeError)
    o.message = out.notes.empty() ? "computation failed" : out.notes.front();
  else if (out.code == ExitCode::SuiteFailure)
    o.message = "one or more checks failed";
  o.report = serialize(rep, opts.csv);
  return o;
}

}  // namespace npf
