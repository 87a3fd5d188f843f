// SPDX-License-Identifier: Apache-2.0
#include "npform/config.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "npform/capacity.hpp"
#include "npform/error.hpp"

namespace npf {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::Config, msg); }

// Tracks which keys of an object were consumed so the rest can be rejected.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail(label() + " must be a JSON object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  const json& need(const std::string& key) {
    const json* v = get(key);
    if (!v) fail("missing required key '" + sub(key) + "'");
    return *v;
  }
  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) fail("unknown key '" + sub(item.key()) + "'");
  }
  std::string sub(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  std::string label() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

double number(const json& v, const std::string& key) {
  if (!v.is_number()) fail("key '" + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail("key '" + key + "' must be finite");
  return x;
}

double positive(const json& v, const std::string& key) {
  const double x = number(v, key);
  if (!(x > 0.0)) fail("key '" + key + "' must be positive");
  return x;
}

std::int64_t integer(const json& v, const std::string& key) {
  if (!v.is_number_integer()) fail("key '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::size_t count(const json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    fail("key '" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

bool boolean(const json& v, const std::string& key) {
  if (!v.is_boolean()) fail("key '" + key + "' must be true or false");
  return v.get<bool>();
}

std::string string(const json& v, const std::string& key) {
  if (!v.is_string()) fail("key '" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> numbers(const json& v, const std::string& key) {
  if (!v.is_array()) fail("key '" + key + "' must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(number(v[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

Point point(const json& v, const std::string& key, std::size_t dim) {
  const auto xs = numbers(v, key);
  if (xs.size() != dim)
    fail("key '" + key + "' must have " + std::to_string(dim) + " coordinates");
  Point p{};
  for (std::size_t i = 0; i < dim; ++i) p[i] = xs[i];
  return p;
}

std::string resolve(const std::string& path, const std::string& base) {
  const std::filesystem::path p(path);
  if (p.is_absolute() || base.empty()) return path;
  return (std::filesystem::path(base) / p).string();
}

json load_json_file(const std::string& path, const std::string& key) {
  std::ifstream in(path);
  if (!in) fail("key '" + key + "': cannot open file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail("key '" + key + "': file '" + path + "' is not valid JSON: " + e.what());
  }
}

// Nested arrays of numbers flattened in row-major order.
void flatten(const json& v, std::vector<double>& out, const std::string& key) {
  if (v.is_array()) {
    for (const auto& x : v) flatten(x, out, key);
    return;
  }
  out.push_back(number(v, key));
}

std::size_t cells_of(const std::vector<std::size_t>& shape) {
  std::size_t c = 1;
  for (auto s : shape) c *= s - 1;
  return c;
}

std::size_t nodes_of(const std::vector<std::size_t>& shape) {
  std::size_t c = 1;
  for (auto s : shape) c *= s;
  return c;
}

DomainSpec parse_domain(const json& j, const std::string& base) {
  Reader r(j, "domain");
  const auto dim = count(r.need("dim"), "domain.dim");
  if (dim < 1 || dim > 3) fail("key 'domain.dim' must be 1, 2 or 3");
  DomainSpec d;
  const json& ext = r.need("extent");
  if (!ext.is_array() || ext.size() != dim)
    fail("key 'domain.extent' must list " + std::to_string(dim) + " intervals");
  for (std::size_t i = 0; i < dim; ++i) {
    const auto key = "domain.extent[" + std::to_string(i) + "]";
    const auto ab = numbers(ext[i], key);
    if (ab.size() != 2 || !(ab[0] < ab[1])) fail("key '" + key + "' must be [a, b] with a < b");
    d.extent.emplace_back(ab[0], ab[1]);
  }
  const json& shape = r.need("shape");
  if (!shape.is_array() || shape.size() != dim)
    fail("key 'domain.shape' must list " + std::to_string(dim) + " node counts");
  for (std::size_t i = 0; i < dim; ++i) {
    const auto n = count(shape[i], "domain.shape[" + std::to_string(i) + "]");
    if (n < 2) fail("key 'domain.shape' needs at least 2 nodes per axis");
    d.shape.push_back(n);
  }
  if (const json* f = r.get("field")) d.field = string(*f, "domain.field");
  if (d.field.rfind("scalar:", 0) == 0) {
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(d.field.substr(7), &used);
      if (used != d.field.size() - 7) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail("key 'domain.field': cannot read the scalar in '" + d.field + "'");
    }
    if (!(v > 0.0) || !std::isfinite(v)) fail("key 'domain.field': scalar must be positive");
  } else if (d.field.rfind("file:", 0) == 0) {
    const auto path = resolve(d.field.substr(5), base);
    json data = load_json_file(path, "domain.field");
    if (data.is_object()) {
      Reader fr(data, "domain.field");
      const json m = fr.need("matrices");
      fr.finish();
      data = m;
    }
    flatten(data, d.field_matrices, "domain.field");
    const std::size_t want = cells_of(d.shape) * dim * dim;
    if (d.field_matrices.size() != want)
      fail("key 'domain.field': file supplies " + std::to_string(d.field_matrices.size()) +
           " entries, expected " + std::to_string(want));
  } else if (d.field != "identity") {
    fail("key 'domain.field' must be identity, scalar:<v> or file:<path>");
  }
  if (const json* m = r.get("density")) {
    d.density = numbers(*m, "domain.density");
    if (d.density.size() != cells_of(d.shape))
      fail("key 'domain.density' must have one weight per cell (" +
           std::to_string(cells_of(d.shape)) + ")");
    for (double x : d.density)
      if (!(x > 0.0)) fail("key 'domain.density' weights must be positive");
  }
  r.finish();
  return d;
}

ShapeSpec parse_shape(const json& j, const std::string& key, const DomainSpec& dom) {
  const std::size_t dim = dom.shape.size();
  ShapeSpec s;
  if (j.is_string()) {
    if (j.get<std::string>() != "domain_boundary")
      fail("key '" + key + "' must be \"domain_boundary\" or a shape object");
    return s;
  }
  Reader r(j, key);
  const auto type = string(r.need("type"), key + ".type");
  if (type == "domain_boundary") {
    s.type = ShapeSpec::Type::DomainBoundary;
  } else if (type == "interval") {
    if (dim != 1) fail("key '" + key + "': interval shapes need a 1-D domain");
    s.type = ShapeSpec::Type::Interval;
    s.lo = number(r.need("lo"), key + ".lo");
    s.hi = number(r.need("hi"), key + ".hi");
    if (!(s.lo <= s.hi)) fail("key '" + key + "' needs lo <= hi");
  } else if (type == "rect") {
    s.type = ShapeSpec::Type::Rect;
    s.lo_pt = point(r.need("lo"), key + ".lo", dim);
    s.hi_pt = point(r.need("hi"), key + ".hi", dim);
  } else if (type == "disk" || type == "outside_disk") {
    s.type = type == "disk" ? ShapeSpec::Type::Disk : ShapeSpec::Type::OutsideDisk;
    s.center = point(r.need("center"), key + ".center", dim);
    s.r = positive(r.need("r"), key + ".r");
  } else if (type == "nodes") {
    s.type = ShapeSpec::Type::Nodes;
    const json& ids = r.need("ids");
    if (!ids.is_array()) fail("key '" + key + ".ids' must be an array");
    const std::size_t n = nodes_of(dom.shape);
    for (const auto& v : ids) {
      const auto i = count(v, key + ".ids");
      if (i >= n) fail("key '" + key + ".ids': node " + std::to_string(i) + " out of range");
      s.ids.push_back(i);
    }
  } else {
    fail("key '" + key + ".type' must be interval, disk, rect, nodes, outside_disk or "
         "domain_boundary");
  }
  r.finish();
  return s;
}

std::vector<ShapeSpec> parse_shapes(const json& j, const std::string& key,
                                    const DomainSpec& dom) {
  if (!j.is_array()) fail("key '" + key + "' must be an array of shapes");
  std::vector<ShapeSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(parse_shape(j[i], key + "[" + std::to_string(i) + "]", dom));
  return out;
}

FunctionSpec parse_function(const json& j, const std::string& key, const DomainSpec& dom,
                            const std::string& base) {
  const std::size_t dim = dom.shape.size();
  Reader r(j, key);
  FunctionSpec f;
  const auto type = string(r.need("type"), key + ".type");
  if (type == "constant") {
    f.type = FunctionSpec::Type::Constant;
    f.value = number(r.need("value"), key + ".value");
  } else if (type == "affine") {
    f.type = FunctionSpec::Type::Affine;
    if (const json* v = r.get("value")) f.value = number(*v, key + ".value");
    f.grad = numbers(r.need("grad"), key + ".grad");
    if (f.grad.size() != dim)
      fail("key '" + key + ".grad' must have " + std::to_string(dim) + " entries");
  } else if (type == "re_power") {
    if (dim != 2) fail("key '" + key + "': re_power needs a 2-D domain");
    f.type = FunctionSpec::Type::RePower;
    const auto k = integer(r.need("k"), key + ".k");
    if (k == 0 || std::abs(k) > 64) fail("key '" + key + ".k' must be a nonzero integer");
    f.k = int(k);
    if (const json* c = r.get("center")) f.center = point(*c, key + ".center", dim);
  } else if (type == "log_modulus") {
    f.type = FunctionSpec::Type::LogModulus;
    if (const json* c = r.get("center")) f.center = point(*c, key + ".center", dim);
  } else if (type == "values" || type == "file") {
    f.type = FunctionSpec::Type::Values;
    json data;
    if (type == "file") {
      data = load_json_file(resolve(string(r.need("path"), key + ".path"), base), key + ".path");
    } else {
      data = json::object();
      data["shape"] = r.need("shape");
      data["values"] = r.need("values");
    }
    Reader g(data, key);
    const json& shape = g.need("shape");
    if (!shape.is_array()) fail("key '" + key + ".shape' must be an array");
    for (const auto& s : shape) f.shape.push_back(count(s, key + ".shape"));
    f.values = numbers(g.need("values"), key + ".values");
    g.finish();
    if (f.shape != dom.shape) fail("key '" + key + ".shape' does not match domain.shape");
    if (f.values.size() != nodes_of(f.shape))
      fail("key '" + key + ".values' must have one value per node");
  } else {
    fail("key '" + key + ".type' must be constant, affine, re_power, log_modulus, values "
         "or file");
  }
  r.finish();
  return f;
}

SolveOptions parse_solver(const json& j) {
  Reader r(j, "solver");
  SolveOptions o;
  if (const json* v = r.get("method")) {
    try {
      o.method = parse_method(string(*v, "solver.method"));
    } catch (const Error& e) {
      fail(std::string("key 'solver.method': ") + e.what());
    }
  }
  if (const json* v = r.get("grad_tol")) o.grad_tol = positive(*v, "solver.grad_tol");
  if (const json* v = r.get("max_iter")) {
    const auto n = integer(*v, "solver.max_iter");
    if (n < 1 || n > 1000000) fail("key 'solver.max_iter' must be in [1, 1e6]");
    o.max_iter = int(n);
  }
  if (const json* v = r.get("armijo_c1")) o.armijo_c1 = positive(*v, "solver.armijo_c1");
  if (const json* v = r.get("backtrack")) o.backtrack = positive(*v, "solver.backtrack");
  if (const json* v = r.get("lbfgs_memory")) {
    const auto n = integer(*v, "solver.lbfgs_memory");
    if (n < 1 || n > 1000) fail("key 'solver.lbfgs_memory' must be in [1, 1000]");
    o.lbfgs_memory = int(n);
  }
  r.finish();
  try {
    o.validate();
  } catch (const Error& e) {
    fail(std::string("key 'solver': ") + e.what());
  }
  return o;
}

BallSpec parse_ball(const json& j, const std::string& key, std::size_t dim) {
  Reader r(j, key);
  BallSpec b;
  b.center = point(r.need("center"), key + ".center", dim);
  b.r = positive(r.need("r"), key + ".r");
  b.R = positive(r.need("R"), key + ".R");
  if (!(b.R > b.r)) fail("key '" + key + "' needs R > r");
  r.finish();
  return b;
}

Stencil stencil_of(const json& v, const std::string& key) {
  try {
    return parse_stencil(string(v, key));
  } catch (const Error& e) {
    fail("key '" + key + "': " + e.what());
  }
}

MappingSpec parse_mapping(const json& j, const DomainSpec& dom, const std::string& base) {
  Reader r(j, "mapping");
  const std::size_t n = dom.shape.size();
  MappingSpec m;
  const auto kind = string(r.need("kind"), "mapping.kind");
  try {
    m.kind = parse_mapping_kind(kind);
  } catch (const Error& e) {
    fail(std::string("key 'mapping.kind': ") + e.what());
  }
  switch (m.kind) {
    case MappingSpec::Kind::Power: {
      const auto k = integer(r.need("k"), "mapping.k");
      if (k == 0 || std::abs(k) > 64) fail("key 'mapping.k' must be a nonzero integer");
      m.power = int(k);
      break;
    }
    case MappingSpec::Kind::Radial:
      m.stretch = positive(r.need("a"), "mapping.a");
      break;
    case MappingSpec::Kind::Linear: {
      flatten(r.need("A"), m.matrix, "mapping.A");
      if (m.matrix.size() != n * n)
        fail("key 'mapping.A' must be a " + std::to_string(n) + "x" + std::to_string(n) +
             " matrix");
      break;
    }
    case MappingSpec::Kind::Sampled: {
      const auto path = resolve(string(r.need("file"), "mapping.file"), base);
      json data = load_json_file(path, "mapping.file");
      if (data.is_object()) {
        Reader fr(data, "mapping.file");
        const json v = fr.need("values");
        fr.finish();
        data = v;
      }
      flatten(data, m.samples, "mapping.file");
      if (m.samples.size() != nodes_of(dom.shape) * n)
        fail("key 'mapping.file' must hold one " + std::to_string(n) + "-vector per node");
      break;
    }
  }
  if (const json* v = r.get("inner_radius")) {
    m.inner_radius = number(*v, "mapping.inner_radius");
    if (m.inner_radius < 0) fail("key 'mapping.inner_radius' must be >= 0");
  }
  if (const json* v = r.get("outer_radius"))
    m.outer_radius = positive(*v, "mapping.outer_radius");
  if (!(m.outer_radius > m.inner_radius))
    fail("key 'mapping.outer_radius' must exceed mapping.inner_radius");
  r.finish();
  return m;
}

// Default node sets for the check suites, placed about the domain center.
struct DefaultSets {
  std::vector<ShapeSpec> choquet, e, f, d1d2;
};

DefaultSets default_sets(const DomainSpec& dom) {
  const std::size_t dim = dom.shape.size();
  Point c{};
  double half = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < dim; ++i) {
    c[i] = 0.5 * (dom.extent[i].first + dom.extent[i].second);
    half = std::min(half, 0.5 * (dom.extent[i].second - dom.extent[i].first));
  }
  auto disk = [&](double shift, double r) {
    ShapeSpec s;
    s.type = ShapeSpec::Type::Disk;
    s.center = c;
    s.center[0] += shift * half;
    s.r = r * half;
    return s;
  };
  DefaultSets d;
  d.choquet = {disk(-0.3, 0.25), disk(0.1, 0.25), disk(0.0, 0.15)};
  d.e = {disk(-0.45, 0.3), disk(0.45, 0.3)};
  d.f = {disk(-0.45, 0.12), disk(0.45, 0.12)};
  d.d1d2 = {disk(0.0, 0.2), disk(0.0, 0.45)};
  return d;
}

}  // namespace

const std::vector<std::string>& check_suite_names() {
  static const std::vector<std::string> names = {"sector", "monotone", "contraction",
                                                 "D1D2",   "choquet",  "lemma312"};
  return names;
}

RunConfig parse_run_config(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(std::string("config is not valid JSON: ") + e.what());
  }
  Reader r(j, "");
  RunConfig cfg;
  cfg.command = string(r.need("command"), "command");
  static const std::set<std::string> commands = {"solve", "capacity", "caccioppoli",
                                                 "qr",    "metric",   "check"};
  if (!commands.count(cfg.command))
    fail("key 'command' must be one of solve, capacity, caccioppoli, qr, metric, check");
  cfg.domain = parse_domain(r.need("domain"), base_dir);
  const std::size_t dim = cfg.domain.shape.size();

  const bool needs_p = cfg.command == "solve" || cfg.command == "capacity" ||
                       cfg.command == "caccioppoli" || cfg.command == "check";
  if (needs_p) {
    cfg.p = number(r.need("p"), "p");
  } else if (const json* v = r.get("p")) {
    cfg.p = number(*v, "p");
  }
  if (cfg.p && !(*cfg.p > 1.0)) fail("key 'p' must be > 1");
  if (cfg.command == "qr" && cfg.p && *cfg.p != double(dim))
    fail("key 'p' must equal the dimension for the qr command");
  if (const json* v = r.get("eps")) {
    cfg.eps = number(*v, "eps");
    if (*cfg.eps < 0) fail("key 'eps' must be >= 0");
  }
  if (const json* v = r.get("solver")) cfg.solver = parse_solver(*v);
  if (const json* v = r.get("seed")) cfg.seed = count(*v, "seed");
  if (const json* v = r.get("output")) cfg.output = string(*v, "output");

  if (cfg.command == "solve") {
    Reader b(r.need("solve"), "solve");
    SolveBlock s;
    s.boundary = parse_function(b.need("boundary"), "solve.boundary", cfg.domain, base_dir);
    if (const json* v = b.get("pinned")) s.pinned = parse_shape(*v, "solve.pinned", cfg.domain);
    if (const json* v = b.get("obstacle"))
      s.obstacle = parse_function(*v, "solve.obstacle", cfg.domain, base_dir);
    if (const json* v = b.get("include_solution"))
      s.include_solution = boolean(*v, "solve.include_solution");
    b.finish();
    cfg.solve = std::move(s);
  } else if (cfg.command == "capacity") {
    Reader b(r.need("condenser"), "condenser");
    CondenserBlock c;
    c.inner = parse_shape(b.need("inner"), "condenser.inner", cfg.domain);
    if (const json* v = b.get("outer")) c.outer = parse_shape(*v, "condenser.outer", cfg.domain);
    if (const json* v = b.get("vi_samples")) {
      const auto n = integer(*v, "condenser.vi_samples");
      if (n < 0 || n > 100000) fail("key 'condenser.vi_samples' must be in [0, 1e5]");
      c.vi_samples = int(n);
    }
    b.finish();
    cfg.condenser = std::move(c);
  } else if (cfg.command == "caccioppoli") {
    Reader b(r.need("caccioppoli"), "caccioppoli");
    CaccioppoliBlock c;
    c.function = parse_function(b.need("function"), "caccioppoli.function", cfg.domain, base_dir);
    if (const json* v = b.get("solve")) c.solve = boolean(*v, "caccioppoli.solve");
    if (const json* v = b.get("pinned"))
      c.pinned = parse_shape(*v, "caccioppoli.pinned", cfg.domain);
    if (const json* v = b.get("variant")) {
      c.variant = string(*v, "caccioppoli.variant");
      if (c.variant != "ball" && c.variant != "euclidean")
        fail("key 'caccioppoli.variant' must be ball or euclidean");
    }
    c.ball = parse_ball(b.need("ball"), "caccioppoli.ball", dim);
    if (const json* v = b.get("c")) c.c = number(*v, "caccioppoli.c");
    if (const json* v = b.get("stencil")) c.options.stencil = stencil_of(*v, "caccioppoli.stencil");
    if (const json* v = b.get("certify_rel"))
      c.options.certify_rel = positive(*v, "caccioppoli.certify_rel");
    if (const json* v = b.get("alpha")) c.alpha = positive(*v, "caccioppoli.alpha");
    if (const json* v = b.get("beta")) c.beta = positive(*v, "caccioppoli.beta");
    if ((c.alpha || c.beta) && c.variant != "euclidean")
      fail("keys 'caccioppoli.alpha'/'caccioppoli.beta' apply to the euclidean variant only");
    b.finish();
    cfg.caccioppoli = std::move(c);
  } else if (cfg.command == "qr") {
    QrBlock q;
    q.mapping = parse_mapping(r.need("mapping"), cfg.domain, base_dir);
    if (const json* v = r.get("qr")) {
      Reader b(*v, "qr");
      if (const json* h = b.get("harmonicity")) q.harmonicity = boolean(*h, "qr.harmonicity");
      if (const json* h = b.get("refine")) {
        const auto n = integer(*h, "qr.refine");
        if (n < 2 || n > 8) fail("key 'qr.refine' must be in [2, 8]");
        q.options.refine = std::size_t(n);
      }
      if (const json* h = b.get("min_order")) q.options.min_order = positive(*h, "qr.min_order");
      if (const json* h = b.get("log")) q.options.include_log = boolean(*h, "qr.log");
      b.finish();
    }
    cfg.qr = std::move(q);
  } else if (cfg.command == "metric") {
    Reader b(r.need("metric"), "metric");
    MetricBlock m;
    m.source = point(b.need("source"), "metric.source", dim);
    if (const json* v = b.get("stencil")) m.stencil = stencil_of(*v, "metric.stencil");
    if (const json* v = b.get("cutoff_r")) m.cutoff_r = positive(*v, "metric.cutoff_r");
    if (const json* v = b.get("truncation")) {
      Reader t(*v, "metric.truncation");
      const double rr = positive(t.need("r"), "metric.truncation.r");
      const double RR = positive(t.need("R"), "metric.truncation.R");
      if (!(RR > rr)) fail("key 'metric.truncation' needs R > r");
      t.finish();
      m.truncation = std::make_pair(rr, RR);
    }
    if (const json* v = b.get("include_distance"))
      m.include_distance = boolean(*v, "metric.include_distance");
    b.finish();
    cfg.metric = std::move(m);
  } else {
    CheckBlock c;
    const auto defaults = default_sets(cfg.domain);
    c.sets = defaults.choquet;
    c.e_sets = defaults.e;
    c.f_sets = defaults.f;
    c.d1d2 = defaults.d1d2;
    c.suites = check_suite_names();
    if (const json* v = r.get("check")) {
      Reader b(*v, "check");
      if (const json* s = b.get("suites")) {
        if (!s->is_array() || s->empty()) fail("key 'check.suites' must be a nonempty array");
        c.suites.clear();
        const auto& known = check_suite_names();
        for (const auto& name : *s) {
          const auto n = string(name, "check.suites");
          if (std::find(known.begin(), known.end(), n) == known.end())
            fail("key 'check.suites': unknown suite '" + n +
                 "' (sector, monotone, contraction, D1D2, choquet, lemma312)");
          c.suites.push_back(n);
        }
      }
      if (const json* t = b.get("trials")) {
        const auto n = integer(*t, "check.trials");
        if (n < 1 || n > 100000) fail("key 'check.trials' must be in [1, 1e5]");
        c.trials = int(n);
      }
      if (const json* s = b.get("sets")) c.sets = parse_shapes(*s, "check.sets", cfg.domain);
      if (const json* s = b.get("e_sets")) c.e_sets = parse_shapes(*s, "check.e_sets", cfg.domain);
      if (const json* s = b.get("f_sets")) c.f_sets = parse_shapes(*s, "check.f_sets", cfg.domain);
      if (const json* s = b.get("d1d2")) {
        c.d1d2 = parse_shapes(*s, "check.d1d2", cfg.domain);
        if (c.d1d2.size() != 2) fail("key 'check.d1d2' must list exactly two shapes");
      }
      if (const json* a = b.get("alpha")) {
        c.alpha = number(*a, "check.alpha");
        if (c.alpha < 0) fail("key 'check.alpha' must be >= 0");
      }
      if (const json* o = b.get("outer")) c.outer = parse_shape(*o, "check.outer", cfg.domain);
      b.finish();
    }
    if (c.sets.empty()) fail("key 'check.sets' must not be empty");
    if (c.e_sets.size() != c.f_sets.size() || c.e_sets.empty())
      fail("keys 'check.e_sets' and 'check.f_sets' must be nonempty and of equal length");
    cfg.check = std::move(c);
  }
  r.finish();
  cfg.canonical = j.dump();
  return cfg;
}

StructurePtr build_structure(const DomainSpec& spec) {
  GridDomain d(spec.extent, spec.shape, spec.density);
  const std::size_t dim = d.dim(), cells = d.cell_count();
  if (spec.field == "identity") return make_identity_structure(std::move(d));
  if (spec.field.rfind("scalar:", 0) == 0) {
    auto f = CoefficientField::scalar(dim, cells, std::stod(spec.field.substr(7)));
    return make_structure(std::move(d), std::move(f));
  }
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  const auto n = Eigen::Index(dim);
  for (std::size_t c = 0; c < cells; ++c) {
    Eigen::MatrixXd g = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                       Eigen::RowMajor>>(
        spec.field_matrices.data() + c * dim * dim, n, n);
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff()))
      fail("key 'domain.field': matrix of cell " + std::to_string(c) + " is not symmetric");
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues().minCoeff());
    hi = std::max(hi, es.eigenvalues().maxCoeff());
  }
  if (!(lo > 0.0)) fail("key 'domain.field': matrices must be positive definite");
  return make_structure(std::move(d), CoefficientField(dim, spec.field_matrices, lo, hi));
}

Mask build_mask(const ShapeSpec& s, const GridDomain& d) {
  switch (s.type) {
    case ShapeSpec::Type::DomainBoundary:
      return d.boundary_mask();
    case ShapeSpec::Type::Interval:
      return interval_nodes(d, s.lo, s.hi);
    case ShapeSpec::Type::Rect:
      return rect_nodes(d, s.lo_pt, s.hi_pt);
    case ShapeSpec::Type::Disk:
      return disk_nodes(d, s.center, s.r);
    case ShapeSpec::Type::OutsideDisk:
      return outside_disk_nodes(d, s.center, s.r);
    case ShapeSpec::Type::Nodes:
      return nodes_from_list(d, s.ids);
  }
  throw Error(ErrorCode::Internal, "unhandled shape type");
}

GridFunction build_function(const FunctionSpec& f, const GridDomain& d) {
  const std::size_t dim = d.dim();
  switch (f.type) {
    case FunctionSpec::Type::Constant:
      return GridFunction(d, f.value);
    case FunctionSpec::Type::Affine:
      return GridFunction::sample(d, [&](const Point& x) {
        double v = f.value;
        for (std::size_t i = 0; i < dim; ++i) v += f.grad[i] * x[i];
        return v;
      });
    case FunctionSpec::Type::RePower:
      return GridFunction::sample(d, [&](const Point& x) {
        const std::complex<double> z(x[0] - f.center[0], x[1] - f.center[1]);
        require(f.k > 0 || std::abs(z) > 0.0, ErrorCode::InvalidArgument,
                "re_power with negative k is singular at a node");
        return std::pow(z, f.k).real();
      });
    case FunctionSpec::Type::LogModulus:
      return GridFunction::sample(d, [&](const Point& x) {
        double r2 = 0.0;
        for (std::size_t i = 0; i < dim; ++i) r2 += (x[i] - f.center[i]) * (x[i] - f.center[i]);
        require(r2 > 0.0, ErrorCode::InvalidArgument,
                "log_modulus is singular at a node; move the center or mask it");
        return 0.5 * std::log(r2);
      });
    case FunctionSpec::Type::Values:
      return GridFunction(d, f.values);
  }
  throw Error(ErrorCode::Internal, "unhandled function type");
}

}  // namespace npf
