#include "config.hpp"

#include <fstream>
#include <set>

namespace shapeuq::cli {

using nlohmann::json;

namespace {

// Object view that records consumed keys; finish() rejects the rest.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(display(), "expected an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  std::optional<Node> child(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    return Node(*v, key_path(key));
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(key_path(key), "expected a number");
      out = v->get<double>();
    }
  }

  void integer(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(key_path(key), "expected an integer");
      out = v->get<int>();
    }
  }

  void unsigned64(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) {
        throw ConfigError(key_path(key), "expected a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(key_path(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out, const std::set<std::string>& allowed = {}) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(key_path(key), "expected a string");
      out = v->get<std::string>();
      if (!allowed.empty() && !allowed.count(out)) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        throw ConfigError(key_path(key), "unknown value '" + out + "' (expected one of: " + list + ")");
      }
    }
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(key_path(key), "expected an array of numbers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number()) throw ConfigError(key_path(key) + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back((*v)[i].get<double>());
      }
    }
  }

  void integers(const std::string& key, std::vector<int>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(key_path(key), "expected an array of integers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number_integer()) {
          throw ConfigError(key_path(key) + "[" + std::to_string(i) + "]", "expected an integer");
        }
        out.push_back((*v)[i].get<int>());
      }
    }
  }

  void vec(const std::string& key, Vec& out, int dim) {
    if (const json* v = find(key)) parse_vec(*v, key_path(key), out, dim);
  }

  static void parse_vec(const json& v, const std::string& path, Vec& out, int dim) {
    if (!v.is_array() || static_cast<int>(v.size()) != dim) {
      throw ConfigError(path, "expected an array of " + std::to_string(dim) + " numbers");
    }
    out.resize(dim);
    for (int k = 0; k < dim; ++k) {
      if (!v[k].is_number()) throw ConfigError(path + "[" + std::to_string(k) + "]", "expected a number");
      out(k) = v[k].get<double>();
    }
  }

  const json& raw() const { return j_; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
    }
  }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void require(bool ok, const std::string& path, const std::string& message) {
  if (!ok) throw ConfigError(path, message);
}

void require_decreasing(const std::vector<double>& v, const std::string& path, std::size_t min_size) {
  require(v.size() >= min_size, path, "needs at least " + std::to_string(min_size) + " values");
  for (std::size_t i = 0; i < v.size(); ++i) {
    require(v[i] > 0.0, path + "[" + std::to_string(i) + "]", "must be positive");
    if (i > 0) require(v[i] < v[i - 1], path + "[" + std::to_string(i) + "]", "grid must be strictly decreasing");
  }
}

BoundaryMode::Kind mode_kind(const std::string& s) {
  if (s == "cosine") return BoundaryMode::Kind::cosine;
  if (s == "sine") return BoundaryMode::Kind::sine;
  return BoundaryMode::Kind::constant;
}

std::string mode_kind_name(BoundaryMode::Kind k) {
  switch (k) {
    case BoundaryMode::Kind::cosine:
      return "cosine";
    case BoundaryMode::Kind::sine:
      return "sine";
    case BoundaryMode::Kind::constant:
      break;
  }
  return "constant";
}

std::vector<KappaMode> default_random_modes() {
  return {{BoundaryMode{BoundaryMode::Kind::cosine, 1}, CoefficientLaw{CoefficientLaw::Kind::uniform, 1.0}},
          {BoundaryMode{BoundaryMode::Kind::sine, 2}, CoefficientLaw{CoefficientLaw::Kind::uniform, 0.5}}};
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["geometry"] = {{"preset", c.geometry.preset},
                   {"radius", c.geometry.radius},
                   {"rings", c.geometry.rings},
                   {"cells", c.geometry.cells}};
  j["time"] = {{"final_time", c.time.final_time},
               {"steps", c.time.steps},
               {"scheme", c.time.scheme == TimeScheme::crank_nicolson ? "crank_nicolson" : "implicit_euler"}};
  j["data"] = {{"preset", c.data}};
  json kappa = json::array();
  for (const KappaTerm& t : c.velocity.kappa) {
    kappa.push_back({{"kind", mode_kind_name(t.kind)}, {"frequency", t.frequency}, {"coefficient", t.coefficient}});
  }
  json matrix = json::array();
  for (Eigen::Index r = 0; r < c.velocity.matrix.rows(); ++r) matrix.push_back(vec_json(c.velocity.matrix.row(r).transpose()));
  j["velocity"] = {{"preset", c.velocity.preset},       {"kappa", kappa},
                   {"collar_width", c.velocity.collar_width}, {"matrix", matrix},
                   {"offset", vec_json(c.velocity.offset)},   {"center", vec_json(c.velocity.center)},
                   {"inner", c.velocity.inner},               {"outer", c.velocity.outer}};
  json modes = json::array();
  for (const KappaMode& m : c.random_modes) {
    modes.push_back({{"kind", mode_kind_name(m.basis.kind)},
                     {"frequency", m.basis.frequency},
                     {"law", m.law.kind == CoefficientLaw::Kind::uniform ? "uniform" : "truncated_gaussian"},
                     {"scale", m.law.scale}});
  }
  j["random"] = {{"modes", modes}};
  if (c.amplitude_cap) j["random"]["amplitude_cap"] = *c.amplitude_cap;
  j["epsilon"] = c.epsilon;
  json points = json::array();
  for (const Vec& p : c.probes.points) points.push_back(vec_json(p));
  j["probes"] = {{"points", points}, {"times", c.probes.times}};
  j["bem"] = {{"elements", c.bem.elements},
              {"gauss_far", c.bem.gauss_far},
              {"gauss_near", c.bem.gauss_near},
              {"route", c.bem.route}};
  j["monte_carlo"] = {{"seed", c.monte_carlo.seed},
                      {"samples", c.monte_carlo.samples},
                      {"linear_samples", c.monte_carlo.linear_samples}};
  const StudyConfig& s = c.studies;
  j["studies"] = {{"kinematics_eps", s.kinematics_eps},
                  {"derivative_eps", s.derivative_eps},
                  {"compact_radius", s.compact_radius},
                  {"compact_eps", s.compact_eps},
                  {"mms_cells", s.mms_cells},
                  {"mms_steps", s.mms_steps},
                  {"mms_temporal_cells", s.mms_temporal_cells},
                  {"mms_temporal_steps", s.mms_temporal_steps},
                  {"mms_reference_steps", s.mms_reference_steps},
                  {"energy_datasets", s.energy_datasets},
                  {"energy_times", s.energy_times},
                  {"energy_rings", s.energy_rings},
                  {"fd_probes", s.fd_probes}};
  const Tolerances& t = c.tolerances;
  j["tolerances"] = {{"kinematics_slope_min", t.kinematics_slope_min},
                     {"kinematics_slope_max", t.kinematics_slope_max},
                     {"a_prime_fd", t.a_prime_fd},
                     {"derivative_order", t.derivative_order},
                     {"identity", t.identity},
                     {"compact_floor_factor", t.compact_floor_factor},
                     {"crosscheck", t.crosscheck},
                     {"roundtrip", t.roundtrip},
                     {"stderr_factor", t.stderr_factor},
                     {"moments_relative", t.moments_relative},
                     {"psd_floor", t.psd_floor}};
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  j["write_vtk"] = c.write_vtk;
  return j;
}

}  // namespace

RunConfig parse_config(const json& doc) {
  RunConfig c;
  c.random_modes = default_random_modes();
  Node root(doc, "");

  if (auto g = root.child("geometry")) {
    g->string("preset", c.geometry.preset, {"disk", "square"});
    g->number("radius", c.geometry.radius);
    g->integer("rings", c.geometry.rings);
    g->integer("cells", c.geometry.cells);
    g->finish();
  }
  require(c.geometry.radius > 0.0, "geometry.radius", "must be positive");
  require(c.geometry.rings >= 1, "geometry.rings", "must be at least 1");
  require(c.geometry.cells >= 1, "geometry.cells", "must be at least 1");

  if (auto t = root.child("time")) {
    t->number("final_time", c.time.final_time);
    t->integer("steps", c.time.steps);
    std::string scheme = "crank_nicolson";
    t->string("scheme", scheme, {"crank_nicolson", "implicit_euler"});
    c.time.scheme = scheme == "crank_nicolson" ? TimeScheme::crank_nicolson : TimeScheme::implicit_euler;
    t->finish();
  }
  require(c.time.final_time > 0.0, "time.final_time", "must be positive");
  require(c.time.steps > 0, "time.steps", "must be positive");

  if (auto d = root.child("data")) {
    d->string("preset", c.data, {"disk", "manufactured", "zero"});
    d->finish();
  }

  if (auto v = root.child("velocity")) {
    v->string("preset", c.velocity.preset, {"kappa", "affine", "zero"});
    if (const json* k = v->find("kappa")) {
      const std::string path = v->key_path("kappa");
      require(k->is_array(), path, "expected an array of terms");
      c.velocity.kappa.clear();
      for (std::size_t i = 0; i < k->size(); ++i) {
        Node term((*k)[i], path + "[" + std::to_string(i) + "]");
        std::string kind = "cosine";
        KappaTerm kt;
        term.string("kind", kind, {"cosine", "sine", "constant"});
        kt.kind = mode_kind(kind);
        term.integer("frequency", kt.frequency);
        term.number("coefficient", kt.coefficient);
        term.finish();
        require(kt.frequency >= 0, term.key_path("frequency"), "must be non-negative");
        c.velocity.kappa.push_back(kt);
      }
    }
    v->number("collar_width", c.velocity.collar_width);
    if (const json* m = v->find("matrix")) {
      const std::string path = v->key_path("matrix");
      require(m->is_array() && m->size() == 2, path, "expected a 2 x 2 array");
      for (int r = 0; r < 2; ++r) {
        Vec row;
        Node::parse_vec((*m)[r], path + "[" + std::to_string(r) + "]", row, 2);
        c.velocity.matrix.row(r) = row.transpose();
      }
    }
    v->vec("offset", c.velocity.offset, 2);
    v->vec("center", c.velocity.center, 2);
    v->number("inner", c.velocity.inner);
    v->number("outer", c.velocity.outer);
    v->finish();
  }
  require(c.velocity.collar_width > 0.0 && c.velocity.collar_width < 0.5, "velocity.collar_width",
          "must lie in (0, 0.5)");
  require(c.velocity.inner >= 0.0 && c.velocity.outer > c.velocity.inner, "velocity.outer",
          "must exceed velocity.inner >= 0");

  if (auto r = root.child("random")) {
    if (const json* m = r->find("modes")) {
      const std::string path = r->key_path("modes");
      require(m->is_array() && !m->empty(), path, "expected a non-empty array of modes");
      c.random_modes.clear();
      for (std::size_t i = 0; i < m->size(); ++i) {
        Node mode((*m)[i], path + "[" + std::to_string(i) + "]");
        std::string kind = "cosine", law = "uniform";
        KappaMode km;
        mode.string("kind", kind, {"cosine", "sine", "constant"});
        km.basis.kind = mode_kind(kind);
        mode.integer("frequency", km.basis.frequency);
        mode.string("law", law, {"uniform", "truncated_gaussian"});
        km.law.kind = law == "uniform" ? CoefficientLaw::Kind::uniform : CoefficientLaw::Kind::truncated_gaussian;
        mode.number("scale", km.law.scale);
        mode.finish();
        require(km.basis.frequency >= 0, mode.key_path("frequency"), "must be non-negative");
        require(km.law.scale >= 0.0, mode.key_path("scale"), "must be non-negative");
        c.random_modes.push_back(km);
      }
    }
    if (const json* cap = r->find("amplitude_cap")) {
      require(cap->is_number() && cap->get<double>() > 0.0, r->key_path("amplitude_cap"), "must be a positive number");
      c.amplitude_cap = cap->get<double>();
    }
    r->finish();
  }

  root.number("epsilon", c.epsilon);
  require(c.epsilon >= 0.0, "epsilon", "must be non-negative");

  if (auto p = root.child("probes")) {
    if (const json* pts = p->find("points")) {
      const std::string path = p->key_path("points");
      require(pts->is_array(), path, "expected an array of points");
      for (std::size_t i = 0; i < pts->size(); ++i) {
        Vec x;
        Node::parse_vec((*pts)[i], path + "[" + std::to_string(i) + "]", x, 2);
        c.probes.points.push_back(x);
      }
    }
    p->numbers("times", c.probes.times);
    p->finish();
  }
  for (std::size_t i = 0; i < c.probes.times.size(); ++i) {
    const double t = c.probes.times[i];
    const double k = t / c.time.final_time * c.time.steps;
    require(t >= 0.0 && t <= c.time.final_time && std::abs(k - std::round(k)) < 1e-9,
            "probes.times[" + std::to_string(i) + "]", "must be a node of the time grid");
  }
  if (c.probes.times.empty()) {
    const int half = c.time.steps / 2;
    if (half > 0) c.probes.times.push_back(c.time.final_time * half / c.time.steps);
    c.probes.times.push_back(c.time.final_time);
  }
  if (c.probes.points.empty()) {
    const bool disk = c.geometry.preset == "disk";
    const double r = disk ? 0.5 * c.geometry.radius : 0.25;
    const Vec center = disk ? Vec(Vec::Zero(2)) : make_vec({0.5, 0.5});
    for (int k = 0; k < 10; ++k) {
      const double a = 2.0 * std::numbers::pi * k / 10 + 0.3;
      c.probes.points.push_back(center + r * make_vec({std::cos(a), std::sin(a)}));
    }
  }

  if (auto b = root.child("bem")) {
    b->integer("elements", c.bem.elements);
    b->integer("gauss_far", c.bem.gauss_far);
    b->integer("gauss_near", c.bem.gauss_near);
    b->string("route", c.bem.route, {"lowrank", "dense"});
    b->finish();
  }
  require(c.bem.elements == 0 || c.bem.elements >= 3, "bem.elements", "must be 0 (finite element boundary) or at least 3");
  require(c.bem.gauss_far >= 1 && c.bem.gauss_far <= 64, "bem.gauss_far", "must lie in [1, 64]");
  require(c.bem.gauss_near >= 1 && c.bem.gauss_near <= 64, "bem.gauss_near", "must lie in [1, 64]");

  if (auto m = root.child("monte_carlo")) {
    m->unsigned64("seed", c.monte_carlo.seed);
    m->integer("samples", c.monte_carlo.samples);
    m->integer("linear_samples", c.monte_carlo.linear_samples);
    m->finish();
  }
  require(c.monte_carlo.samples >= 2, "monte_carlo.samples", "must be at least 2");
  require(c.monte_carlo.linear_samples >= 2, "monte_carlo.linear_samples", "must be at least 2");

  if (auto s = root.child("studies")) {
    StudyConfig& st = c.studies;
    s->numbers("kinematics_eps", st.kinematics_eps);
    s->numbers("derivative_eps", st.derivative_eps);
    s->number("compact_radius", st.compact_radius);
    s->numbers("compact_eps", st.compact_eps);
    s->integers("mms_cells", st.mms_cells);
    s->integer("mms_steps", st.mms_steps);
    s->integer("mms_temporal_cells", st.mms_temporal_cells);
    s->integers("mms_temporal_steps", st.mms_temporal_steps);
    s->integer("mms_reference_steps", st.mms_reference_steps);
    s->integer("energy_datasets", st.energy_datasets);
    s->numbers("energy_times", st.energy_times);
    s->integer("energy_rings", st.energy_rings);
    s->integer("fd_probes", st.fd_probes);
    s->finish();
  }
  {
    const StudyConfig& st = c.studies;
    require_decreasing(st.kinematics_eps, "studies.kinematics_eps", 3);
    require_decreasing(st.derivative_eps, "studies.derivative_eps", 3);
    require_decreasing(st.compact_eps, "studies.compact_eps", 3);
    require(st.compact_radius > 0.0, "studies.compact_radius", "must be positive");
    require(st.mms_cells.size() >= 3, "studies.mms_cells", "needs at least 3 values");
    for (std::size_t i = 0; i < st.mms_cells.size(); ++i) {
      require(st.mms_cells[i] >= 1 && (i == 0 || st.mms_cells[i] > st.mms_cells[i - 1]),
              "studies.mms_cells[" + std::to_string(i) + "]", "must be positive and increasing");
    }
    require(st.mms_temporal_steps.size() >= 3, "studies.mms_temporal_steps", "needs at least 3 values");
    for (std::size_t i = 0; i < st.mms_temporal_steps.size(); ++i) {
      const int n = st.mms_temporal_steps[i];
      require(n >= 1 && (i == 0 || n > st.mms_temporal_steps[i - 1]) && st.mms_reference_steps % n == 0,
              "studies.mms_temporal_steps[" + std::to_string(i) + "]",
              "must be increasing and divide studies.mms_reference_steps");
    }
    require(st.mms_steps >= 1, "studies.mms_steps", "must be positive");
    require(st.mms_temporal_cells >= 1, "studies.mms_temporal_cells", "must be positive");
    require(st.energy_datasets >= 1, "studies.energy_datasets", "must be positive");
    require(!st.energy_times.empty(), "studies.energy_times", "needs at least one final time");
    for (std::size_t i = 0; i < st.energy_times.size(); ++i) {
      require(st.energy_times[i] > 0.0, "studies.energy_times[" + std::to_string(i) + "]", "must be positive");
    }
    require(st.energy_rings >= 1, "studies.energy_rings", "must be positive");
    require(st.fd_probes >= 1, "studies.fd_probes", "must be positive");
  }

  if (auto t = root.child("tolerances")) {
    Tolerances& tol = c.tolerances;
    t->number("kinematics_slope_min", tol.kinematics_slope_min);
    t->number("kinematics_slope_max", tol.kinematics_slope_max);
    t->number("a_prime_fd", tol.a_prime_fd);
    t->number("derivative_order", tol.derivative_order);
    t->number("identity", tol.identity);
    t->number("compact_floor_factor", tol.compact_floor_factor);
    t->number("crosscheck", tol.crosscheck);
    t->number("roundtrip", tol.roundtrip);
    t->number("stderr_factor", tol.stderr_factor);
    t->number("moments_relative", tol.moments_relative);
    t->number("psd_floor", tol.psd_floor);
    t->finish();
    for (auto it = t->raw().begin(); it != t->raw().end(); ++it) {
      require(it->get<double>() >= 0.0, t->key_path(it.key()), "must be non-negative");
    }
  }

  if (const json* o = root.find("output_dir")) {
    require(o->is_string() && !o->get<std::string>().empty(), "output_dir", "expected a non-empty string");
    c.output_dir = o->get<std::string>();
  }
  root.integer("workers", c.workers);
  require(c.workers >= 0, "workers", "must be non-negative (0 = all cores)");
  root.boolean("write_vtk", c.write_vtk);
  root.finish();

  if (c.velocity.preset == "kappa") {
    require(c.geometry.preset == "disk", "velocity.preset", "kappa velocities need the disk geometry");
  }
  c.source = config_to_json(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path);
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("parse error: ") + e.what());
  }
  return parse_config(doc);
}

json default_config_json() { return parse_config(json::object()).source; }

}  // namespace shapeuq::cli
