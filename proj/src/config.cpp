#include "pendwit/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

#include "pendwit/lyapunov.hpp"

namespace pendwit {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(Errc::Config, "config: " + where + ": " + what);
}

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
  if (!obj.is_object()) bad(where, "expected an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) bad(where, "unknown key '" + key + "'");
}

double need_number(const json& obj, const std::string& where, const std::string& key) {
  if (!obj.contains(key)) bad(where, "missing key '" + key + "'");
  if (!obj[key].is_number()) bad(where + "." + key, "expected a number");
  return obj[key].get<double>();
}

double number_or(const json& obj, const std::string& where, const std::string& key,
                 double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) bad(where + "." + key, "expected a number");
  return obj[key].get<double>();
}

std::int64_t integer_or(const json& obj, const std::string& where, const std::string& key,
                        std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer()) bad(where + "." + key, "expected an integer");
  return obj[key].get<std::int64_t>();
}

std::string need_string(const json& obj, const std::string& where, const std::string& key) {
  if (!obj.contains(key)) bad(where, "missing key '" + key + "'");
  if (!obj[key].is_string()) bad(where + "." + key, "expected a string");
  return obj[key].get<std::string>();
}

Eigen::VectorXd need_vector(const json& obj, const std::string& where, const std::string& key,
                            int dim) {
  if (!obj.contains(key)) bad(where, "missing key '" + key + "'");
  const json& arr = obj[key];
  if (!arr.is_array()) bad(where + "." + key, "expected an array of numbers");
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) bad(where + "." + key, "expected an array of numbers");
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  if (dim > 0 && v.size() != dim)
    bad(where + "." + key, "expected " + std::to_string(dim) + " components, got " +
                               std::to_string(v.size()));
  return v;
}

Eigen::MatrixXd need_matrix(const json& obj, const std::string& where, const std::string& key,
                            int dim) {
  if (!obj.contains(key)) bad(where, "missing key '" + key + "'");
  const json& rows = obj[key];
  if (!rows.is_array() || rows.empty()) bad(where + "." + key, "expected an array of rows");
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const json& row = rows[i];
    if (!row.is_array() || row.size() != rows[0].size())
      bad(where + "." + key, "expected a rectangular matrix");
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!row[j].is_number()) bad(where + "." + key, "expected numeric entries");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j].get<double>();
    }
  }
  if (dim > 0 && (m.rows() != dim || m.cols() != dim))
    bad(where + "." + key, "expected a " + std::to_string(dim) + "x" + std::to_string(dim) +
                               " matrix");
  return m;
}

ControlLaw parse_controller(const json& spec, const std::string& where) {
  if (!spec.is_object()) bad(where, "expected an object");
  std::optional<double> bound, period;
  if (spec.contains("bound")) bound = need_number(spec, where, "bound");
  if (spec.contains("period")) period = need_number(spec, where, "period");
  if (spec.contains("expr")) {
    require_keys(spec, where, {"expr", "bound", "period"});
    return ControlLaw::from_text(need_string(spec, where, "expr"), bound, period);
  }
  if (spec.contains("builtin")) {
    require_keys(spec, where, {"builtin", "params", "bound", "period"});
    std::map<std::string, double> params;
    if (spec.contains("params")) {
      if (!spec["params"].is_object()) bad(where + ".params", "expected an object");
      for (const auto& [key, value] : spec["params"].items()) {
        if (!value.is_number()) bad(where + ".params." + key, "expected a number");
        params[key] = value.get<double>();
      }
    }
    ControlLaw law = builtin(need_string(spec, where, "builtin"), params);
    // explicit declarations override the builtin's own metadata
    if (bound) law.declared_bound = bound;
    if (period) law.declared_period = period;
    return law;
  }
  bad(where, "controller needs either 'expr' or 'builtin'");
}

SystemModel parse_system(const json& spec) {
  const std::string where = "system";
  if (!spec.is_object()) bad(where, "expected an object");
  const std::string kind = need_string(spec, where, "kind");
  if (kind == "simple") {
    require_keys(spec, where, {"kind"});
    return SystemModel::simple();
  }
  if (kind == "torque") {
    require_keys(spec, where, {"kind", "w"});
    if (!spec.contains("w")) bad(where, "torque system needs the torque law 'w'");
    return SystemModel::torque_augmented(parse_controller(spec["w"], where + ".w"));
  }
  if (kind == "friction") {
    require_keys(spec, where, {"kind", "nu"});
    return SystemModel::friction(need_number(spec, where, "nu"));
  }
  if (kind == "sphere") {
    require_keys(spec, where, {"kind", "variant"});
    SphereVariant variant = SphereVariant::Verbatim;
    if (spec.contains("variant")) {
      const std::string name = need_string(spec, where, "variant");
      if (name == "verbatim")
        variant = SphereVariant::Verbatim;
      else if (name == "standard")
        variant = SphereVariant::Standard;
      else
        bad(where + ".variant", "expected 'verbatim' or 'standard'");
    }
    return SystemModel::sphere(variant);
  }
  if (kind == "cart") {
    require_keys(spec, where, {"kind", "m"});
    return SystemModel::cart(need_number(spec, where, "m"));
  }
  bad(where + ".kind", "unknown system kind '" + kind + "'");
}

CaptureSpec parse_capture(const json& spec, int dim) {
  const std::string where = "capture";
  CaptureSpec out;
  if (!spec.is_object()) bad(where, "expected an object");
  const std::string kind = need_string(spec, where, "kind");
  if (kind == "none") {
    require_keys(spec, where, {"kind"});
    return out;
  }
  if (kind == "auto_ball") {
    require_keys(spec, where, {"kind", "mu", "t0", "n_samples"});
    out.kind = CaptureSpec::Kind::AutoBall;
    out.mu = need_vector(spec, where, "mu", dim);
    out.t0 = number_or(spec, where, "t0", 0.0);
    out.n_samples = static_cast<int>(integer_or(spec, where, "n_samples", 2000));
    return out;
  }
  if (kind == "ball") {
    require_keys(spec, where, {"kind", "mu", "P", "eps"});
    out.kind = CaptureSpec::Kind::Ball;
    out.mu = need_vector(spec, where, "mu", dim);
    out.form = need_matrix(spec, where, "P", dim);
    out.eps = need_number(spec, where, "eps");
    if (!(out.eps > 0)) bad(where + ".eps", "expected a positive level");
    return out;
  }
  if (kind == "cylinder") {
    require_keys(spec, where, {"kind", "center", "P", "eps"});
    out.kind = CaptureSpec::Kind::Cylinder;
    const Eigen::VectorXd center = need_vector(spec, where, "center", 2);
    out.center = center.head<2>();
    out.form = need_matrix(spec, where, "P", 2);
    out.eps = need_number(spec, where, "eps");
    if (!(out.eps > 0)) bad(where + ".eps", "expected a positive level");
    return out;
  }
  bad(where + ".kind", "expected one of none, auto_ball, ball, cylinder");
}

AxisSpec parse_axis(const json& spec, const std::string& where, int dim,
                    const std::string& fallback_label) {
  require_keys(spec, where, {"index", "lo", "hi", "count", "label"});
  AxisSpec ax;
  ax.state_index = static_cast<int>(integer_or(spec, where, "index", -1));
  if (ax.state_index < 0 || ax.state_index >= dim) bad(where + ".index", "state index out of range");
  ax.lo = need_number(spec, where, "lo");
  ax.hi = need_number(spec, where, "hi");
  ax.count = static_cast<int>(integer_or(spec, where, "count", 0));
  if (ax.count < 2) bad(where + ".count", "expected at least 2 nodes");
  ax.label = spec.contains("label") ? need_string(spec, where, "label") : fallback_label;
  return ax;
}

std::string component_label(SystemKind kind, int index) {
  static const char* planar[] = {"q", "p"};
  static const char* cart[] = {"q", "p", "x", "y"};
  static const char* sphere[] = {"phi", "dphi", "theta", "dtheta"};
  if (kind == SystemKind::Sphere) return sphere[index];
  if (kind == SystemKind::Cart) return cart[index];
  return planar[index];
}

}  // namespace

ScenarioConfig load_scenario_text(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::Config, std::string("config: invalid JSON: ") + e.what());
  }
  require_keys(doc, "<root>",
               {"system", "controller", "controller_v", "integrator", "seed", "threads",
                "capture", "simulate", "classify", "survivor", "periodic", "lyapunov", "sweep"});

  ScenarioConfig cfg;
  if (!doc.contains("system")) bad("<root>", "missing 'system'");
  cfg.model = parse_system(doc["system"]);
  const int dim = state_dim(cfg.model.kind);

  if (!doc.contains("controller")) bad("<root>", "missing 'controller'");
  ControlLaw u = parse_controller(doc["controller"], "controller");
  ControlLaw v = builtins::zero();
  if (doc.contains("controller_v")) {
    if (cfg.model.kind != SystemKind::Sphere)
      bad("controller_v", "only the sphere takes a second control");
    v = parse_controller(doc["controller_v"], "controller_v");
  }
  cfg.controls = Controls{std::move(u), std::move(v)};
  check_controls(cfg.model, cfg.controls);

  if (doc.contains("integrator")) {
    const json& integ = doc["integrator"];
    const std::string where = "integrator";
    require_keys(integ, where, {"rtol", "atol", "h0", "hmax", "max_steps", "t_tol"});
    cfg.integrator.rtol = number_or(integ, where, "rtol", cfg.integrator.rtol);
    cfg.integrator.atol = number_or(integ, where, "atol", cfg.integrator.atol);
    cfg.integrator.h0 = number_or(integ, where, "h0", cfg.integrator.h0);
    cfg.integrator.hmax = number_or(integ, where, "hmax", cfg.integrator.hmax);
    cfg.integrator.max_steps = integer_or(integ, where, "max_steps", cfg.integrator.max_steps);
    cfg.integrator.t_tol = number_or(integ, where, "t_tol", cfg.integrator.t_tol);
    cfg.integrator.validate();
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_integer() || doc["seed"].get<std::int64_t>() < 0)
      bad("seed", "expected a non-negative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("threads"))
    cfg.threads = static_cast<int>(integer_or(doc, "<root>", "threads", 0));
  if (doc.contains("capture")) cfg.capture = parse_capture(doc["capture"], dim);

  if (doc.contains("simulate")) {
    const json& s = doc["simulate"];
    const std::string where = "simulate";
    require_keys(s, where, {"state0", "t0", "t_end", "sample_step"});
    SimulateSpec spec;
    spec.state0 = need_vector(s, where, "state0", dim);
    spec.t0 = number_or(s, where, "t0", 0.0);
    spec.t_end = need_number(s, where, "t_end");
    spec.sample_step = number_or(s, where, "sample_step", 0.01);
    if (!(spec.sample_step > 0)) bad(where + ".sample_step", "expected > 0");
    cfg.simulate = std::move(spec);
  }
  if (doc.contains("classify")) {
    const json& s = doc["classify"];
    const std::string where = "classify";
    require_keys(s, where, {"state0", "t0", "horizon"});
    ClassifySpec spec;
    spec.state0 = need_vector(s, where, "state0", dim);
    spec.t0 = number_or(s, where, "t0", 0.0);
    spec.horizon = number_or(s, where, "horizon", 30.0);
    cfg.classify = std::move(spec);
  }
  if (doc.contains("survivor")) {
    const json& s = doc["survivor"];
    const std::string where = "survivor";
    require_keys(s, where, {"path", "t0", "horizon", "tol_s", "sample_step"});
    SurvivorSpec spec;
    if (!s.contains("path") || !s["path"].is_array() || s["path"].size() < 2)
      bad(where + ".path", "expected an array of at least two waypoints");
    for (std::size_t i = 0; i < s["path"].size(); ++i) {
      json holder;
      holder["w"] = s["path"][i];
      spec.path.push_back(need_vector(holder, where + ".path", "w", dim));
    }
    spec.t0 = number_or(s, where, "t0", 0.0);
    spec.horizon = number_or(s, where, "horizon", 30.0);
    spec.tol_s = number_or(s, where, "tol_s", 1e-10);
    spec.sample_step = number_or(s, where, "sample_step", 0.01);
    cfg.survivor = std::move(spec);
  }
  if (doc.contains("periodic")) {
    const json& s = doc["periodic"];
    const std::string where = "periodic";
    require_keys(s, where, {"seeds", "residual_tol", "index_box", "sample_step"});
    PeriodicSpec spec;
    spec.seeds = static_cast<int>(integer_or(s, where, "seeds", 16));
    spec.residual_tol = number_or(s, where, "residual_tol", 1e-10);
    spec.index_box = number_or(s, where, "index_box", 1e-3);
    spec.sample_step = number_or(s, where, "sample_step", 0.0);
    cfg.periodic = std::move(spec);
  }
  if (doc.contains("lyapunov")) {
    const json& s = doc["lyapunov"];
    const std::string where = "lyapunov";
    require_keys(s, where, {"mu", "t0", "n_samples"});
    LyapunovSpec spec;
    spec.mu = need_vector(s, where, "mu", dim);
    spec.t0 = number_or(s, where, "t0", 0.0);
    spec.n_samples = static_cast<int>(integer_or(s, where, "n_samples", 2000));
    cfg.lyapunov = std::move(spec);
  }
  if (doc.contains("sweep")) {
    const json& s = doc["sweep"];
    const std::string where = "sweep";
    require_keys(s, where, {"axis_x", "axis_y", "base_state", "t0", "horizon"});
    SweepSpec spec;
    if (!s.contains("axis_x") || !s.contains("axis_y")) bad(where, "needs axis_x and axis_y");
    spec.axis_x = parse_axis(s["axis_x"], where + ".axis_x", dim, "");
    spec.axis_y = parse_axis(s["axis_y"], where + ".axis_y", dim, "");
    if (spec.axis_x.label.empty())
      spec.axis_x.label = component_label(cfg.model.kind, spec.axis_x.state_index);
    if (spec.axis_y.label.empty())
      spec.axis_y.label = component_label(cfg.model.kind, spec.axis_y.state_index);
    spec.base_state = s.contains("base_state") ? need_vector(s, where, "base_state", dim)
                                               : Eigen::VectorXd::Zero(dim);
    spec.t0 = number_or(s, where, "t0", 0.0);
    spec.horizon = number_or(s, where, "horizon", 20.0);
    cfg.sweep = std::move(spec);
  }
  return cfg;
}

ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Config, "config: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_scenario_text(text);
}

CaptureRegion build_capture(const ScenarioConfig& config) {
  switch (config.capture.kind) {
    case CaptureSpec::Kind::None:
      return CaptureRegion::none();
    case CaptureSpec::Kind::AutoBall: {
      LyapunovRegion region =
          build_region(config.model, config.controls, config.capture.mu, config.capture.t0,
                       config.capture.n_samples, config.seed + kDefaultShellSeed);
      return CaptureRegion::ball_region(std::move(region));
    }
    case CaptureSpec::Kind::Ball: {
      LyapunovRegion region{config.capture.mu, QuadraticForm{config.capture.form},
                            config.capture.eps, std::nullopt};
      // user-supplied, geometrically validated, not flow-verified
      if (max_level_inside_region(config.model.kind, region.mu, region.form) < region.eps)
        throw Error(Errc::Config, "capture ball is not strictly inside the admissible region");
      return CaptureRegion::ball_region(std::move(region));
    }
    case CaptureSpec::Kind::Cylinder: {
      if (config.model.kind != SystemKind::Cart)
        throw Error(Errc::Config, "cylinder capture requires the cart system");
      QuadraticForm form{config.capture.form};
      if (max_level_inside_region(SystemKind::Simple, config.capture.center, form) <
          config.capture.eps)
        throw Error(Errc::Config, "capture cylinder is not strictly inside the strip");
      return CaptureRegion::cylinder(config.capture.form.block<2, 2>(0, 0),
                                     config.capture.center, config.capture.eps);
    }
  }
  return CaptureRegion::none();
}

namespace {

Json controller_json(const ControlLaw& law) {
  Json j = Json::object();
  j.set("expr", law.source);
  if (law.declared_bound) j.set("bound", *law.declared_bound);
  if (law.declared_period) j.set("period", *law.declared_period);
  return j;
}

}  // namespace

Json resolved_config_json(const ScenarioConfig& config, const std::string& command) {
  Json root = Json::object();

  Json system = Json::object();
  system.set("kind", std::string(kind_name(config.model.kind)));
  if (config.model.kind == SystemKind::Friction) system.set("nu", config.model.nu);
  if (config.model.kind == SystemKind::Cart) system.set("m", config.model.cart_mass);
  if (config.model.kind == SystemKind::Torque) system.set("w", controller_json(*config.model.torque));
  if (config.model.kind == SystemKind::Sphere)
    system.set("variant",
               config.model.sphere_variant == SphereVariant::Verbatim ? "verbatim" : "standard");
  root.set("system", std::move(system));

  root.set("controller", controller_json(config.controls.u));
  if (config.model.kind == SystemKind::Sphere)
    root.set("controller_v", controller_json(config.controls.v));

  Json integ = Json::object();
  integ.set("rtol", config.integrator.rtol);
  integ.set("atol", config.integrator.atol);
  integ.set("h0", config.integrator.h0);
  integ.set("hmax", config.integrator.hmax);
  integ.set("max_steps", static_cast<std::int64_t>(config.integrator.max_steps));
  integ.set("t_tol", config.integrator.t_tol);
  root.set("integrator", std::move(integ));

  // threads is a runtime knob, not part of the scenario: results are
  // worker-count independent, so the resolved document omits it
  root.set("seed", config.seed);

  Json capture = Json::object();
  switch (config.capture.kind) {
    case CaptureSpec::Kind::None: capture.set("kind", "none"); break;
    case CaptureSpec::Kind::AutoBall:
      capture.set("kind", "auto_ball");
      capture.set("mu", Json::vector(config.capture.mu));
      capture.set("t0", config.capture.t0);
      capture.set("n_samples", config.capture.n_samples);
      break;
    case CaptureSpec::Kind::Ball:
      capture.set("kind", "ball");
      capture.set("mu", Json::vector(config.capture.mu));
      capture.set("P", Json::matrix(config.capture.form));
      capture.set("eps", config.capture.eps);
      break;
    case CaptureSpec::Kind::Cylinder:
      capture.set("kind", "cylinder");
      capture.set("center", Json::vector(config.capture.center));
      capture.set("P", Json::matrix(config.capture.form));
      capture.set("eps", config.capture.eps);
      break;
  }
  root.set("capture", std::move(capture));

  if (command == "simulate" && config.simulate) {
    Json s = Json::object();
    s.set("state0", Json::vector(config.simulate->state0));
    s.set("t0", config.simulate->t0);
    s.set("t_end", config.simulate->t_end);
    s.set("sample_step", config.simulate->sample_step);
    root.set("simulate", std::move(s));
  }
  if (command == "classify" && config.classify) {
    Json s = Json::object();
    s.set("state0", Json::vector(config.classify->state0));
    s.set("t0", config.classify->t0);
    s.set("horizon", config.classify->horizon);
    root.set("classify", std::move(s));
  }
  if (command == "survivor" && config.survivor) {
    Json s = Json::object();
    Json path = Json::array();
    for (const auto& w : config.survivor->path) path.push(Json::vector(w));
    s.set("path", std::move(path));
    s.set("t0", config.survivor->t0);
    s.set("horizon", config.survivor->horizon);
    s.set("tol_s", config.survivor->tol_s);
    s.set("sample_step", config.survivor->sample_step);
    root.set("survivor", std::move(s));
  }
  if (command == "periodic" && config.periodic) {
    Json s = Json::object();
    s.set("seeds", config.periodic->seeds);
    s.set("residual_tol", config.periodic->residual_tol);
    s.set("index_box", config.periodic->index_box);
    s.set("sample_step", config.periodic->sample_step);
    root.set("periodic", std::move(s));
  }
  if (command == "lyapunov" && config.lyapunov) {
    Json s = Json::object();
    s.set("mu", Json::vector(config.lyapunov->mu));
    s.set("t0", config.lyapunov->t0);
    s.set("n_samples", config.lyapunov->n_samples);
    root.set("lyapunov", std::move(s));
  }
  if (command == "sweep" && config.sweep) {
    auto axis = [](const AxisSpec& ax) {
      Json j = Json::object();
      j.set("index", ax.state_index);
      j.set("lo", ax.lo);
      j.set("hi", ax.hi);
      j.set("count", ax.count);
      j.set("label", ax.label);
      return j;
    };
    Json s = Json::object();
    s.set("axis_x", axis(config.sweep->axis_x));
    s.set("axis_y", axis(config.sweep->axis_y));
    s.set("base_state", Json::vector(config.sweep->base_state));
    s.set("t0", config.sweep->t0);
    s.set("horizon", config.sweep->horizon);
    root.set("sweep", std::move(s));
  }
  return root;
}

}  // namespace pendwit
