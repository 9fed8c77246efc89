#include "pendwit/finders.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>

#include "pendwit/parallel.hpp"

namespace pendwit {

Eigen::VectorXd PathParametrization::at(double s) const {
  if (waypoints.size() < 2) fail(Errc::BadParameter, "path needs at least 2 waypoints");
  s = std::clamp(s, 0.0, 1.0);
  const std::size_t segments = waypoints.size() - 1;
  const double scaled = s * static_cast<double>(segments);
  std::size_t seg = std::min(static_cast<std::size_t>(scaled), segments - 1);
  const double local = scaled - static_cast<double>(seg);
  return waypoints[seg] + local * (waypoints[seg + 1] - waypoints[seg]);
}

namespace {

// Everything except Survived and Inconclusive brackets: the exit classes and
// capture are open by the continuity of first exits, and a Singular tag on
// the sphere is a transversal crossing of the chart edge, open as well.
bool bracketable(FateTag tag) {
  return tag == FateTag::ExitLeft || tag == FateTag::ExitRight ||
         tag == FateTag::ExitBoundary || tag == FateTag::Captured || tag == FateTag::Singular;
}

void validate_path(const SystemModel& model, const PathParametrization& path,
                   const CaptureRegion& capture) {
  if (path.waypoints.size() < 2) fail(Errc::BadParameter, "path needs at least 2 waypoints");
  const int dim = state_dim(model.kind);
  for (const auto& w : path.waypoints) {
    if (w.size() != dim) fail(Errc::BadParameter, "path waypoint dimension mismatch");
    const double pos = w[0];
    const double hi = model.kind == SystemKind::Sphere ? std::numeric_limits<double>::infinity()
                                                       : M_PI;
    if (pos < 0.0 || pos > hi)
      throw Error(Errc::PreconditionViolated,
                  "path waypoint outside the closure of the admissible region");
  }
  if (capture.active()) {
    // the path must not dip into the capture region interior
    const int probes = 256;
    for (int i = 0; i <= probes; ++i) {
      const Eigen::VectorXd x = path.at(static_cast<double>(i) / probes);
      if (capture.level(x) < capture.threshold())
        throw Error(Errc::PreconditionViolated,
                    "path enters the capture region interior near s = " +
                        std::to_string(static_cast<double>(i) / probes));
    }
  }
}

SurvivorResult bisect_survivor(const SystemModel& model, const Controls& controls,
                               const PathParametrization& path, double t0, double horizon,
                               const CaptureRegion& capture, double tol_s,
                               const IntegratorConfig& config) {
  if (!(tol_s > 0)) fail(Errc::BadParameter, "tol_s must be > 0");
  validate_path(model, path, capture);

  auto classify_at = [&](double s) {
    return classify(model, controls, path.at(s), t0, horizon, capture, config);
  };

  SurvivorResult result;
  Fate f_lo = classify_at(0.0);
  Fate f_hi = classify_at(1.0);
  if (!bracketable(f_lo.tag) || !bracketable(f_hi.tag))
    throw Error(Errc::PreconditionViolated,
                std::string("path endpoints must classify to exit or capture fates, got ") +
                    std::string(fate_name(f_lo.tag)) + " / " + std::string(fate_name(f_hi.tag)));
  if (f_lo.tag == f_hi.tag)
    throw Error(Errc::SameFateEndpoints,
                std::string("both path endpoints classify as ") +
                    std::string(fate_name(f_lo.tag)));

  double s_lo = 0.0, s_hi = 1.0;
  auto finalize = [&](double s, ClassifyResult&& cls) {
    result.s_star = s;
    result.state_star = path.at(s);
    result.s_lo = s_lo;
    result.s_hi = s_hi;
    result.fate_lo = f_lo.tag;
    result.fate_hi = f_hi.tag;
    result.achieved_horizon = cls.fate.exit_time_proxy;
    result.fate_star = std::move(cls.fate);
    result.trajectory = std::move(cls.trajectory);
    return std::move(result);
  };

  while (s_hi - s_lo > tol_s) {
    double s_mid = 0.5 * (s_lo + s_hi);
    Fate f_mid = classify_at(s_mid);
    if (!bracketable(f_mid.tag) && f_mid.tag != FateTag::Survived) {
      // one retry at a perturbed parameter before giving up
      const double s_pert = s_mid + 0.1 * (s_hi - s_lo);
      Fate f_pert = classify_at(s_pert);
      if (!bracketable(f_pert.tag) && f_pert.tag != FateTag::Survived)
        throw Error(Errc::InconclusiveEncountered,
                    "midpoint classification inconclusive at s = " + std::to_string(s_mid) +
                        " and at the perturbed s = " + std::to_string(s_pert) + ": " +
                        f_mid.detail);
      s_mid = s_pert;
      f_mid = std::move(f_pert);
    }
    result.history.push_back({s_lo, s_hi, s_mid, f_mid.tag});
    if (f_mid.tag == FateTag::Survived)
      return finalize(s_mid, classify_full(model, controls, path.at(s_mid), t0, horizon, capture,
                                           config));
    if (f_mid.tag == f_lo.tag) {
      s_lo = s_mid;
      f_lo = std::move(f_mid);
    } else {
      // either the other bracket tag or a third class; both leave a valid
      // two-class bracket on [s_lo, s_mid]
      s_hi = s_mid;
      f_hi = std::move(f_mid);
    }
  }

  double s_star = 0.5 * (s_lo + s_hi);
  ClassifyResult cls =
      classify_full(model, controls, path.at(s_star), t0, horizon, capture, config);
  if (!bracketable(cls.fate.tag) && cls.fate.tag != FateTag::Survived) {
    const double s_pert = s_star + 0.1 * (s_hi - s_lo);
    cls = classify_full(model, controls, path.at(s_pert), t0, horizon, capture, config);
    if (!bracketable(cls.fate.tag) && cls.fate.tag != FateTag::Survived)
      throw Error(Errc::InconclusiveEncountered,
                  "final midpoint classification inconclusive at s = " + std::to_string(s_star));
    s_star = s_pert;
  }
  return finalize(s_star, std::move(cls));
}

}  // namespace

SurvivorResult find_survivor(const SystemModel& model, const Controls& controls,
                             const PathParametrization& path, double t0, double horizon,
                             const CaptureRegion& capture, double tol_s,
                             const IntegratorConfig& config) {
  return bisect_survivor(model, controls, path, t0, horizon, capture, tol_s, config);
}

SurvivorResult find_survivor_highdim(const SystemModel& model, const Controls& controls,
                                     const PathParametrization& path, double t0, double horizon,
                                     const CaptureRegion& capture, double tol_s,
                                     const IntegratorConfig& config) {
  if (state_dim(model.kind) != 4)
    fail(Errc::BadParameter, "find_survivor_highdim expects the sphere or cart system");
  return bisect_survivor(model, controls, path, t0, horizon, capture, tol_s, config);
}

// ---------------------------------------------------------------------------
// Periodic orbits of the damped, periodically forced pendulum.

namespace {

class PeriodMap {
 public:
  PeriodMap(const SystemModel& model, const Controls& controls, double period,
            const IntegratorConfig& config)
      : model_(model), controls_(controls), period_(period), config_(config) {}

  Eigen::Vector2d operator()(const Eigen::Vector2d& x) const {
    IntegrationResult run =
        integrate(model_, controls_, x, 0.0, period_, {}, config_);
    return run.trajectory.node_state(run.trajectory.step_count());
  }

  Eigen::Vector2d displacement(const Eigen::Vector2d& x) const { return (*this)(x)-x; }

  // central finite-difference monodromy DP_T
  Eigen::Matrix2d monodromy(const Eigen::Vector2d& x, double h = 1e-5) const {
    Eigen::Matrix2d m;
    for (int j = 0; j < 2; ++j) {
      Eigen::Vector2d xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      m.col(j) = ((*this)(xp) - (*this)(xm)) / (2.0 * h);
    }
    return m;
  }

 private:
  const SystemModel& model_;
  const Controls& controls_;
  double period_;
  const IntegratorConfig& config_;
};

std::optional<Eigen::Vector2d> newton_from(const PeriodMap& map, Eigen::Vector2d x, double rho,
                                           double residual_tol, double* best_residual) {
  const double q_lo = -2.0, q_hi = M_PI + 2.0, p_cap = 3.0 * rho;
  for (int iter = 0; iter < 40; ++iter) {
    Eigen::Vector2d g;
    try {
      g = map.displacement(x);
    } catch (const Error&) {
      return std::nullopt;
    }
    const double r = g.norm();
    if (best_residual && r < *best_residual) *best_residual = r;
    if (r <= residual_tol) return x;

    Eigen::Matrix2d J = map.monodromy(x) - Eigen::Matrix2d::Identity();
    const double det = J.determinant();
    if (std::fabs(det) < 1e-14) return std::nullopt;
    Eigen::Vector2d step = -J.inverse() * g;

    // halve the step while it makes the displacement worse
    Eigen::Vector2d x_next = x + step;
    for (int k = 0; k < 4; ++k) {
      if (x_next[0] > q_lo && x_next[0] < q_hi && std::fabs(x_next[1]) < p_cap) {
        double r_next;
        try {
          r_next = map.displacement(x_next).norm();
        } catch (const Error&) {
          r_next = std::numeric_limits<double>::infinity();
        }
        if (r_next < r || r_next <= residual_tol) break;
      }
      step *= 0.5;
      x_next = x + step;
    }
    x = x_next;
    if (!(x[0] > q_lo && x[0] < q_hi && std::fabs(x[1]) < p_cap)) return std::nullopt;
  }
  return std::nullopt;
}

// Angle swept by the displacement field along the rectangle boundary around
// `center`, accumulated with adaptive subdivision so no sampled increment
// exceeds pi/2.
double sweep_angle(const PeriodMap& map, const Eigen::Vector2d& center, double half,
                   double s0, double s1, double a0, double a1, int depth) {
  auto wrap = [](double d) {
    while (d > M_PI) d -= 2.0 * M_PI;
    while (d <= -M_PI) d += 2.0 * M_PI;
    return d;
  };
  const double delta = wrap(a1 - a0);
  if (std::fabs(delta) <= M_PI / 2 || depth >= 16) return delta;
  auto point = [&](double s) {
    // s in [0,4): counterclockwise walk over the rectangle boundary
    const double side = std::floor(s);
    const double u = s - side;
    Eigen::Vector2d d;
    if (side == 0)
      d = {-half + 2.0 * half * u, -half};
    else if (side == 1)
      d = {half, -half + 2.0 * half * u};
    else if (side == 2)
      d = {half - 2.0 * half * u, half};
    else
      d = {-half, half - 2.0 * half * u};
    return Eigen::Vector2d(center + d);
  };
  const double sm = 0.5 * (s0 + s1);
  const Eigen::Vector2d g = map.displacement(point(sm));
  const double am = std::atan2(g[1], g[0]);
  return sweep_angle(map, center, half, s0, sm, a0, am, depth + 1) +
         sweep_angle(map, center, half, sm, s1, am, a1, depth + 1);
}

int winding_number(const PeriodMap& map, const Eigen::Vector2d& center, double half) {
  const int per_side = 16;
  const int n = 4 * per_side;
  std::vector<double> params(n + 1), angles(n + 1);
  for (int i = 0; i <= n; ++i) {
    params[i] = 4.0 * static_cast<double>(i) / n;
    const double side = std::floor(std::min(params[i], 3.9999999999));
    const double u = std::min(params[i], 4.0) - side;
    Eigen::Vector2d d;
    if (side == 0)
      d = {-half + 2.0 * half * u, -half};
    else if (side == 1)
      d = {half, -half + 2.0 * half * u};
    else if (side == 2)
      d = {half - 2.0 * half * u, half};
    else
      d = {-half, half - 2.0 * half * u};
    const Eigen::Vector2d g = map.displacement(Eigen::Vector2d(center + d));
    if (g.norm() < 1e-13)
      fail(Errc::IllConditioned, "displacement vanishes on the index rectangle boundary");
    angles[i] = std::atan2(g[1], g[0]);
  }
  double total = 0;
  for (int i = 0; i < n; ++i)
    total += sweep_angle(map, center, half, params[i], params[i + 1], angles[i], angles[i + 1], 0);
  return static_cast<int>(std::lround(total / (2.0 * M_PI)));
}

bool orbit_stays_in_strip(const SystemModel& model, const Controls& controls,
                          const Eigen::Vector2d& x, double period,
                          const IntegratorConfig& config) {
  std::vector<EventSpec> events;
  events.push_back({[](const Eigen::VectorXd& s, double) { return s[0]; },
                    EventSpec::Direction::Decreasing, true, "q=0"});
  events.push_back({[](const Eigen::VectorXd& s, double) { return s[0] - M_PI; },
                    EventSpec::Direction::Increasing, true, "q=pi"});
  if (x[0] <= 0.0 || x[0] >= M_PI) return false;
  IntegrationResult run = integrate(model, controls, x, 0.0, period, events, config);
  return !run.terminal_event.has_value();
}

}  // namespace

PeriodicOrbit find_periodic(const SystemModel& model, const Controls& controls,
                            const PeriodicSearchConfig& search, const IntegratorConfig& config) {
  if (model.kind != SystemKind::Friction || !(model.nu > 0))
    fail(Errc::BadParameter, "find_periodic requires the friction system with nu > 0");
  if (!controls.u.declared_period)
    fail(Errc::BadParameter, "find_periodic requires a declared period on the control law");
  if (!controls.u.declared_bound)
    fail(Errc::BadParameter, "find_periodic requires a declared bound on the control law");
  if (search.seeds < 1) fail(Errc::BadParameter, "find_periodic needs at least one seed");

  const double T = *controls.u.declared_period;
  const double U = *controls.u.declared_bound;
  // |pdot| >= nu*rho - (U+1) > 0 on the strip edges p = +-rho, with margin
  const double rho = 1.5 * (U + 1.0) / model.nu;
  const PeriodMap map(model, controls, T, config);

  std::mt19937_64 rng(search.rng_seed);
  std::uniform_real_distribution<double> uq(0.0, M_PI), up(-rho, rho);
  std::vector<Eigen::Vector2d> starts;
  starts.reserve(static_cast<std::size_t>(search.seeds));
  for (int i = 0; i < search.seeds; ++i) {
    const double q = uq(rng);
    starts.push_back(Eigen::Vector2d(q, up(rng)));
  }

  double best_residual = std::numeric_limits<double>::infinity();
  auto hunt = [&](const std::vector<Eigen::Vector2d>& seeds) -> std::optional<Eigen::Vector2d> {
    std::vector<std::optional<Eigen::Vector2d>> roots(seeds.size());
    std::vector<double> residuals(seeds.size(), std::numeric_limits<double>::infinity());
    parallel_for(seeds.size(), search.threads, [&](std::size_t i) {
      roots[i] = newton_from(map, seeds[i], rho, search.residual_tol, &residuals[i]);
    });
    for (double r : residuals) best_residual = std::min(best_residual, r);
    for (std::size_t i = 0; i < roots.size(); ++i) {
      if (!roots[i]) continue;
      if (orbit_stays_in_strip(model, controls, *roots[i], T, config)) return roots[i];
      // RootEscapesStrip: reject and keep searching
    }
    return std::nullopt;
  };

  std::optional<Eigen::Vector2d> root = hunt(starts);
  if (!root) {
    // deterministic coarse sweep of the displacement over W0: Newton restarts
    // from the nodes with the smallest displacement
    const int n = 17;
    std::vector<std::pair<double, Eigen::Vector2d>> nodes;
    nodes.reserve(n * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const Eigen::Vector2d x(M_PI * (i + 0.5) / n, -rho + 2.0 * rho * j / (n - 1));
        try {
          nodes.emplace_back(map.displacement(x).norm(), x);
        } catch (const Error&) {
        }
      }
    std::sort(nodes.begin(), nodes.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Eigen::Vector2d> retry;
    for (std::size_t i = 0; i < nodes.size() && retry.size() < 8; ++i)
      retry.push_back(nodes[i].second);
    root = hunt(retry);
  }
  if (!root)
    throw Error(Errc::NoRootFound,
                "no fixed point of the period map found in the strip (best residual " +
                    std::to_string(best_residual) + ")");

  PeriodicOrbit orbit;
  orbit.state_star = *root;
  orbit.period = T;
  orbit.residual = map.displacement(*root).norm();
  orbit.rho = rho;
  const Eigen::Matrix2d M = map.monodromy(*root);
  const auto spectrum = eigenvalues(M);
  orbit.multipliers = {spectrum[0], spectrum[1]};
  orbit.index = winding_number(map, *root, search.index_box);
  return orbit;
}

// ---------------------------------------------------------------------------
// Basin sweeps

double BasinGrid::node_x(int ix) const {
  return axis_x.lo + (axis_x.hi - axis_x.lo) * ix / (axis_x.count - 1);
}
double BasinGrid::node_y(int iy) const {
  return axis_y.lo + (axis_y.hi - axis_y.lo) * iy / (axis_y.count - 1);
}

BasinGrid sweep_basin(const SystemModel& model, const Controls& controls, const AxisSpec& axis_x,
                      const AxisSpec& axis_y, const Eigen::VectorXd& base_state, double t0,
                      double horizon, const CaptureRegion& capture, const IntegratorConfig& config,
                      int threads) {
  const int dim = state_dim(model.kind);
  for (const AxisSpec* ax : {&axis_x, &axis_y}) {
    if (ax->count < 2) fail(Errc::BadParameter, "axis needs at least 2 nodes");
    if (!(ax->lo < ax->hi)) fail(Errc::BadParameter, "axis needs lo < hi");
    if (ax->state_index < 0 || ax->state_index >= dim)
      fail(Errc::BadParameter, "axis state index out of range");
  }
  if (axis_x.state_index == axis_y.state_index)
    fail(Errc::BadParameter, "sweep axes must address distinct state components");
  if (base_state.size() != dim) fail(Errc::BadParameter, "base state dimension mismatch");

  const double region_hi = model.kind == SystemKind::Sphere
                               ? std::numeric_limits<double>::infinity()
                               : M_PI;
  auto check_region_coord = [&](double v) {
    if (v < 0.0 || v > region_hi)
      throw Error(Errc::PreconditionViolated, "grid extends outside the closure of the region");
  };
  if (axis_x.state_index == 0) {
    check_region_coord(axis_x.lo);
    check_region_coord(axis_x.hi);
  } else if (axis_y.state_index == 0) {
    check_region_coord(axis_y.lo);
    check_region_coord(axis_y.hi);
  } else {
    check_region_coord(base_state[0]);
  }

  BasinGrid grid;
  grid.axis_x = axis_x;
  grid.axis_y = axis_y;
  grid.base_state = base_state;
  grid.t0 = t0;
  grid.horizon = horizon;
  const std::size_t cells = static_cast<std::size_t>(axis_x.count) * axis_y.count;
  grid.tags.assign(cells, FateTag::Inconclusive);
  grid.t_events.assign(cells, t0);
  grid.proxies.assign(cells, 0.0);

  parallel_for(cells, threads, [&](std::size_t cell) {
    const int ix = static_cast<int>(cell % axis_x.count);
    const int iy = static_cast<int>(cell / axis_x.count);
    Eigen::VectorXd state = base_state;
    state[axis_x.state_index] = grid.node_x(ix);
    state[axis_y.state_index] = grid.node_y(iy);
    try {
      const Fate fate = classify(model, controls, state, t0, horizon, capture, config);
      grid.tags[cell] = fate.tag;
      grid.t_events[cell] = fate.t_event;
      grid.proxies[cell] = fate.exit_time_proxy;
    } catch (const Error&) {
      grid.tags[cell] = FateTag::Inconclusive;
    }
  });
  return grid;
}

}  // namespace pendwit
