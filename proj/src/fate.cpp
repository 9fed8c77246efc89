#include "pendwit/fate.hpp"

#include <cmath>
#include <string>

namespace pendwit {

std::string_view fate_name(FateTag tag) {
  switch (tag) {
    case FateTag::ExitLeft: return "ExitLeft";
    case FateTag::ExitRight: return "ExitRight";
    case FateTag::ExitBoundary: return "ExitBoundary";
    case FateTag::Captured: return "Captured";
    case FateTag::Survived: return "Survived";
    case FateTag::Singular: return "Singular";
    case FateTag::Inconclusive: return "Inconclusive";
  }
  return "?";
}

std::optional<FateTag> fate_from_name(std::string_view name) {
  for (FateTag t : {FateTag::ExitLeft, FateTag::ExitRight, FateTag::ExitBoundary,
                    FateTag::Captured, FateTag::Survived, FateTag::Singular,
                    FateTag::Inconclusive})
    if (fate_name(t) == name) return t;
  return std::nullopt;
}

CaptureRegion CaptureRegion::ball_region(LyapunovRegion region) {
  CaptureRegion c;
  c.kind = Kind::Ball;
  c.ball = std::move(region);
  return c;
}

CaptureRegion CaptureRegion::cylinder(const Eigen::Matrix2d& form, const Eigen::Vector2d& center,
                                      double eps) {
  if (eps <= 0) fail(Errc::BadParameter, "cylinder capture level must be > 0");
  QuadraticForm check{Eigen::MatrixXd(form)};  // validates symmetry + definiteness
  CaptureRegion c;
  c.kind = Kind::Cylinder;
  c.cylinder_form = check.matrix();
  c.cylinder_center = center;
  c.cylinder_eps = eps;
  return c;
}

double CaptureRegion::level(const Eigen::VectorXd& state) const {
  switch (kind) {
    case Kind::None: fail(Errc::PreconditionViolated, "no capture region configured");
    case Kind::Ball: return ball->value(state);
    case Kind::Cylinder: {
      const Eigen::Vector2d d = state.head<2>() - cylinder_center;
      return d.dot(cylinder_form * d);
    }
  }
  return 0;
}

double CaptureRegion::threshold() const {
  switch (kind) {
    case Kind::None: fail(Errc::PreconditionViolated, "no capture region configured");
    case Kind::Ball: return ball->eps;
    case Kind::Cylinder: return cylinder_eps;
  }
  return 0;
}

double tangency_probe(const SystemModel& model, const Controls& controls,
                      const Eigen::VectorXd& boundary_point, double t) {
  return eval_rhs(model, boundary_point, t, controls)[1];
}

namespace {

bool is_sphere(const SystemModel& m) { return m.kind == SystemKind::Sphere; }

void check_torque_admissibility(const SystemModel& model, double t) {
  if (model.kind != SystemKind::Torque) return;
  Eigen::VectorXd at_zero(2), at_pi(2);
  at_zero << 0.0, 0.0;
  at_pi << M_PI, 0.0;
  const double w0 = eval_law(*model.torque, make_env(SystemKind::Torque, at_zero, t));
  if (!(w0 < 1.0))
    throw Error(Errc::TorqueInadmissible,
                "torque law violates w(0,0,t) < 1 at t = " + std::to_string(t) +
                    " (w = " + std::to_string(w0) + ")");
  const double wpi = eval_law(*model.torque, make_env(SystemKind::Torque, at_pi, t));
  if (!(wpi > -1.0))
    throw Error(Errc::TorqueInadmissible,
                "torque law violates w(pi,0,t) > -1 at t = " + std::to_string(t) +
                    " (w = " + std::to_string(wpi) + ")");
}

Fate make_fate(FateTag tag, double t_event, Eigen::VectorXd state, double t0,
               std::string detail = {}) {
  Fate f;
  f.tag = tag;
  f.t_event = t_event;
  f.state_event = std::move(state);
  f.exit_time_proxy = t_event - t0;
  f.detail = std::move(detail);
  return f;
}

// Fate of a point sitting on the region boundary at time t, or nullopt when
// the motion is strictly inward and classification should continue.
std::optional<Fate> boundary_fate(const SystemModel& model, const Controls& controls,
                                  const Eigen::VectorXd& state, double t, double t0) {
  const double pos = state[0];
  const double vel = state[1];
  if (!is_sphere(model)) {
    if (pos == 0.0) {
      if (vel < -kTangencyTol) return make_fate(FateTag::ExitLeft, t, state, t0);
      if (std::fabs(vel) <= kTangencyTol) {
        Eigen::VectorXd touch = state;
        touch[0] = 0.0;
        touch[1] = 0.0;
        if (tangency_probe(model, controls, touch, t) < 0)
          return make_fate(FateTag::ExitLeft, t, state, t0);
      }
      return std::nullopt;  // moving inward
    }
    if (pos == M_PI) {
      if (vel > kTangencyTol) return make_fate(FateTag::ExitRight, t, state, t0);
      if (std::fabs(vel) <= kTangencyTol) {
        Eigen::VectorXd touch = state;
        touch[1] = 0.0;
        if (tangency_probe(model, controls, touch, t) > 0)
          return make_fate(FateTag::ExitRight, t, state, t0);
      }
      return std::nullopt;
    }
    return std::nullopt;
  }
  if (pos == 0.0) {
    if (vel < -kTangencyTol) return make_fate(FateTag::ExitBoundary, t, state, t0);
    if (std::fabs(vel) <= kTangencyTol) {
      Eigen::VectorXd touch = state;
      touch[1] = 0.0;
      if (tangency_probe(model, controls, touch, t) < 0)
        return make_fate(FateTag::ExitBoundary, t, state, t0);
    }
  }
  return std::nullopt;
}

// Resolves a terminal boundary event into an exit fate; Inconclusive when the
// recorded velocity points inward (a missed earlier event).
Fate resolve_boundary_hit(const SystemModel& model, const Controls& controls, const EventHit& hit,
                          FateTag exit_tag, double t0) {
  const double vel = hit.state[1];
  const bool lower = exit_tag != FateTag::ExitRight;  // q = 0 / phi = 0 boundaries
  const double outward = lower ? -vel : vel;
  if (outward > kTangencyTol) return make_fate(exit_tag, hit.t, hit.state, t0);
  if (outward >= -kTangencyTol) {
    Eigen::VectorXd touch = hit.state;
    touch[0] = lower ? 0.0 : M_PI;
    touch[1] = 0.0;
    const double accel = tangency_probe(model, controls, touch, hit.t);
    if ((lower && accel < 0) || (!lower && accel > 0))
      return make_fate(exit_tag, hit.t, hit.state, t0);
    return make_fate(FateTag::Inconclusive, hit.t, hit.state, t0,
                     "boundary tangency with inward normal acceleration");
  }
  return make_fate(FateTag::Inconclusive, hit.t, hit.state, t0,
                   "boundary hit with inward velocity: an earlier event was missed");
}

}  // namespace

ClassifyResult classify_full(const SystemModel& model, const Controls& controls,
                             const Eigen::VectorXd& state0, double t0, double horizon,
                             const CaptureRegion& capture, const IntegratorConfig& config) {
  if (!(horizon > 0)) fail(Errc::BadParameter, "classify requires horizon > 0");
  const int dim = state_dim(model.kind);
  if (state0.size() != dim) fail(Errc::BadParameter, "classify: state dimension mismatch");
  if (capture.kind == CaptureRegion::Kind::Cylinder && model.kind != SystemKind::Cart)
    fail(Errc::BadParameter, "cylinder capture regions apply to the cart system only");

  ClassifyResult out;
  const double pos0 = state0[0];
  const double upper = is_sphere(model) ? std::numeric_limits<double>::infinity() : M_PI;
  if (pos0 < 0.0 || pos0 > upper)
    throw Error(Errc::PreconditionViolated,
                "initial state outside the closure of the admissible region");

  check_torque_admissibility(model, t0);

  if (capture.active() && capture.level(state0) <= capture.threshold()) {
    out.fate = make_fate(FateTag::Captured, t0, state0, t0);
    return out;
  }
  if (auto immediate = boundary_fate(model, controls, state0, t0, t0)) {
    out.fate = std::move(*immediate);
    return out;
  }

  std::vector<EventSpec> events;
  if (!is_sphere(model)) {
    events.push_back({[](const Eigen::VectorXd& s, double) { return s[0]; },
                      EventSpec::Direction::Decreasing, true, "q=0"});
    events.push_back({[](const Eigen::VectorXd& s, double) { return s[0] - M_PI; },
                      EventSpec::Direction::Increasing, true, "q=pi"});
  } else {
    events.push_back({[](const Eigen::VectorXd& s, double) { return s[0]; },
                      EventSpec::Direction::Decreasing, true, "phi=0"});
    // the chart edge is a hard stop; a fast crossing could otherwise step
    // over the thin singular window without an evaluation inside it
    const double phi_max = M_PI / 2 - 10.0 * kSphereSingularCos;
    events.push_back({[phi_max](const Eigen::VectorXd& s, double) { return phi_max - s[0]; },
                      EventSpec::Direction::Decreasing, true, "chart"});
    if (state0[0] >= phi_max)
      throw Error(Errc::Singular, "initial inclination is at the chart edge");
  }
  if (capture.active()) {
    const CaptureRegion* cap = &capture;
    events.push_back({[cap](const Eigen::VectorXd& s, double) {
                        return cap->level(s) - cap->threshold();
                      },
                      EventSpec::Direction::Decreasing, true, "capture"});
  }

  IntegrationResult run;
  try {
    run = integrate(model, controls, state0, t0, t0 + horizon, events, config);
  } catch (const IntegrationError& e) {
    out.fate = make_fate(FateTag::Inconclusive, e.t(), e.state(), t0, e.what());
    return out;
  } catch (const Error& e) {
    if (e.code() == Errc::Singular) {
      out.fate = make_fate(FateTag::Singular, t0, state0, t0, e.what());
      return out;
    }
    throw;
  }
  out.trajectory = std::move(run.trajectory);

  if (!run.terminal_event) {
    Fate f;
    f.tag = FateTag::Survived;
    f.t_event = t0 + horizon;
    f.state_event = out.trajectory.step_count() > 0
                        ? out.trajectory.node_state(out.trajectory.step_count())
                        : state0;
    f.exit_time_proxy = horizon;
    out.fate = std::move(f);
    return out;
  }

  const EventHit& hit = *run.terminal_event;
  if (hit.name == "chart") {
    out.fate = make_fate(FateTag::Singular, hit.t, hit.state, t0,
                         "inclination reached the chart edge at phi = pi/2");
    return out;
  }
  if (hit.name == "capture") {
    const double level = capture.level(hit.state);
    if (level <= capture.threshold() * (1.0 + 1e-9)) {
      out.fate = make_fate(FateTag::Captured, hit.t, hit.state, t0);
    } else {
      out.fate = make_fate(FateTag::Inconclusive, hit.t, hit.state, t0,
                           "capture event localized outside the level set");
    }
    return out;
  }
  check_torque_admissibility(model, hit.t);
  if (hit.name == "q=0")
    out.fate = resolve_boundary_hit(model, controls, hit, FateTag::ExitLeft, t0);
  else if (hit.name == "q=pi")
    out.fate = resolve_boundary_hit(model, controls, hit, FateTag::ExitRight, t0);
  else
    out.fate = resolve_boundary_hit(model, controls, hit, FateTag::ExitBoundary, t0);
  return out;
}

Fate classify(const SystemModel& model, const Controls& controls, const Eigen::VectorXd& state0,
              double t0, double horizon, const CaptureRegion& capture,
              const IntegratorConfig& config) {
  return classify_full(model, controls, state0, t0, horizon, capture, config).fate;
}

}  // namespace pendwit
