#pragma once

// First-exit classification from the admissible region with an optional
// capture region removed. Planar kinds and the cart use M = {0 < q < pi};
// the sphere uses M = {phi > 0}. Exit sets are {q = 0, p <= 0},
// {q = pi, p >= 0} and {phi = 0, dphi <= 0}; boundary hits with zero normal
// velocity are resolved by the sign of the normal acceleration (external
// tangency counts as an exit).

#include <optional>
#include <string_view>

#include "pendwit/integrate.hpp"
#include "pendwit/lyapunov.hpp"

namespace pendwit {

enum class FateTag { ExitLeft, ExitRight, ExitBoundary, Captured, Survived, Singular, Inconclusive };

std::string_view fate_name(FateTag tag);
std::optional<FateTag> fate_from_name(std::string_view name);

// Boundary-hit velocities below this are treated as zero and routed through
// the tangency rule.
inline constexpr double kTangencyTol = 1e-9;

struct CaptureRegion {
  enum class Kind { None, Ball, Cylinder };

  Kind kind = Kind::None;
  std::optional<LyapunovRegion> ball;   // Kind::Ball
  Eigen::Matrix2d cylinder_form;        // Kind::Cylinder, quadratic form on (q, p); Cart only
  Eigen::Vector2d cylinder_center;
  double cylinder_eps = 0;

  static CaptureRegion none() { return {}; }
  static CaptureRegion ball_region(LyapunovRegion region);
  static CaptureRegion cylinder(const Eigen::Matrix2d& form, const Eigen::Vector2d& center,
                                double eps);

  bool active() const { return kind != Kind::None; }
  double level(const Eigen::VectorXd& state) const;  // V(state)
  double threshold() const;                          // eps
};

struct Fate {
  FateTag tag = FateTag::Inconclusive;
  double t_event = 0;
  Eigen::VectorXd state_event;
  double exit_time_proxy = 0;  // time spent in M \ B; equals horizon for Survived
  std::string detail;          // diagnostic for Singular/Inconclusive
};

struct ClassifyResult {
  Fate fate;
  DenseTrajectory trajectory;
};

// Integrates from state0 until the first terminal exit/capture event or the
// horizon. Budget and singularity failures come back as Inconclusive/Singular
// fates, never as exit classes.
Fate classify(const SystemModel& model, const Controls& controls, const Eigen::VectorXd& state0,
              double t0, double horizon, const CaptureRegion& capture,
              const IntegratorConfig& config);
ClassifyResult classify_full(const SystemModel& model, const Controls& controls,
                             const Eigen::VectorXd& state0, double t0, double horizon,
                             const CaptureRegion& capture, const IntegratorConfig& config);

// Normal acceleration of the closed loop at a boundary point with zero normal
// velocity: qdd for the planar kinds and the cart, phidd for the sphere.
// Negative at the lower boundary (or positive at q = pi) confirms that the
// touching trajectory leaves the region.
double tangency_probe(const SystemModel& model, const Controls& controls,
                      const Eigen::VectorXd& boundary_point, double t);

}  // namespace pendwit
