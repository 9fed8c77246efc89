#pragma once

// The pendulum-family vector fields, their conserved-quantity oracles, and
// finite-difference linearization of the closed loop.
//
// State layouts (Eigen vectors):
//   Simple/Torque/Friction:  [q, p]
//   Sphere:                  [phi, dphi, theta, dtheta]
//   Cart:                    [q, p, x, y]
// Mass, rod length and gravity are normalized to 1 throughout; q = 0 and
// q = pi are the horizontal rod positions, q = pi/2 is vertical upward.

#include <Eigen/Dense>

#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "pendwit/control.hpp"

namespace pendwit {

enum class SystemKind { Simple, Torque, Friction, Sphere, Cart };

// Verbatim integrates the azimuth equation with a single dtheta*dphi coupling
// term (conserves dtheta*cos(phi) with controls off); Standard uses the
// Lagrangian-consistent coefficient 2 (conserves dtheta*cos(phi)^2).
enum class SphereVariant { Verbatim, Standard };

std::string_view kind_name(SystemKind k);
int state_dim(SystemKind k);

// Named views of the state layouts.
struct PendulumState {
  double q = 0;  // angle, rad; 0 and pi are horizontal, pi/2 is vertical up
  double p = 0;  // angular velocity, rad/s

  Eigen::Vector2d vec() const { return {q, p}; }
  static PendulumState from(const Eigen::VectorXd& v) { return {v[0], v[1]}; }
};

struct CartState {
  double q = 0, p = 0;
  double x = 0;  // pivot position on the line
  double y = 0;  // pivot velocity

  Eigen::Vector4d vec() const { return {q, p, x, y}; }
  static CartState from(const Eigen::VectorXd& v) { return {v[0], v[1], v[2], v[3]}; }
};

struct SphereState {
  double phi = 0;  // inclination above the horizontal plane, rad
  double dphi = 0;
  double theta = 0;  // azimuth, rad
  double dtheta = 0;

  Eigen::Vector4d vec() const { return {phi, dphi, theta, dtheta}; }
  static SphereState from(const Eigen::VectorXd& v) { return {v[0], v[1], v[2], v[3]}; }
};

// Chart guard for the spherical pendulum: |cos(phi)| below this raises
// SingularConfiguration instead of being regularized.
inline constexpr double kSphereSingularCos = 1e-6;

// Residual tolerance for the equilibrium precondition of linearize.
inline constexpr double kEquilibriumTol = 1e-9;

struct SystemModel {
  SystemKind kind = SystemKind::Simple;
  double nu = 0.0;                   // viscous friction, Friction kind
  double cart_mass = 1.0;            // m > 0, Cart kind
  std::optional<ControlLaw> torque;  // w(q, p, t), Torque kind
  SphereVariant sphere_variant = SphereVariant::Verbatim;

  static SystemModel simple();
  static SystemModel torque_augmented(ControlLaw w);
  static SystemModel friction(double nu);
  static SystemModel sphere(SphereVariant variant = SphereVariant::Verbatim);
  static SystemModel cart(double mass);
};

// Control inputs for a run: u everywhere; v is the second pivot acceleration
// of the spherical pendulum and is ignored by the other kinds.
struct Controls {
  ControlLaw u;
  ControlLaw v;

  Controls() : u(builtins::zero()), v(builtins::zero()) {}
  explicit Controls(ControlLaw u_) : u(std::move(u_)), v(builtins::zero()) {}
  Controls(ControlLaw u_, ControlLaw v_) : u(std::move(u_)), v(std::move(v_)) {}
};

// Rejects expression variables that are not part of the kind's state (plus t).
// This is the bind-time check: parsing accepts any known variable name.
void check_variables(const Expr& e, SystemKind kind);
void check_controls(const SystemModel& model, const Controls& controls);

Env make_env(SystemKind kind, const Eigen::VectorXd& state, double t);

Eigen::VectorXd eval_rhs(const SystemModel& model, const Eigen::VectorXd& state, double t,
                         const Controls& controls);

// Closed-form invariants that hold with the controls switched off, used as
// integration oracles: E for Simple, J for Cart, L for the sphere (variant
// dependent). Empty for Friction and Torque.
std::vector<std::pair<std::string, double>> conserved_quantities(const SystemModel& model,
                                                                 const Eigen::VectorXd& state);

// Central finite-difference Jacobian of the closed loop at an equilibrium of
// the flow at time t. Raises NotAnEquilibrium when ||rhs|| >= kEquilibriumTol.
Eigen::MatrixXd linearize(const SystemModel& model, const Controls& controls,
                          const Eigen::VectorXd& point, double t, double h = 1e-5);

}  // namespace pendwit
