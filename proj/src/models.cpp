#include "pendwit/models.hpp"

#include <cmath>
#include <string>

namespace pendwit {

std::string_view kind_name(SystemKind k) {
  switch (k) {
    case SystemKind::Simple: return "simple";
    case SystemKind::Torque: return "torque";
    case SystemKind::Friction: return "friction";
    case SystemKind::Sphere: return "sphere";
    case SystemKind::Cart: return "cart";
  }
  return "?";
}

int state_dim(SystemKind k) {
  return (k == SystemKind::Sphere || k == SystemKind::Cart) ? 4 : 2;
}

SystemModel SystemModel::simple() { return SystemModel{}; }

SystemModel SystemModel::torque_augmented(ControlLaw w) {
  SystemModel m;
  m.kind = SystemKind::Torque;
  m.torque = std::move(w);
  return m;
}

SystemModel SystemModel::friction(double nu) {
  if (nu < 0) fail(Errc::BadParameter, "friction coefficient must be >= 0");
  SystemModel m;
  m.kind = SystemKind::Friction;
  m.nu = nu;
  return m;
}

SystemModel SystemModel::sphere(SphereVariant variant) {
  SystemModel m;
  m.kind = SystemKind::Sphere;
  m.sphere_variant = variant;
  return m;
}

SystemModel SystemModel::cart(double mass) {
  if (mass <= 0) fail(Errc::BadParameter, "cart mass must be > 0");
  SystemModel m;
  m.kind = SystemKind::Cart;
  m.cart_mass = mass;
  return m;
}

namespace {

std::uint16_t legal_mask(SystemKind kind) {
  auto bit = [](Var v) { return static_cast<std::uint16_t>(1u << static_cast<int>(v)); };
  std::uint16_t m = bit(Var::T);
  switch (kind) {
    case SystemKind::Simple:
    case SystemKind::Torque:
    case SystemKind::Friction:
      m |= bit(Var::Q) | bit(Var::P);
      break;
    case SystemKind::Cart:
      m |= bit(Var::Q) | bit(Var::P) | bit(Var::X) | bit(Var::Y);
      break;
    case SystemKind::Sphere:
      m |= bit(Var::Phi) | bit(Var::Dphi) | bit(Var::Theta) | bit(Var::Dtheta);
      break;
  }
  return m;
}

}  // namespace

void check_variables(const Expr& e, SystemKind kind) {
  std::uint16_t used = used_variables(e);
  std::uint16_t illegal = static_cast<std::uint16_t>(used & ~legal_mask(kind));
  if (illegal == 0) return;
  for (int i = 0; i < kVarCount; ++i)
    if ((illegal >> i) & 1u)
      throw Error(Errc::UnknownIdentifier,
                  "variable '" + std::string(var_name(static_cast<Var>(i))) +
                      "' is not available on the " + std::string(kind_name(kind)) + " system");
}

void check_controls(const SystemModel& model, const Controls& controls) {
  check_variables(*controls.u.expr, model.kind);
  if (model.kind == SystemKind::Sphere) check_variables(*controls.v.expr, model.kind);
  if (model.kind == SystemKind::Torque) {
    if (!model.torque) fail(Errc::BadParameter, "torque system without a torque law");
    check_variables(*model.torque->expr, SystemKind::Torque);
  }
}

Env make_env(SystemKind kind, const Eigen::VectorXd& state, double t) {
  Env env;
  env.set(Var::T, t);
  switch (kind) {
    case SystemKind::Simple:
    case SystemKind::Torque:
    case SystemKind::Friction:
      env.set(Var::Q, state[0]);
      env.set(Var::P, state[1]);
      break;
    case SystemKind::Cart:
      env.set(Var::Q, state[0]);
      env.set(Var::P, state[1]);
      env.set(Var::X, state[2]);
      env.set(Var::Y, state[3]);
      break;
    case SystemKind::Sphere:
      env.set(Var::Phi, state[0]);
      env.set(Var::Dphi, state[1]);
      env.set(Var::Theta, state[2]);
      env.set(Var::Dtheta, state[3]);
      break;
  }
  return env;
}

Eigen::VectorXd eval_rhs(const SystemModel& model, const Eigen::VectorXd& state, double t,
                         const Controls& controls) {
  const int dim = state_dim(model.kind);
  if (state.size() != dim)
    fail(Errc::BadParameter, "state dimension " + std::to_string(state.size()) +
                                 " does not match system '" + std::string(kind_name(model.kind)) +
                                 "' (expects " + std::to_string(dim) + ")");
  Env env = make_env(model.kind, state, t);
  Eigen::VectorXd d(dim);
  switch (model.kind) {
    case SystemKind::Simple: {
      const double q = state[0], p = state[1];
      d[0] = p;
      d[1] = eval_law(controls.u, env) * std::sin(q) - std::cos(q);
      return d;
    }
    case SystemKind::Torque: {
      const double q = state[0], p = state[1];
      d[0] = p;
      d[1] = eval_law(controls.u, env) * std::sin(q) - std::cos(q) + eval_law(*model.torque, env);
      return d;
    }
    case SystemKind::Friction: {
      const double q = state[0], p = state[1];
      d[0] = p;
      d[1] = eval_law(controls.u, env) * std::sin(q) - std::cos(q) - model.nu * p;
      return d;
    }
    case SystemKind::Sphere: {
      const double phi = state[0], dphi = state[1], theta = state[2], dtheta = state[3];
      const double c = std::cos(phi), s = std::sin(phi);
      if (std::fabs(c) < kSphereSingularCos)
        throw Error(Errc::Singular,
                    "spherical chart degenerates: |cos(phi)| < 1e-6 at phi = " +
                        std::to_string(phi));
      const double u = eval_law(controls.u, env);
      const double v = eval_law(controls.v, env);
      const double coupling = model.sphere_variant == SphereVariant::Verbatim ? 1.0 : 2.0;
      d[0] = dphi;
      d[1] = -c - u * s * std::cos(theta) - v * s * std::sin(theta) - dtheta * dtheta * c * s;
      d[2] = dtheta;
      d[3] = (coupling * dtheta * dphi * s * c - u * std::sin(theta) * c +
              v * c * std::cos(theta)) /
             (c * c);
      return d;
    }
    case SystemKind::Cart: {
      const double q = state[0], p = state[1], y = state[3];
      const double s = std::sin(q), c = std::cos(q);
      const double m = model.cart_mass;
      const double den = m + c * c;
      const double u = eval_law(controls.u, env);
      d[0] = p;
      d[1] = (u * s + p * p * s * c - (1.0 + m) * c) / den;
      d[2] = y;
      d[3] = (u + p * p * c - s * c) / den;
      return d;
    }
  }
  fail(Errc::BadParameter, "unknown system kind");
}

std::vector<std::pair<std::string, double>> conserved_quantities(const SystemModel& model,
                                                                 const Eigen::VectorXd& state) {
  switch (model.kind) {
    case SystemKind::Simple: {
      const double q = state[0], p = state[1];
      return {{"E", 0.5 * p * p + std::sin(q)}};
    }
    case SystemKind::Cart: {
      // total horizontal momentum of cart plus bob
      const double q = state[0], p = state[1], y = state[3];
      return {{"J", (model.cart_mass + 1.0) * y - p * std::sin(q)}};
    }
    case SystemKind::Sphere: {
      const double phi = state[0], dtheta = state[3];
      const double c = std::cos(phi);
      if (model.sphere_variant == SphereVariant::Verbatim) return {{"L", dtheta * c}};
      return {{"L", dtheta * c * c}};
    }
    case SystemKind::Friction:
    case SystemKind::Torque:
      return {};
  }
  return {};
}

Eigen::MatrixXd linearize(const SystemModel& model, const Controls& controls,
                          const Eigen::VectorXd& point, double t, double h) {
  if (h <= 0) fail(Errc::BadParameter, "linearize: step h must be > 0");
  const Eigen::VectorXd r0 = eval_rhs(model, point, t, controls);
  if (r0.norm() >= kEquilibriumTol)
    throw Error(Errc::NotAnEquilibrium,
                "closed-loop residual " + std::to_string(r0.norm()) +
                    " exceeds equilibrium tolerance at the linearization point");
  const int n = static_cast<int>(point.size());
  Eigen::MatrixXd A(n, n);
  Eigen::VectorXd probe = point;
  for (int j = 0; j < n; ++j) {
    probe[j] = point[j] + h;
    const Eigen::VectorXd fp = eval_rhs(model, probe, t, controls);
    probe[j] = point[j] - h;
    const Eigen::VectorXd fm = eval_rhs(model, probe, t, controls);
    probe[j] = point[j];
    A.col(j) = (fp - fm) / (2.0 * h);
  }
  return A;
}

}  // namespace pendwit
