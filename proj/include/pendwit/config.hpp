#pragma once

// Scenario configuration: a single JSON document naming the system, the
// control law(s), integrator overrides and one block per command. Unknown
// keys anywhere are rejected before any computation starts.

#include <optional>
#include <string>

#include "pendwit/finders.hpp"
#include "pendwit/jsonio.hpp"

namespace pendwit {

struct CaptureSpec {
  enum class Kind { None, AutoBall, Ball, Cylinder };
  Kind kind = Kind::None;
  Eigen::VectorXd mu;        // AutoBall, Ball
  double t0 = 0;             // AutoBall
  int n_samples = 2000;      // AutoBall
  Eigen::MatrixXd form;      // Ball (state dim), Cylinder (2 x 2)
  double eps = 0;            // Ball, Cylinder
  Eigen::Vector2d center{0, 0};  // Cylinder
};

struct SimulateSpec {
  Eigen::VectorXd state0;
  double t0 = 0;
  double t_end = 0;
  double sample_step = 0.01;
};

struct ClassifySpec {
  Eigen::VectorXd state0;
  double t0 = 0;
  double horizon = 30.0;
};

struct SurvivorSpec {
  std::vector<Eigen::VectorXd> path;
  double t0 = 0;
  double horizon = 30.0;
  double tol_s = 1e-10;
  double sample_step = 0.01;
};

struct PeriodicSpec {
  int seeds = 16;
  double residual_tol = 1e-10;
  double index_box = 1e-3;
  double sample_step = 0.0;  // <= 0: period / 256
};

struct LyapunovSpec {
  Eigen::VectorXd mu;
  double t0 = 0;
  int n_samples = 2000;
};

struct SweepSpec {
  AxisSpec axis_x, axis_y;
  Eigen::VectorXd base_state;
  double t0 = 0;
  double horizon = 20.0;
};

struct ScenarioConfig {
  SystemModel model;
  Controls controls;
  IntegratorConfig integrator;
  std::uint64_t seed = 0;
  int threads = 0;
  CaptureSpec capture;

  std::optional<SimulateSpec> simulate;
  std::optional<ClassifySpec> classify;
  std::optional<SurvivorSpec> survivor;
  std::optional<PeriodicSpec> periodic;
  std::optional<LyapunovSpec> lyapunov;
  std::optional<SweepSpec> sweep;
};

// Parses and validates a config document; throws Error with code Config (or
// the expression-language codes for controller text) on any violation.
ScenarioConfig load_scenario_text(const std::string& json_text);
ScenarioConfig load_scenario_file(const std::string& path);

// Materializes the capture region named by the spec (AutoBall runs
// build_region and so may raise NotHurwitz / VerificationFailed).
CaptureRegion build_capture(const ScenarioConfig& config);

// The fully resolved document: defaults filled in, controllers rendered as
// canonical expression text. Re-running it reproduces identical artifacts.
Json resolved_config_json(const ScenarioConfig& config, const std::string& command);

}  // namespace pendwit
