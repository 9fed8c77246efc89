#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "oracles.hpp"
#include "pendwit/integrate.hpp"

using namespace pendwit;

namespace {

const VectorField harmonic = [](const Eigen::VectorXd& y, double) {
  Eigen::VectorXd d(2);
  d << y[1], -y[0];
  return d;
};

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

IntegratorConfig tol_config(double tol) {
  IntegratorConfig cfg;
  cfg.rtol = tol;
  cfg.atol = tol;
  cfg.hmax = 1.0;  // tolerance-limited steps for the order checks
  return cfg;
}

double harmonic_endpoint_error(double tol) {
  IntegrationResult run = integrate_field(harmonic, vec2(1.0, 0.0), 0.0, 2.0 * M_PI, {},
                                          tol_config(tol));
  const Eigen::VectorXd yend = run.trajectory.node_state(run.trajectory.step_count());
  return (yend - vec2(1.0, 0.0)).norm();
}

}  // namespace

TEST_CASE("harmonic oscillator returns to the start") {
  IntegratorConfig cfg;
  IntegrationResult run = integrate_field(harmonic, vec2(1.0, 0.0), 0.0, 2.0 * M_PI, {}, cfg);
  const Eigen::VectorXd yend = run.trajectory.node_state(run.trajectory.step_count());
  CHECK((yend - vec2(1.0, 0.0)).norm() < 1e-8);
  CHECK_FALSE(run.terminal_event.has_value());
}

TEST_CASE("tolerance sweep is monotone and accurate at the bottom") {
  const double e6 = harmonic_endpoint_error(1e-6);
  const double e8 = harmonic_endpoint_error(1e-8);
  const double e10 = harmonic_endpoint_error(1e-10);
  CHECK(e6 > e8);
  CHECK(e8 > e10);
  CHECK(e10 <= 1e-8);
}

TEST_CASE("dense output") {
  IntegrationResult run =
      integrate_field(harmonic, vec2(1.0, 0.0), 0.0, 2.0 * M_PI, {}, tol_config(1e-10));
  const DenseTrajectory& traj = run.trajectory;

  SUBCASE("node samples are bit-exact") {
    for (std::size_t i : {std::size_t(0), traj.step_count() / 2, traj.step_count()}) {
      const double t = traj.node_time(i);
      const Eigen::VectorXd direct = traj.node_state(i);
      const Eigen::VectorXd sampled = traj.sample_one(t);
      CHECK(std::memcmp(direct.data(), sampled.data(), sizeof(double) * 2) == 0);
    }
  }
  SUBCASE("closed form at an interior time") {
    const Eigen::VectorXd y = traj.sample_one(M_PI / 2);
    CHECK(std::fabs(y[0] - 0.0) < 1e-7);
    CHECK(std::fabs(y[1] - (-1.0)) < 1e-7);
  }
  SUBCASE("sampling preserves input order") {
    const double ts[] = {3.0, 1.0, 2.0};
    auto states = traj.sample(ts);
    REQUIRE(states.size() == 3);
    CHECK(states[0][0] == doctest::Approx(std::cos(3.0)).epsilon(1e-7));
    CHECK(states[1][0] == doctest::Approx(std::cos(1.0)).epsilon(1e-7));
    CHECK(states[2][0] == doctest::Approx(std::cos(2.0)).epsilon(1e-7));
  }
  SUBCASE("out of span raises") {
    try {
      traj.sample_one(7.0);
      FAIL("expected OutOfSpan");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::OutOfSpan);
    }
    CHECK_THROWS_AS(traj.sample_one(-0.1), Error);
  }
}

TEST_CASE("integration is bit-deterministic") {
  auto run_once = [] {
    return integrate_field(harmonic, vec2(1.0, 0.0), 0.0, 10.0, {}, tol_config(1e-10));
  };
  IntegrationResult a = run_once();
  IntegrationResult b = run_once();
  REQUIRE(a.trajectory.step_count() == b.trajectory.step_count());
  for (std::size_t i = 0; i <= a.trajectory.step_count(); ++i) {
    CHECK(a.trajectory.node_time(i) == b.trajectory.node_time(i));
    const Eigen::VectorXd ya = a.trajectory.node_state(i);
    const Eigen::VectorXd yb = b.trajectory.node_state(i);
    CHECK(std::memcmp(ya.data(), yb.data(), sizeof(double) * 2) == 0);
  }
}

TEST_CASE("event time matches the quadrature oracle") {
  // uncontrolled pendulum launched rightward from the vertical at energy 3
  SystemModel m = SystemModel::simple();
  Controls off;
  std::vector<EventSpec> events;
  events.push_back({[](const Eigen::VectorXd& s, double) { return s[0] - M_PI; },
                    EventSpec::Direction::Increasing, true, "q=pi"});
  IntegrationResult run =
      integrate(m, off, vec2(M_PI / 2, 2.0), 0.0, 10.0, events, tol_config(1e-12));
  REQUIRE(run.terminal_event.has_value());
  const double expected = oracles::pendulum_travel_time(M_PI / 2, M_PI, 3.0);
  CHECK(std::fabs(run.terminal_event->t - expected) < 1e-8);
  CHECK(std::fabs(run.terminal_event->state[0] - M_PI) < 1e-9);
}

TEST_CASE("event consistency and direction filters") {
  // guard p on the harmonic circle: p = -sin(t), so p crosses zero at pi, 2pi...
  std::vector<EventSpec> events;
  events.push_back({[](const Eigen::VectorXd& s, double) { return s[1]; },
                    EventSpec::Direction::Increasing, false, "p rising"});
  IntegrationResult run =
      integrate_field(harmonic, vec2(1.0, 0.0), 0.0, 4.0 * M_PI - 0.1, events, tol_config(1e-10));
  // p = -sin t rises through zero only at t = pi and t = 3pi on this window
  REQUIRE(run.events.size() == 2);
  CHECK(std::fabs(run.events[0].t - M_PI) < 1e-9);
  CHECK(std::fabs(run.events[1].t - 3.0 * M_PI) < 1e-9);
  for (const EventHit& hit : run.events) CHECK(std::fabs(hit.state[1]) < 1e-9);
}

TEST_CASE("terminal event truncates the sampling span") {
  std::vector<EventSpec> events;
  events.push_back({[](const Eigen::VectorXd& s, double) { return s[0]; },
                    EventSpec::Direction::Decreasing, true, "x=0"});
  IntegrationResult run =
      integrate_field(harmonic, vec2(1.0, 0.0), 0.0, 10.0, events, tol_config(1e-10));
  REQUIRE(run.terminal_event.has_value());
  CHECK(std::fabs(run.terminal_event->t - M_PI / 2) < 1e-9);
  CHECK(run.trajectory.t_end() == run.terminal_event->t);
  CHECK_NOTHROW(run.trajectory.sample_one(run.terminal_event->t));
  CHECK_THROWS_AS(run.trajectory.sample_one(run.terminal_event->t + 0.5), Error);
}

TEST_CASE("step budget exhaustion carries the blame state") {
  IntegratorConfig cfg = tol_config(1e-10);
  cfg.max_steps = 10;
  try {
    integrate_field(harmonic, vec2(1.0, 0.0), 0.0, 100.0, {}, cfg);
    FAIL("expected StepBudgetExceeded");
  } catch (const IntegrationError& e) {
    CHECK(e.code() == Errc::StepBudgetExceeded);
    CHECK(e.state().size() == 2);
    CHECK(e.t() < 100.0);
  }
}

TEST_CASE("config validation") {
  IntegratorConfig cfg;
  cfg.rtol = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.max_steps = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("a guard already past its zero does not fire") {
  // q starts at 0 moving inward; the decreasing guard must not trigger at t0
  SystemModel m = SystemModel::simple();
  Controls off;
  std::vector<EventSpec> events;
  events.push_back({[](const Eigen::VectorXd& s, double) { return s[0]; },
                    EventSpec::Direction::Decreasing, true, "q=0"});
  // energy 2.2 > 1 so the launch climbs over the top and never returns
  IntegrationResult run =
      integrate(m, off, vec2(0.0, std::sqrt(2.0 * 2.2)), 0.0, 3.0, events, tol_config(1e-10));
  CHECK_FALSE(run.terminal_event.has_value());

  // with a weak launch the pendulum falls back and the same guard must fire
  run = integrate(m, off, vec2(0.0, 0.5), 0.0, 3.0, events, tol_config(1e-10));
  REQUIRE(run.terminal_event.has_value());
  CHECK(run.terminal_event->state[1] < 0.0);
}
