#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "pendwit/fate.hpp"

using namespace pendwit;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

Eigen::VectorXd vec4(double a, double b, double c, double d) {
  Eigen::VectorXd v(4);
  v << a, b, c, d;
  return v;
}

const IntegratorConfig kCfg{};

Fate classify_simple(const Eigen::VectorXd& s0, double horizon = 30.0) {
  return classify(SystemModel::simple(), Controls{}, s0, 0.0, horizon, CaptureRegion::none(),
                  kCfg);
}

}  // namespace

TEST_CASE("horizontal rest exits immediately by external tangency") {
  Fate fate = classify_simple(vec2(0.0, 0.0));
  CHECK(fate.tag == FateTag::ExitLeft);
  CHECK(fate.t_event == 0.0);
  CHECK(fate.exit_time_proxy == 0.0);
}

TEST_CASE("the upright equilibrium survives the horizon") {
  Fate fate = classify_simple(vec2(M_PI / 2, 0.0), 50.0);
  CHECK(fate.tag == FateTag::Survived);
  CHECK(fate.exit_time_proxy == 50.0);
}

TEST_CASE("energetic launches exit on the matching side") {
  // E = 2 + sin(pi/4) > 1 and p > 0: q climbs monotonically to pi
  Fate fate = classify_simple(vec2(M_PI / 4, 2.0));
  CHECK(fate.tag == FateTag::ExitRight);
  CHECK(std::fabs(fate.state_event[0] - M_PI) < 1e-9);
  CHECK(fate.state_event[1] >= -kTangencyTol);

  // E > 1 with p < 0: q falls monotonically to 0
  fate = classify_simple(vec2(M_PI / 4, -1.0));
  CHECK(fate.tag == FateTag::ExitLeft);
  CHECK(std::fabs(fate.state_event[0]) < 1e-9);
  CHECK(fate.state_event[1] <= kTangencyTol);
}

TEST_CASE("exit fates satisfy their field invariants") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> qd(0.1, M_PI - 0.1), pd_(-2.5, 2.5);
  for (int i = 0; i < 25; ++i) {
    Fate fate = classify_simple(vec2(qd(rng), pd_(rng)), 15.0);
    if (fate.tag == FateTag::ExitLeft) {
      CHECK(std::fabs(fate.state_event[0]) < 1e-8);
      CHECK(fate.state_event[1] <= kTangencyTol);
    } else if (fate.tag == FateTag::ExitRight) {
      CHECK(std::fabs(fate.state_event[0] - M_PI) < 1e-8);
      CHECK(fate.state_event[1] >= -kTangencyTol);
    }
    if (fate.tag != FateTag::Survived) CHECK(fate.exit_time_proxy == fate.t_event);
  }
}

TEST_CASE("openness: nearby starts share the fate") {
  const Eigen::VectorXd base = vec2(M_PI / 4, 2.0);
  const FateTag tag = classify_simple(base).tag;
  for (int k = 0; k < 8; ++k) {
    const double angle = 2.0 * M_PI * k / 8;
    Fate fate = classify_simple(base + 1e-9 * vec2(std::cos(angle), std::sin(angle)));
    CHECK(fate.tag == tag);
  }
}

TEST_CASE("tangency probe values") {
  Controls off;
  // u sin(q) vanishes at q = 0, so the probe is exactly -cos(0)
  CHECK(tangency_probe(SystemModel::simple(), off, vec2(0.0, 0.0), 0.0) == -1.0);
  CHECK(tangency_probe(SystemModel::simple(), Controls{builtins::constant(5.0)}, vec2(0.0, 0.0),
                       0.0) == -1.0);

  SystemModel torq = SystemModel::torque_augmented(builtins::constant(0.5));
  CHECK(tangency_probe(torq, off, vec2(0.0, 0.0), 0.0) == doctest::Approx(-0.5).epsilon(1e-15));

  // cart at q = pi: (-(1+m) cos pi) / (m + cos^2 pi) = 2/2 = 1
  CHECK(tangency_probe(SystemModel::cart(1.0), off, vec4(M_PI, 0.0, 0.0, 0.0), 0.0) ==
        doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("initial states outside the closure are rejected") {
  CHECK_THROWS_AS(classify_simple(vec2(-0.1, 0.0)), Error);
  CHECK_THROWS_AS(classify_simple(vec2(M_PI + 0.1, 0.0)), Error);
  try {
    classify_simple(vec2(-0.1, 0.0));
  } catch (const Error& e) {
    CHECK(e.code() == Errc::PreconditionViolated);
  }
}

TEST_CASE("boundary starts moving inward are classified by the flow") {
  // q = 0 with strong inward velocity: climbs over the top and exits right
  Fate fate = classify_simple(vec2(0.0, std::sqrt(2.0 * 2.2)), 30.0);
  CHECK(fate.tag == FateTag::ExitRight);
  // weak inward velocity: falls back and exits left
  fate = classify_simple(vec2(0.0, 0.5), 30.0);
  CHECK(fate.tag == FateTag::ExitLeft);
  CHECK(fate.t_event > 0.0);
}

TEST_CASE("budget exhaustion is inconclusive, never an exit") {
  IntegratorConfig cfg;
  cfg.max_steps = 5;
  Fate fate = classify(SystemModel::simple(), Controls{}, vec2(M_PI / 2, 0.0), 0.0, 50.0,
                       CaptureRegion::none(), cfg);
  CHECK(fate.tag == FateTag::Inconclusive);
  CHECK(!fate.detail.empty());
}

TEST_CASE("inadmissible torque laws abort with a diagnostic") {
  SystemModel torq = SystemModel::torque_augmented(builtins::constant(2.0));  // w(0,0,t) = 2 >= 1
  try {
    classify(torq, Controls{}, vec2(M_PI / 2, 0.0), 0.0, 5.0, CaptureRegion::none(), kCfg);
    FAIL("expected TorqueInadmissible");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TorqueInadmissible);
    CHECK(std::string(e.what()).find("w(0,0,t) < 1") != std::string::npos);
  }
}

TEST_CASE("admissible torque keeps the exit dichotomy") {
  SystemModel torq = SystemModel::torque_augmented(ControlLaw::from_text("0.5*sin(t)", 0.5));
  Fate fate = classify(torq, Controls{}, vec2(0.0, 0.0), 0.0, 5.0, CaptureRegion::none(), kCfg);
  CHECK(fate.tag == FateTag::ExitLeft);
  CHECK(fate.t_event == 0.0);
}

TEST_CASE("sphere classification") {
  SystemModel sphere = SystemModel::sphere();
  Controls off;
  SUBCASE("downward launch exits through phi = 0") {
    Fate fate = classify(sphere, off, vec4(0.3, -1.0, 0.0, 0.0), 0.0, 10.0,
                         CaptureRegion::none(), kCfg);
    CHECK(fate.tag == FateTag::ExitBoundary);
    CHECK(std::fabs(fate.state_event[0]) < 1e-9);
    CHECK(fate.state_event[1] <= kTangencyTol);
  }
  SUBCASE("chart degeneration comes back as Singular") {
    // enough energy to drive phi to pi/2 with zero angular momentum
    Fate fate = classify(sphere, off, vec4(0.3, 2.5, 0.0, 0.0), 0.0, 10.0,
                         CaptureRegion::none(), kCfg);
    CHECK(fate.tag == FateTag::Singular);
  }
  SUBCASE("negative phi start rejected") {
    CHECK_THROWS_AS(classify(sphere, off, vec4(-0.2, 0.0, 0.0, 0.0), 0.0, 5.0,
                             CaptureRegion::none(), kCfg),
                    Error);
  }
}

TEST_CASE("capture region semantics") {
  SystemModel m = SystemModel::simple();
  Controls c{builtins::pd(2.0, 1.0, M_PI / 2)};
  LyapunovRegion region = build_region(m, c, vec2(M_PI / 2, 0.0), 0.0);
  const double eps = region.eps;
  CaptureRegion capture = CaptureRegion::ball_region(std::move(region));

  SUBCASE("states already inside classify as captured at t0") {
    Fate fate = classify(m, c, vec2(M_PI / 2, 0.0), 0.0, 10.0, capture, kCfg);
    CHECK(fate.tag == FateTag::Captured);
    CHECK(fate.t_event == 0.0);
  }
  SUBCASE("attracted outside states cross the shell in finite time") {
    Fate fate = classify(m, c, vec2(M_PI / 2, 1.2), 0.0, 30.0, capture, kCfg);
    CHECK(fate.tag == FateTag::Captured);
    CHECK(fate.t_event > 0.0);
    CHECK(capture.level(fate.state_event) <= eps * (1.0 + 1e-9));

    // capture soundness: once past the shell, V keeps decreasing for at
    // least another unit of time
    const double v_entry = capture.level(fate.state_event);
    IntegrationResult cont =
        integrate(m, c, fate.state_event, fate.t_event, fate.t_event + 1.0, {}, kCfg);
    for (int k = 1; k <= 10; ++k) {
      const double t = fate.t_event + 0.1 * k;
      CHECK(capture.level(cont.trajectory.sample_one(t)) < v_entry);
    }
  }
  SUBCASE("far starts still exit") {
    Fate fate = classify(m, c, vec2(0.05, -1.5), 0.0, 30.0, capture, kCfg);
    CHECK(fate.tag == FateTag::ExitLeft);
  }
}

TEST_CASE("cylinder capture on the cart tracks only (q, p)") {
  // u depends on (q, p) only, so the (q, p) subsystem closes; its upright
  // linearization under pd(4, 2) is [[0, 1], [-2, -2]], Hurwitz
  SystemModel m = SystemModel::cart(1.0);
  Controls c{builtins::pd(4.0, 2.0, M_PI / 2)};
  Eigen::MatrixXd A2(2, 2);
  A2 << 0, 1, -2, -2;
  const Eigen::MatrixXd P2 = solve_lyapunov(A2, Eigen::MatrixXd::Identity(2, 2));
  CaptureRegion capture =
      CaptureRegion::cylinder(P2, Eigen::Vector2d(M_PI / 2, 0.0), 0.05);

  // start near the axis with large cart offsets: captured in (q, p) regardless
  Fate fate = classify(m, c, vec4(M_PI / 2 + 0.3, 0.0, 5.0, -2.0), 0.0, 40.0, capture, kCfg);
  CHECK(fate.tag == FateTag::Captured);
  CHECK(capture.level(fate.state_event) <= 0.05 * (1.0 + 1e-9));

  // cylinders are a cart-only construct
  CHECK_THROWS_AS(classify(SystemModel::simple(), Controls{}, vec2(1.0, 0.0), 0.0, 5.0, capture,
                           kCfg),
                  Error);
}
