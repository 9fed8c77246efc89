#pragma once

// Witness construction on top of the fate classifier: bisection along paths
// of initial conditions for solutions that neither exit nor stabilize, the
// periodic-orbit search on the period map with a fixed-point-index
// certificate, and basin sweeps.

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

#include "pendwit/fate.hpp"

namespace pendwit {

// Piecewise-linear curve in initial-state space, evaluated on s in [0, 1]
// with equal parameter length per segment.
struct PathParametrization {
  std::vector<Eigen::VectorXd> waypoints;  // >= 2

  Eigen::VectorXd at(double s) const;
};

struct BracketRecord {
  double s_lo, s_hi, s_mid;
  FateTag mid_tag;
};

struct SurvivorResult {
  double s_star = 0;
  Eigen::VectorXd state_star;
  double s_lo = 0, s_hi = 1;
  FateTag fate_lo = FateTag::Inconclusive, fate_hi = FateTag::Inconclusive;
  Fate fate_star;               // classification of the returned midpoint
  double achieved_horizon = 0;  // time the midpoint trajectory spent in M \ B
  DenseTrajectory trajectory;
  std::vector<BracketRecord> history;
};

// Bisects the fate boundary between path(0) and path(1). Endpoints must
// classify to distinct tags outside {Survived, Inconclusive, Singular}; any
// distinct pair of exit/capture classes is an admissible bracket. Returns as
// soon as a midpoint survives the whole horizon, otherwise narrows the
// bracket to tol_s.
SurvivorResult find_survivor(const SystemModel& model, const Controls& controls,
                             const PathParametrization& path, double t0, double horizon,
                             const CaptureRegion& capture, double tol_s,
                             const IntegratorConfig& config);

// Same contract for the four-dimensional systems (sphere and cart).
SurvivorResult find_survivor_highdim(const SystemModel& model, const Controls& controls,
                                     const PathParametrization& path, double t0, double horizon,
                                     const CaptureRegion& capture, double tol_s,
                                     const IntegratorConfig& config);

struct PeriodicOrbit {
  Eigen::Vector2d state_star;
  double period = 0;
  double residual = 0;  // |P_T(x*) - x*|
  int index = 0;        // winding number of the displacement field around x*
  std::array<std::complex<double>, 2> multipliers{};  // spectrum of the monodromy
  double rho = 0;  // half-height of the trapping strip W0 = [0,pi] x [-rho,rho]
};

struct PeriodicSearchConfig {
  int seeds = 16;
  std::uint64_t rng_seed = 0;
  double residual_tol = 1e-10;
  double index_box = 1e-3;  // half-width of the winding-number rectangle
  int threads = 1;
};

// Multi-start Newton on the displacement P_T(x) - x, seeded inside the
// trapping strip W0 with rho = 1.5 (U + 1) / nu. Roots whose closed orbit
// leaves {0 < q < pi} are rejected and the search continues; a deterministic
// 17 x 17 displacement grid over W0 supplies fallback starts before
// NoRootFound is raised.
PeriodicOrbit find_periodic(const SystemModel& model, const Controls& controls,
                            const PeriodicSearchConfig& search, const IntegratorConfig& config);

struct AxisSpec {
  int state_index = 0;
  double lo = 0, hi = 1;
  int count = 2;
  std::string label;
};

struct BasinGrid {
  AxisSpec axis_x, axis_y;
  Eigen::VectorXd base_state;
  double t0 = 0, horizon = 0;
  // row-major with x fastest: cell (ix, iy) lives at iy * axis_x.count + ix
  std::vector<FateTag> tags;
  std::vector<double> t_events;
  std::vector<double> proxies;

  double node_x(int ix) const;
  double node_y(int iy) const;
  FateTag tag_at(int ix, int iy) const { return tags[static_cast<std::size_t>(iy) * axis_x.count + ix]; }
};

// Classifies every grid node; per-cell failures are recorded as Inconclusive
// and never abort the sweep. Cells inside the capture region classify as
// Captured at t0.
BasinGrid sweep_basin(const SystemModel& model, const Controls& controls, const AxisSpec& axis_x,
                      const AxisSpec& axis_y, const Eigen::VectorXd& base_state, double t0,
                      double horizon, const CaptureRegion& capture, const IntegratorConfig& config,
                      int threads);

}  // namespace pendwit
