#pragma once

// Adaptive Dormand-Prince 5(4) integration with quartic dense output and
// event localization on the interpolant.

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pendwit/models.hpp"

namespace pendwit {

struct IntegratorConfig {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h0 = 0.0;  // <= 0 selects the initial step automatically
  double hmax = 0.1;
  long max_steps = 10'000'000;
  double t_tol = 1e-10;  // event-time localization tolerance

  void validate() const;  // throws BadParameter
};

using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;

struct EventSpec {
  enum class Direction { Decreasing, Increasing, Any };

  std::function<double(const Eigen::VectorXd&, double)> guard;
  Direction direction = Direction::Any;
  bool terminal = true;
  std::string name;
};

struct EventHit {
  int event_index = -1;
  double t = 0;
  Eigen::VectorXd state;
  std::string name;
};

// StepBudgetExceeded / StepUnderflow carrying the state the run was at.
class IntegrationError : public Error {
 public:
  IntegrationError(Errc code, const std::string& message, double t, Eigen::VectorXd state)
      : Error(code, message), t_(t), state_(std::move(state)) {}
  double t() const { return t_; }
  const Eigen::VectorXd& state() const { return state_; }

 private:
  double t_;
  Eigen::VectorXd state_;
};

class DenseTrajectory {
 public:
  double t_begin() const { return t_begin_; }
  double t_end() const { return t_end_; }
  std::size_t step_count() const { return steps_.size(); }
  // accepted-step node times, node_time(0) == t_begin
  double node_time(std::size_t i) const;
  Eigen::VectorXd node_state(std::size_t i) const;

  // Interpolated state; a time matching a stored node is returned bit-exactly.
  Eigen::VectorXd sample_one(double t) const;  // throws OutOfSpan
  // States at the given times, in input order.
  std::vector<Eigen::VectorXd> sample(std::span<const double> times) const;

 private:
  friend class Dopri5;
  struct Step {
    double t0, t1;
    // columns: y0, y1, r2, r3, r4, r5 of the continuous extension
    Eigen::MatrixXd cols;
  };
  std::size_t find_step(double t) const;

  std::vector<Step> steps_;
  double t_begin_ = 0;
  double t_end_ = 0;
};

struct IntegrationResult {
  DenseTrajectory trajectory;
  std::optional<EventHit> terminal_event;
  std::vector<EventHit> events;  // non-terminal hits in time order
  long steps_accepted = 0;
  long steps_rejected = 0;
};

// Core entry point on an arbitrary field.
IntegrationResult integrate_field(const VectorField& f, const Eigen::VectorXd& y0, double t0,
                                  double t_end, std::span<const EventSpec> events,
                                  const IntegratorConfig& config);

// Closed-loop convenience wrapper.
IntegrationResult integrate(const SystemModel& model, const Controls& controls,
                            const Eigen::VectorXd& state0, double t0, double t_end,
                            std::span<const EventSpec> events, const IntegratorConfig& config);

}  // namespace pendwit
