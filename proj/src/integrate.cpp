#include "pendwit/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pendwit {

void IntegratorConfig::validate() const {
  if (!(rtol > 0) || !(atol > 0)) fail(Errc::BadParameter, "tolerances must be > 0");
  if (!(hmax > 0)) fail(Errc::BadParameter, "hmax must be > 0");
  if (max_steps < 1) fail(Errc::BadParameter, "max_steps must be >= 1");
  if (!(t_tol > 0)) fail(Errc::BadParameter, "t_tol must be > 0");
}

double DenseTrajectory::node_time(std::size_t i) const {
  if (i > steps_.size()) fail(Errc::OutOfSpan, "node index out of range");
  if (i == 0) return t_begin_;
  return steps_[i - 1].t1;
}

Eigen::VectorXd DenseTrajectory::node_state(std::size_t i) const {
  if (i > steps_.size() || steps_.empty()) fail(Errc::OutOfSpan, "node index out of range");
  if (i == 0) return steps_.front().cols.col(0);
  return steps_[i - 1].cols.col(1);
}

std::size_t DenseTrajectory::find_step(double t) const {
  // binary search for the step whose [t0, t1] contains t
  std::size_t lo = 0, hi = steps_.size();
  while (hi - lo > 1) {
    std::size_t mid = (lo + hi) / 2;
    if (t < steps_[mid].t0)
      hi = mid;
    else
      lo = mid;
  }
  return lo;
}

Eigen::VectorXd DenseTrajectory::sample_one(double t) const {
  const double lo = std::min(t_begin_, t_end_), hi = std::max(t_begin_, t_end_);
  if (steps_.empty() || t < lo || t > hi)
    throw Error(Errc::OutOfSpan, "sample time " + std::to_string(t) + " outside trajectory span [" +
                                     std::to_string(lo) + ", " + std::to_string(hi) + "]");
  const Step& s = steps_[find_step(t)];
  if (t == s.t0) return s.cols.col(0);
  if (t == s.t1) return s.cols.col(1);
  const double h = s.t1 - s.t0;
  const double th = (t - s.t0) / h;
  const double th1 = 1.0 - th;
  // contd5 evaluation: y0 + th*(r2 + th1*(r3 + th*(r4 + th1*r5)))
  return s.cols.col(0) +
         th * (s.cols.col(2) + th1 * (s.cols.col(3) + th * (s.cols.col(4) + th1 * s.cols.col(5))));
}

std::vector<Eigen::VectorXd> DenseTrajectory::sample(std::span<const double> times) const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(sample_one(t));
  return out;
}

namespace {

// Dormand-Prince 5(4) tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// quartic continuous-extension weights
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

// PI step controller constants
constexpr double kSafety = 0.9;
constexpr double kBeta = 0.04;
constexpr double kExpo = 0.2 - kBeta * 0.75;
constexpr double kMaxGrow = 5.0, kMaxShrink = 0.2;

// 0 when not triggered; otherwise the sign of the pre-crossing side: +1 for
// a guard descending through zero, -1 for one ascending. A guard sitting at
// exactly zero (an initial boundary state moving inward) triggers once it
// leaves zero against the watched direction.
int trigger_sign(EventSpec::Direction dir, double g_prev, double g_new) {
  const bool down = (g_prev > 0 && g_new <= 0) || (g_prev == 0 && g_new < 0);
  const bool up = (g_prev < 0 && g_new >= 0) || (g_prev == 0 && g_new > 0);
  switch (dir) {
    case EventSpec::Direction::Decreasing: return down ? 1 : 0;
    case EventSpec::Direction::Increasing: return up ? -1 : 0;
    case EventSpec::Direction::Any: return down ? 1 : (up ? -1 : 0);
  }
  return 0;
}

}  // namespace

class Dopri5 {
 public:
  Dopri5(const VectorField& f, const IntegratorConfig& cfg) : f_(f), cfg_(cfg) {}

  IntegrationResult run(const Eigen::VectorXd& y0, double t0, double t_end,
                        std::span<const EventSpec> events) {
    cfg_.validate();
    if (!(t_end > t0)) fail(Errc::BadParameter, "integration requires t_end > t0");
    if (!y0.allFinite()) fail(Errc::BadParameter, "initial state must be finite");

    const int n = static_cast<int>(y0.size());
    IntegrationResult res;
    res.trajectory.t_begin_ = t0;
    res.trajectory.t_end_ = t0;

    Eigen::VectorXd y = y0;
    double t = t0;
    Eigen::VectorXd k1 = f_(y, t);
    std::vector<double> g_prev(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) g_prev[i] = events[i].guard(y, t);

    double h = cfg_.h0 > 0 ? std::min({cfg_.h0, cfg_.hmax, t_end - t0})
                           : initial_step(y, t, k1, t_end - t0);
    double facold = 1e-4;
    long attempts = 0;

    Eigen::VectorXd k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ynew(n), ytmp(n), errv(n);

    while (t < t_end) {
      bool clamped = false;
      if (h >= t_end - t) {
        h = t_end - t;
        clamped = true;
      }
      if (++attempts > cfg_.max_steps)
        throw IntegrationError(Errc::StepBudgetExceeded,
                               "step budget exhausted at t = " + std::to_string(t), t, y);
      // a clamped final sliver is legitimate no matter how small
      if (!clamped &&
          h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::fabs(t), 1.0))
        throw IntegrationError(
            Errc::StepUnderflow,
            "required step " + std::to_string(h) + " below machine feasibility at t = " +
                std::to_string(t),
            t, y);

      ytmp = y + h * (a21 * k1);
      k2 = f_(ytmp, t + c2 * h);
      ytmp = y + h * (a31 * k1 + a32 * k2);
      k3 = f_(ytmp, t + c3 * h);
      ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
      k4 = f_(ytmp, t + c4 * h);
      ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      k5 = f_(ytmp, t + c5 * h);
      ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      k6 = f_(ytmp, t + h);
      ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
      k7 = f_(ynew, t + h);

      if (!ynew.allFinite() || !k7.allFinite())
        throw IntegrationError(Errc::StepUnderflow,
                               "non-finite state produced at t = " + std::to_string(t), t, y);

      errv = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      double err = 0;
      for (int i = 0; i < n; ++i) {
        const double sc = cfg_.atol + cfg_.rtol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
        const double r = errv[i] / sc;
        err += r * r;
      }
      err = std::sqrt(err / n);

      if (err <= 1.0) {
        const double t1 = clamped ? t_end : t + h;
        append_step(res.trajectory, t, t1, h, y, ynew, k1, k3, k4, k5, k6, k7);
        res.steps_accepted++;

        bool stop = scan_events(res, events, g_prev, y, ynew, t, t1);
        facold = std::max(err, 1e-4);
        t = t1;
        y.swap(ynew);
        k1.swap(k7);
        if (stop) return res;

        const double fac =
            std::clamp(std::pow(err, kExpo) / std::pow(facold, kBeta) / kSafety,
                       1.0 / kMaxGrow, 1.0 / kMaxShrink);
        h = std::min(h / fac, cfg_.hmax);
      } else {
        res.steps_rejected++;
        const double fac = std::min(1.0 / kMaxShrink, std::pow(err, kExpo) / kSafety);
        h = h / fac;
      }
    }
    res.trajectory.t_end_ = t_end;
    return res;
  }

 private:
  double initial_step(const Eigen::VectorXd& y0, double t0, const Eigen::VectorXd& f0,
                      double span) const {
    const int n = static_cast<int>(y0.size());
    double d0 = 0, d1 = 0;
    for (int i = 0; i < n; ++i) {
      const double sc = cfg_.atol + cfg_.rtol * std::fabs(y0[i]);
      d0 += (y0[i] / sc) * (y0[i] / sc);
      d1 += (f0[i] / sc) * (f0[i] / sc);
    }
    d0 = std::sqrt(d0 / n);
    d1 = std::sqrt(d1 / n);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min({h0, span, cfg_.hmax});
    const Eigen::VectorXd y1 = y0 + h0 * f0;
    const Eigen::VectorXd f1 = f_(y1, t0 + h0);
    double d2 = 0;
    for (int i = 0; i < n; ++i) {
      const double sc = cfg_.atol + cfg_.rtol * std::fabs(y0[i]);
      const double r = (f1[i] - f0[i]) / sc;
      d2 += r * r;
    }
    d2 = std::sqrt(d2 / n) / h0;
    double h1;
    const double dm = std::max(d1, d2);
    if (dm <= 1e-15)
      h1 = std::max(1e-6, h0 * 1e-3);
    else
      h1 = std::pow(0.01 / dm, 0.2);
    return std::min({100.0 * h0, h1, span, cfg_.hmax});
  }

  static void append_step(DenseTrajectory& traj, double t0, double t1, double h,
                          const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                          const Eigen::VectorXd& k1, const Eigen::VectorXd& k3,
                          const Eigen::VectorXd& k4, const Eigen::VectorXd& k5,
                          const Eigen::VectorXd& k6, const Eigen::VectorXd& k7) {
    DenseTrajectory::Step s;
    s.t0 = t0;
    s.t1 = t1;
    s.cols.resize(y0.size(), 6);
    s.cols.col(0) = y0;
    s.cols.col(1) = y1;
    const Eigen::VectorXd ydiff = y1 - y0;
    const Eigen::VectorXd bspl = h * k1 - ydiff;
    s.cols.col(2) = ydiff;
    s.cols.col(3) = bspl;
    s.cols.col(4) = ydiff - h * k7 - bspl;
    s.cols.col(5) = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
    traj.steps_.push_back(std::move(s));
    traj.t_end_ = t1;
  }

  // Scans guards over the newly accepted step; refines any sign change on the
  // dense interpolant. Returns true when a terminal event stops the run.
  bool scan_events(IntegrationResult& res, std::span<const EventSpec> events,
                   std::vector<double>& g_prev, const Eigen::VectorXd& /*y0*/,
                   const Eigen::VectorXd& y1, double t0, double t1) {
    if (events.empty()) return false;
    const DenseTrajectory& traj = res.trajectory;

    struct Candidate {
      int index;
      double t;
    };
    std::vector<Candidate> found;
    std::vector<double> g_new(events.size());
    const double tm = t0 + 0.5 * (t1 - t0);
    Eigen::VectorXd ym;
    bool have_mid = false;

    for (std::size_t i = 0; i < events.size(); ++i) {
      g_new[i] = events[i].guard(y1, t1);
      if (int sign = trigger_sign(events[i].direction, g_prev[i], g_new[i])) {
        found.push_back({static_cast<int>(i), refine(traj, events[i], t0, t1, sign)});
        continue;
      }
      // a crossing that reverses within the step shows up at the midpoint
      if (!have_mid) {
        ym = traj.sample_one(tm);
        have_mid = true;
      }
      const double gm = events[i].guard(ym, tm);
      if (int sign = trigger_sign(events[i].direction, g_prev[i], gm))
        found.push_back({static_cast<int>(i), refine(traj, events[i], t0, tm, sign)});
    }
    std::sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) {
      return a.t < b.t || (a.t == b.t && a.index < b.index);
    });

    for (const Candidate& c : found) {
      EventHit hit;
      hit.event_index = c.index;
      hit.t = c.t;
      hit.state = traj.sample_one(c.t);
      hit.name = events[c.index].name;
      if (events[c.index].terminal) {
        res.trajectory.t_end_ = c.t;
        res.terminal_event = std::move(hit);
        return true;
      }
      res.events.push_back(std::move(hit));
    }
    for (std::size_t i = 0; i < events.size(); ++i) g_prev[i] = g_new[i];
    return false;
  }

  // Bracketing regula-falsi/bisection hybrid on the dense interpolant.
  // `origin_sign` is the guard sign on the pre-crossing side of the bracket.
  double refine(const DenseTrajectory& traj, const EventSpec& ev, double ta, double tb,
                int origin_sign) const {
    double ga = ev.guard(traj.sample_one(ta), ta);
    double gb = ev.guard(traj.sample_one(tb), tb);
    if (gb == 0.0) return tb;
    for (int it = 0; it < 80 && tb - ta > cfg_.t_tol; ++it) {
      double tc;
      if (it % 2 == 0 && gb != ga) {
        tc = ta - ga * (tb - ta) / (gb - ga);
        const double pad = 0.01 * (tb - ta);
        tc = std::clamp(tc, ta + pad, tb - pad);
      } else {
        tc = ta + 0.5 * (tb - ta);
      }
      const double gc = ev.guard(traj.sample_one(tc), tc);
      if (gc == 0.0) return tc;
      if (origin_sign * gc > 0) {
        ta = tc;
        ga = gc;
      } else {
        tb = tc;
        gb = gc;
      }
    }
    // report the side on which the guard has crossed
    return tb;
  }

  const VectorField& f_;
  IntegratorConfig cfg_;
};

IntegrationResult integrate_field(const VectorField& f, const Eigen::VectorXd& y0, double t0,
                                  double t_end, std::span<const EventSpec> events,
                                  const IntegratorConfig& config) {
  return Dopri5(f, config).run(y0, t0, t_end, events);
}

IntegrationResult integrate(const SystemModel& model, const Controls& controls,
                            const Eigen::VectorXd& state0, double t0, double t_end,
                            std::span<const EventSpec> events, const IntegratorConfig& config) {
  VectorField f = [&model, &controls](const Eigen::VectorXd& y, double t) {
    return eval_rhs(model, y, t, controls);
  };
  return integrate_field(f, state0, t0, t_end, events, config);
}

}  // namespace pendwit
