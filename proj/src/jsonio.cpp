#include "pendwit/jsonio.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace pendwit {

std::string format_double(double v) {
  if (!std::isfinite(v)) return std::signbit(v) ? "-1e999" : "1e999";  // never expected
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Json Json::vector(const Eigen::VectorXd& v) {
  Json arr = array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push(v[i]);
  return arr;
}

Json Json::matrix(const Eigen::MatrixXd& m) {
  Json rows = array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push(m(i, j));
    rows.push(std::move(row));
  }
  return rows;
}

Json& Json::set(std::string key, Json value) {
  if (type_ != Type::Object) fail(Errc::Io, "Json::set on a non-object");
  object_.emplace_back(std::move(key), std::move(value));
  return *this;
}

Json& Json::push(Json value) {
  if (type_ != Type::Array) fail(Errc::Io, "Json::push on a non-array");
  array_.push_back(std::move(value));
  return *this;
}

namespace {

void write_escaped(std::ostream& os, const std::string& s) {
  os << '"';
  for (char c : s) {
    switch (c) {
      case '"': os << "\\\""; break;
      case '\\': os << "\\\\"; break;
      case '\n': os << "\\n"; break;
      case '\t': os << "\\t"; break;
      case '\r': os << "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          os << buf;
        } else {
          os << c;
        }
    }
  }
  os << '"';
}

}  // namespace

void Json::write(std::ostream& os, int indent, int depth) const {
  const std::string pad(static_cast<std::size_t>(indent) * (depth + 1), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent) * depth, ' ');
  switch (type_) {
    case Type::Null: os << "null"; return;
    case Type::Bool: os << (bool_ ? "true" : "false"); return;
    case Type::Int: os << int_; return;
    case Type::Double: os << format_double(double_); return;
    case Type::String: write_escaped(os, str_); return;
    case Type::Array: {
      if (array_.empty()) {
        os << "[]";
        return;
      }
      os << "[";
      for (std::size_t i = 0; i < array_.size(); ++i) {
        os << (i ? "," : "") << "\n" << pad;
        array_[i].write(os, indent, depth + 1);
      }
      os << "\n" << close_pad << "]";
      return;
    }
    case Type::Object: {
      if (object_.empty()) {
        os << "{}";
        return;
      }
      os << "{";
      for (std::size_t i = 0; i < object_.size(); ++i) {
        os << (i ? "," : "") << "\n" << pad;
        write_escaped(os, object_[i].first);
        os << ": ";
        object_[i].second.write(os, indent, depth + 1);
      }
      os << "\n" << close_pad << "}";
      return;
    }
  }
}

std::string Json::dump(int indent) const {
  std::ostringstream os;
  write(os, indent, 0);
  os << "\n";
  return os.str();
}

Json to_json(const Fate& fate) {
  Json j = Json::object();
  j.set("type", "fate");
  j.set("tag", std::string(fate_name(fate.tag)));
  j.set("t_event", fate.t_event);
  j.set("state_event", Json::vector(fate.state_event));
  j.set("exit_time_proxy", fate.exit_time_proxy);
  if (!fate.detail.empty()) j.set("detail", fate.detail);
  return j;
}

Json to_json(const SurvivorResult& result) {
  Json j = Json::object();
  j.set("type", "survivor");
  j.set("s_star", result.s_star);
  j.set("state_star", Json::vector(result.state_star));
  Json bracket = Json::object();
  bracket.set("s_lo", result.s_lo);
  bracket.set("s_hi", result.s_hi);
  bracket.set("fate_lo", std::string(fate_name(result.fate_lo)));
  bracket.set("fate_hi", std::string(fate_name(result.fate_hi)));
  j.set("bracket", std::move(bracket));
  j.set("achieved_horizon", result.achieved_horizon);
  j.set("fate_star", to_json(result.fate_star));
  j.set("bisection_steps", static_cast<std::int64_t>(result.history.size()));
  return j;
}

Json to_json(const PeriodicOrbit& orbit) {
  Json j = Json::object();
  j.set("type", "periodic_orbit");
  j.set("state_star", Json::vector(orbit.state_star));
  j.set("period", orbit.period);
  j.set("residual", orbit.residual);
  j.set("index", orbit.index);
  Json mults = Json::array();
  for (const auto& m : orbit.multipliers) {
    Json entry = Json::object();
    entry.set("re", m.real());
    entry.set("im", m.imag());
    mults.push(std::move(entry));
  }
  j.set("multipliers", std::move(mults));
  j.set("rho", orbit.rho);
  // the trapping block is a rectangle, its essential exit set two strips
  Json chi = Json::object();
  chi.set("chi_W", 1);
  chi.set("chi_W_minus_minus", 2);
  j.set("euler_characteristics", std::move(chi));
  return j;
}

Json to_json(const VerificationReport& report) {
  Json j = Json::object();
  j.set("passed", report.passed);
  j.set("initial_eps", report.initial_eps);
  j.set("final_eps", report.final_eps);
  j.set("shrink_count", report.shrink_count);
  j.set("min_neg_vdot", report.min_neg_vdot);
  j.set("n_state_samples", report.n_state_samples);
  j.set("n_time_samples", report.n_time_samples);
  j.set("seed", report.seed);
  j.set("margin_to_boundary", report.margin_to_boundary);
  return j;
}

Json to_json(const LyapunovRegion& region) {
  Json j = Json::object();
  j.set("type", "lyapunov_region");
  j.set("mu", Json::vector(region.mu));
  j.set("P", Json::matrix(region.form.matrix()));
  j.set("eps", region.eps);
  if (region.report) j.set("verification", to_json(*region.report));
  return j;
}

Json to_json(const BasinGrid& grid) {
  auto axis = [](const AxisSpec& ax) {
    Json j = Json::object();
    j.set("state_index", ax.state_index);
    j.set("lo", ax.lo);
    j.set("hi", ax.hi);
    j.set("count", ax.count);
    j.set("label", ax.label);
    return j;
  };
  Json j = Json::object();
  j.set("type", "basin_grid");
  j.set("axis_x", axis(grid.axis_x));
  j.set("axis_y", axis(grid.axis_y));
  j.set("base_state", Json::vector(grid.base_state));
  j.set("t0", grid.t0);
  j.set("horizon", grid.horizon);
  Json tags = Json::array();
  for (FateTag t : grid.tags) tags.push(std::string(fate_name(t)));
  j.set("tags", std::move(tags));
  Json times = Json::array();
  for (double t : grid.t_events) times.push(t);
  j.set("t_events", std::move(times));
  Json proxies = Json::array();
  for (double p : grid.proxies) proxies.push(p);
  j.set("exit_time_proxies", std::move(proxies));
  return j;
}

namespace {

const char* const kPlanarColumns[] = {"q", "p"};
const char* const kCartColumns[] = {"q", "p", "x", "y"};
const char* const kSphereColumns[] = {"phi", "dphi", "theta", "dtheta"};

std::vector<std::string> state_columns(SystemKind kind) {
  switch (kind) {
    case SystemKind::Sphere: return {std::begin(kSphereColumns), std::end(kSphereColumns)};
    case SystemKind::Cart: return {std::begin(kCartColumns), std::end(kCartColumns)};
    default: return {std::begin(kPlanarColumns), std::end(kPlanarColumns)};
  }
}

Json series(std::string label, std::vector<double> x, std::vector<double> y) {
  Json s = Json::object();
  s.set("label", std::move(label));
  Json xs = Json::array(), ys = Json::array();
  for (double v : x) xs.push(v);
  for (double v : y) ys.push(v);
  s.set("x", std::move(xs));
  s.set("y", std::move(ys));
  return s;
}

Json plot_shell(const char* kind, std::string title, std::string x_label, std::string y_label) {
  Json j = Json::object();
  j.set("type", "plotspec");
  j.set("kind", kind);
  j.set("title", std::move(title));
  j.set("x_label", std::move(x_label));
  j.set("y_label", std::move(y_label));
  return j;
}

}  // namespace

std::vector<double> csv_sample_times(double t0, double t_end, double step) {
  if (!(step > 0)) fail(Errc::BadParameter, "sample step must be > 0");
  if (!(t_end >= t0)) fail(Errc::BadParameter, "sample window must be non-empty");
  const double span = t_end - t0;
  // absorb roundoff when t_end sits on the lattice
  const long n = static_cast<long>(std::floor(span / step * (1.0 + 1e-12)));
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(n) + 2);
  for (long k = 0; k <= n; ++k) times.push_back(std::min(t0 + k * step, t_end));
  if (t_end - times.back() <= step * 1e-9)
    times.back() = t_end;
  else
    times.push_back(t_end);
  return times;
}

void write_trajectory_csv(std::ostream& os, const DenseTrajectory& trajectory, SystemKind kind,
                          double sample_step) {
  const std::vector<std::string> cols = state_columns(kind);
  os << "t";
  for (const std::string& c : cols) os << "," << c;
  os << "\n";
  for (double t : csv_sample_times(trajectory.t_begin(), trajectory.t_end(), sample_step)) {
    const Eigen::VectorXd state = trajectory.sample_one(t);
    os << format_double(t);
    for (Eigen::Index i = 0; i < state.size(); ++i) os << "," << format_double(state[i]);
    os << "\n";
  }
}

void write_basin_csv(std::ostream& os, const BasinGrid& grid) {
  os << grid.axis_x.label << "," << grid.axis_y.label << ",tag,t_event,exit_time_proxy\n";
  for (int iy = 0; iy < grid.axis_y.count; ++iy)
    for (int ix = 0; ix < grid.axis_x.count; ++ix) {
      const std::size_t cell = static_cast<std::size_t>(iy) * grid.axis_x.count + ix;
      os << format_double(grid.node_x(ix)) << "," << format_double(grid.node_y(iy)) << ","
         << fate_name(grid.tags[cell]) << "," << format_double(grid.t_events[cell]) << ","
         << format_double(grid.proxies[cell]) << "\n";
    }
}

Json plot_trajectory(const DenseTrajectory& trajectory, SystemKind kind, double sample_step) {
  Json j = plot_shell("trajectory", "state components over time", "t", "state");
  const std::vector<double> times =
      csv_sample_times(trajectory.t_begin(), trajectory.t_end(), sample_step);
  const std::vector<std::string> cols = state_columns(kind);
  Json all = Json::array();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    std::vector<double> ys;
    ys.reserve(times.size());
    for (double t : times) ys.push_back(trajectory.sample_one(t)[static_cast<Eigen::Index>(c)]);
    all.push(series(cols[c], times, std::move(ys)));
  }
  j.set("series", std::move(all));
  return j;
}

Json plot_bracket_history(const SurvivorResult& result) {
  Json j = plot_shell("bracket-history", "bisection bracket per iteration", "iteration",
                      "path parameter s");
  std::vector<double> it, lo, hi, mid;
  for (std::size_t i = 0; i < result.history.size(); ++i) {
    it.push_back(static_cast<double>(i));
    lo.push_back(result.history[i].s_lo);
    hi.push_back(result.history[i].s_hi);
    mid.push_back(result.history[i].s_mid);
  }
  Json all = Json::array();
  all.push(series("s_lo", it, lo));
  all.push(series("s_hi", it, hi));
  all.push(series("s_mid", it, mid));
  j.set("series", std::move(all));
  return j;
}

Json plot_basin(const BasinGrid& grid) {
  Json j = plot_shell("basin", "first-exit classes over the initial-condition grid",
                      grid.axis_x.label, grid.axis_y.label);
  Json all = Json::array();
  for (FateTag tag : {FateTag::ExitLeft, FateTag::ExitRight, FateTag::ExitBoundary,
                      FateTag::Captured, FateTag::Survived, FateTag::Singular,
                      FateTag::Inconclusive}) {
    std::vector<double> xs, ys;
    for (int iy = 0; iy < grid.axis_y.count; ++iy)
      for (int ix = 0; ix < grid.axis_x.count; ++ix)
        if (grid.tag_at(ix, iy) == tag) {
          xs.push_back(grid.node_x(ix));
          ys.push_back(grid.node_y(iy));
        }
    if (!xs.empty()) all.push(series(std::string(fate_name(tag)), xs, ys));
  }
  j.set("series", std::move(all));
  return j;
}

}  // namespace pendwit
