#include "pendwit/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <optional>

#include "pendwit/config.hpp"
#include "pendwit/lyapunov.hpp"

namespace pendwit {

namespace {

namespace fs = std::filesystem;

struct CliOptions {
  std::string command;
  std::string config_path;
  std::string out_dir = ".";
  bool json_errors = false;
  std::optional<double> rtol, atol, horizon;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::Config:
    case Errc::Syntax:
    case Errc::UnknownIdentifier:
    case Errc::ArityMismatch:
    case Errc::UnknownBuiltin:
    case Errc::MissingVariable:
    case Errc::BadParameter:
      return 3;
    case Errc::VerificationFailed:
    case Errc::NotHurwitz:
    case Errc::NotAnEquilibrium:
    case Errc::IllConditioned:
    case Errc::NoConvergence:
      return 4;
    case Errc::NoRootFound:
    case Errc::StepBudgetExceeded:
    case Errc::StepUnderflow:
    case Errc::InconclusiveEncountered:
      return 2;
    default:
      return 1;
  }
}

void report_error(const CliOptions& opts, std::ostream& err, const Error& e) {
  if (opts.json_errors) {
    Json j = Json::object();
    j.set("error", errc_name(e.code()));
    j.set("message", e.what());
    if (const auto* syntax = dynamic_cast<const SyntaxError*>(&e)) {
      j.set("offset", static_cast<std::int64_t>(syntax->offset()));
      j.set("expected", syntax->expected());
    }
    err << j.dump();
  } else {
    err << errc_name(e.code()) << ": " << e.what() << "\n";
    if (const auto* syntax = dynamic_cast<const SyntaxError*>(&e))
      err << "  at byte offset " << syntax->offset() << ", expected " << syntax->expected()
          << "\n";
  }
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw Error(Errc::Io, "failed writing '" + path.string() + "'");
}

std::vector<std::string> lipschitz_warnings(const ScenarioConfig& config) {
  std::vector<std::string> warnings;
  auto check = [&](const ControlLaw& law, const std::string& name) {
    if (!law.lipschitz_clean)
      warnings.push_back(name +
                         " contains sign/abs and may not be locally Lipschitz; uniqueness of "
                         "solutions and the bisection continuity argument are not guaranteed");
  };
  check(config.controls.u, "controller u");
  if (config.model.kind == SystemKind::Sphere) check(config.controls.v, "controller v");
  if (config.model.torque) check(*config.model.torque, "torque law w");
  return warnings;
}

Json with_warnings(Json j, const std::vector<std::string>& warnings) {
  if (!warnings.empty()) {
    Json w = Json::array();
    for (const std::string& s : warnings) w.push(s);
    j.set("warnings", std::move(w));
  }
  return j;
}

int run_command(const CliOptions& opts, std::ostream& out, std::ostream& err) {
  ScenarioConfig config = load_scenario_file(opts.config_path);
  if (opts.rtol) config.integrator.rtol = *opts.rtol;
  if (opts.atol) config.integrator.atol = *opts.atol;
  if (opts.seed) config.seed = *opts.seed;
  if (opts.threads) config.threads = *opts.threads;
  if (opts.horizon) {
    if (config.classify) config.classify->horizon = *opts.horizon;
    if (config.survivor) config.survivor->horizon = *opts.horizon;
    if (config.sweep) config.sweep->horizon = *opts.horizon;
  }
  config.integrator.validate();

  const fs::path out_dir(opts.out_dir);
  fs::create_directories(out_dir);
  const std::vector<std::string> warnings = lipschitz_warnings(config);
  for (const std::string& w : warnings) {
    if (opts.json_errors) {
      Json j = Json::object();
      j.set("warning", w);
      err << j.dump(0);
    } else {
      err << "warning: " << w << "\n";
    }
  }

  write_file(out_dir / "resolved-config.json",
             resolved_config_json(config, opts.command).dump());

  const IntegratorConfig& integ = config.integrator;

  if (opts.command == "simulate") {
    if (!config.simulate) throw Error(Errc::Config, "config has no 'simulate' block");
    const SimulateSpec& spec = *config.simulate;
    IntegrationResult run = integrate(config.model, config.controls, spec.state0, spec.t0,
                                      spec.t_end, {}, integ);
    std::ostringstream csv;
    write_trajectory_csv(csv, run.trajectory, config.model.kind, spec.sample_step);
    write_file(out_dir / "trajectory.csv", csv.str());
    write_file(out_dir / "plot.json",
               plot_trajectory(run.trajectory, config.model.kind, spec.sample_step).dump());
    out << "simulate: integrated to t = " << format_double(run.trajectory.t_end()) << " over "
        << run.trajectory.step_count() << " steps -> " << (out_dir / "trajectory.csv").string()
        << "\n";
    return 0;
  }

  if (opts.command == "classify") {
    if (!config.classify) throw Error(Errc::Config, "config has no 'classify' block");
    const ClassifySpec& spec = *config.classify;
    const CaptureRegion capture = build_capture(config);
    Fate fate = classify(config.model, config.controls, spec.state0, spec.t0, spec.horizon,
                         capture, integ);
    write_file(out_dir / "fate.json", with_warnings(to_json(fate), warnings).dump());
    out << "classify: " << fate_name(fate.tag) << " at t = " << format_double(fate.t_event)
        << " -> " << (out_dir / "fate.json").string() << "\n";
    // an inconclusive classification is an exhausted budget, not a result
    return fate.tag == FateTag::Inconclusive ? 2 : 0;
  }

  if (opts.command == "survivor") {
    if (!config.survivor) throw Error(Errc::Config, "config has no 'survivor' block");
    const SurvivorSpec& spec = *config.survivor;
    const CaptureRegion capture = build_capture(config);
    PathParametrization path{spec.path};
    SurvivorResult result =
        (state_dim(config.model.kind) == 4)
            ? find_survivor_highdim(config.model, config.controls, path, spec.t0, spec.horizon,
                                    capture, spec.tol_s, integ)
            : find_survivor(config.model, config.controls, path, spec.t0, spec.horizon, capture,
                            spec.tol_s, integ);
    write_file(out_dir / "survivor.json", with_warnings(to_json(result), warnings).dump());
    std::ostringstream csv;
    write_trajectory_csv(csv, result.trajectory, config.model.kind, spec.sample_step);
    write_file(out_dir / "trajectory.csv", csv.str());
    write_file(out_dir / "plot.json", plot_bracket_history(result).dump());
    out << "survivor: s* = " << format_double(result.s_star) << ", achieved horizon "
        << format_double(result.achieved_horizon) << " -> " << (out_dir / "survivor.json").string()
        << "\n";
    return 0;
  }

  if (opts.command == "periodic") {
    if (!config.periodic) throw Error(Errc::Config, "config has no 'periodic' block");
    const PeriodicSpec& spec = *config.periodic;
    PeriodicSearchConfig search;
    search.seeds = spec.seeds;
    search.rng_seed = config.seed;
    search.residual_tol = spec.residual_tol;
    search.index_box = spec.index_box;
    search.threads = config.threads;
    PeriodicOrbit orbit = find_periodic(config.model, config.controls, search, integ);
    write_file(out_dir / "periodic.json", with_warnings(to_json(orbit), warnings).dump());
    const double step = spec.sample_step > 0 ? spec.sample_step : orbit.period / 256.0;
    IntegrationResult run = integrate(config.model, config.controls, orbit.state_star, 0.0,
                                      orbit.period, {}, integ);
    std::ostringstream csv;
    write_trajectory_csv(csv, run.trajectory, config.model.kind, step);
    write_file(out_dir / "orbit.csv", csv.str());
    out << "periodic: fixed point (" << format_double(orbit.state_star[0]) << ", "
        << format_double(orbit.state_star[1]) << "), residual "
        << format_double(orbit.residual) << ", index " << orbit.index << " -> "
        << (out_dir / "periodic.json").string() << "\n";
    return 0;
  }

  if (opts.command == "lyapunov") {
    if (!config.lyapunov) throw Error(Errc::Config, "config has no 'lyapunov' block");
    const LyapunovSpec& spec = *config.lyapunov;
    LyapunovRegion region =
        build_region(config.model, config.controls, spec.mu, spec.t0, spec.n_samples,
                     config.seed + kDefaultShellSeed);
    write_file(out_dir / "region.json", with_warnings(to_json(region), warnings).dump());
    out << "lyapunov: eps = " << format_double(region.eps) << " -> "
        << (out_dir / "region.json").string() << "\n";
    return 0;
  }

  if (opts.command == "sweep") {
    if (!config.sweep) throw Error(Errc::Config, "config has no 'sweep' block");
    const SweepSpec& spec = *config.sweep;
    const CaptureRegion capture = build_capture(config);
    BasinGrid grid = sweep_basin(config.model, config.controls, spec.axis_x, spec.axis_y,
                                 spec.base_state, spec.t0, spec.horizon, capture, integ,
                                 config.threads);
    write_file(out_dir / "basin.json", with_warnings(to_json(grid), warnings).dump());
    std::ostringstream csv;
    write_basin_csv(csv, grid);
    write_file(out_dir / "basin.csv", csv.str());
    write_file(out_dir / "plot.json", plot_basin(grid).dump());
    out << "sweep: " << grid.axis_x.count << "x" << grid.axis_y.count << " cells -> "
        << (out_dir / "basin.json").string() << "\n";
    return 0;
  }

  throw Error(Errc::Config, "unknown command '" + opts.command + "'");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"witness constructions for inverted-pendulum stabilization obstructions"};
  app.require_subcommand(1);

  CliOptions opts;
  for (const char* name : {"simulate", "classify", "survivor", "periodic", "lyapunov", "sweep"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opts.config_path, "scenario config (JSON)")->required();
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_flag("--json", opts.json_errors, "machine-readable diagnostics on stderr");
    auto number_option = [sub](const char* name, auto& slot, const char* help) {
      sub->add_option(
          name,
          [&slot](const CLI::results_t& res) {
            try {
              if constexpr (std::is_same_v<std::decay_t<decltype(*slot)>, double>)
                slot = std::stod(res[0]);
              else if constexpr (std::is_same_v<std::decay_t<decltype(*slot)>, std::uint64_t>)
                slot = std::stoull(res[0]);
              else
                slot = std::stoi(res[0]);
            } catch (...) {
              return false;
            }
            return true;
          },
          help);
    };
    number_option("--rtol", opts.rtol, "relative tolerance override");
    number_option("--atol", opts.atol, "absolute tolerance override");
    number_option("--horizon", opts.horizon, "horizon override");
    number_option("--seed", opts.seed, "random seed override");
    number_option("--threads", opts.threads, "worker count (0 = auto)");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      out << app.help();
      return 0;
    }
    err << "usage error: " << e.what() << "\n";
    return 3;
  }
  opts.command = app.get_subcommands().front()->get_name();

  try {
    return run_command(opts, out, err);
  } catch (const Error& e) {
    report_error(opts, err, e);
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace pendwit
