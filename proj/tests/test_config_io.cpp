#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pendwit/cli.hpp"
#include "pendwit/config.hpp"

using namespace pendwit;
namespace fs = std::filesystem;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "pendwit_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

int cli(const std::vector<std::string>& args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

const char* kSurvivorConfig = R"({
  "system": {"kind": "simple"},
  "controller": {"builtin": "zero"},
  "survivor": {
    "path": [[0.78539816339744828, -1.0], [0.78539816339744828, 2.0]],
    "t0": 0.0, "horizon": 30.0, "tol_s": 1e-10, "sample_step": 0.05
  }
})";

}  // namespace

TEST_CASE("17-digit doubles round-trip through the JSON writer") {
  for (double v : {M_PI, 0.1, 1.0 / 3.0, 1e-300, 2.2250738585072014e-308, -0.0, 12345.678901234567,
                   0.76536686473017954}) {
    const std::string text = format_double(v);
    const double back = std::stod(text);
    CHECK(std::memcmp(&back, &v, sizeof v) == 0);
  }
}

TEST_CASE("csv sample lattice") {
  // floor((t_end - t0)/step) + 1 rows, plus one more when t_end is off-lattice
  CHECK(csv_sample_times(0.0, 1.0, 0.3).size() == 5);   // 0 .3 .6 .9 1.0
  CHECK(csv_sample_times(0.0, 0.9, 0.3).size() == 4);   // 0 .3 .6 .9
  CHECK(csv_sample_times(0.0, 1.0, 0.25).size() == 5);  // exact lattice
  auto times = csv_sample_times(0.0, 1.0, 0.3);
  CHECK(times.back() == 1.0);
  CHECK(times.front() == 0.0);
}

TEST_CASE("trajectory csv: equilibrium rows and headers") {
  SystemModel m = SystemModel::simple();
  Controls off;
  IntegratorConfig cfg;
  IntegrationResult run = integrate(m, off, vec2(M_PI / 2, 0.0), 0.0, 1.0, {}, cfg);
  std::ostringstream csv;
  write_trajectory_csv(csv, run.trajectory, SystemKind::Simple, 0.5);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "t,q,p");
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    const auto comma = line.find(',');
    const std::string q = line.substr(comma + 1, line.find(',', comma + 1) - comma - 1);
    CHECK(q == format_double(M_PI / 2));  // 17 significant digits, constant along the run
    // cos(fl(pi/2)) is 6.1e-17, so p stays at rounding scale rather than 0
    CHECK(std::fabs(std::stod(line.substr(line.rfind(',') + 1))) < 1e-15);
  }
  CHECK(rows == 3);  // t = 0, 0.5, 1.0
}

TEST_CASE("cart and sphere csv headers") {
  IntegratorConfig cfg;
  Controls off;
  IntegrationResult cart_run = integrate(SystemModel::cart(1.0), off,
                                         (Eigen::VectorXd(4) << M_PI / 2, 0, 0, 0).finished(),
                                         0.0, 0.1, {}, cfg);
  std::ostringstream cart_csv;
  write_trajectory_csv(cart_csv, cart_run.trajectory, SystemKind::Cart, 0.05);
  CHECK(cart_csv.str().substr(0, cart_csv.str().find('\n')) == "t,q,p,x,y");

  IntegrationResult sphere_run = integrate(SystemModel::sphere(), off,
                                           (Eigen::VectorXd(4) << 0.5, 0, 0, 0.5).finished(), 0.0,
                                           0.1, {}, cfg);
  std::ostringstream sphere_csv;
  write_trajectory_csv(sphere_csv, sphere_run.trajectory, SystemKind::Sphere, 0.05);
  CHECK(sphere_csv.str().substr(0, sphere_csv.str().find('\n')) == "t,phi,dphi,theta,dtheta");
}

TEST_CASE("config validation") {
  SUBCASE("unknown keys are rejected everywhere") {
    CHECK_THROWS_AS(load_scenario_text(R"({"system": {"kind": "simple"},
      "controller": {"expr": "0"}, "bogus": 1})"),
                    Error);
    CHECK_THROWS_AS(load_scenario_text(R"({"system": {"kind": "simple", "mass": 2},
      "controller": {"expr": "0"}})"),
                    Error);
    CHECK_THROWS_AS(load_scenario_text(R"({"system": {"kind": "simple"},
      "controller": {"expr": "0", "bogon": 3}})"),
                    Error);
  }
  SUBCASE("variables illegal for the system kind fail at load") {
    try {
      load_scenario_text(R"({"system": {"kind": "simple"}, "controller": {"expr": "x + q"}})");
      FAIL("expected UnknownIdentifier");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UnknownIdentifier);
    }
  }
  SUBCASE("controller_v is sphere-only") {
    CHECK_THROWS_AS(load_scenario_text(R"({"system": {"kind": "simple"},
      "controller": {"expr": "0"}, "controller_v": {"expr": "0"}})"),
                    Error);
  }
  SUBCASE("a valid document loads with defaults") {
    ScenarioConfig cfg = load_scenario_text(R"({
      "system": {"kind": "friction", "nu": 0.5},
      "controller": {"builtin": "periodic_forcing", "params": {"A": 0.5, "omega": 6.283185307179586}},
      "periodic": {}
    })");
    CHECK(cfg.model.kind == SystemKind::Friction);
    CHECK(cfg.model.nu == 0.5);
    REQUIRE(cfg.periodic.has_value());
    CHECK(cfg.periodic->seeds == 16);
    CHECK(cfg.integrator.rtol == 1e-10);
    CHECK(cfg.controls.u.declared_period == doctest::Approx(1.0));
  }
}

TEST_CASE("cli: classify the horizontal rest state") {
  const fs::path dir = fresh_dir("classify");
  spit(dir / "config.json", R"({
    "system": {"kind": "simple"},
    "controller": {"expr": "0"},
    "classify": {"state0": [0.0, 0.0], "t0": 0.0, "horizon": 10.0}
  })");
  std::string out;
  const int code = cli({"classify", "--config", (dir / "config.json").string(), "--out",
                        (dir / "out").string()},
                       &out);
  CHECK(code == 0);
  auto fate = nlohmann::json::parse(slurp(dir / "out" / "fate.json"));
  CHECK(fate["tag"] == "ExitLeft");
  CHECK(fate["t_event"] == 0.0);
  CHECK(fs::exists(dir / "out" / "resolved-config.json"));
}

TEST_CASE("cli: malformed expressions exit 3 with the syntax offset") {
  const fs::path dir = fresh_dir("syntax");
  spit(dir / "config.json", R"({
    "system": {"kind": "simple"},
    "controller": {"expr": "sin(q"},
    "classify": {"state0": [1.0, 0.0], "horizon": 5.0}
  })");
  std::string err;
  const int code = cli({"classify", "--config", (dir / "config.json").string(), "--out",
                        (dir / "out").string(), "--json"},
                       nullptr, &err);
  CHECK(code == 3);
  auto diag = nlohmann::json::parse(err);
  CHECK(diag["error"] == "SyntaxError");
  CHECK(diag["offset"] == 5);
}

TEST_CASE("cli: survivor scenario reproduces the separatrix value") {
  const fs::path dir = fresh_dir("survivor");
  spit(dir / "config.json", kSurvivorConfig);
  std::string out;
  const int code = cli({"survivor", "--config", (dir / "config.json").string(), "--out",
                        (dir / "out").string()},
                       &out);
  REQUIRE(code == 0);
  auto res = nlohmann::json::parse(slurp(dir / "out" / "survivor.json"));
  CHECK(std::fabs(res["state_star"][1].get<double>() - 0.76536686473017954) < 1e-6);
  CHECK(fs::exists(dir / "out" / "trajectory.csv"));
  auto plot = nlohmann::json::parse(slurp(dir / "out" / "plot.json"));
  CHECK(plot["kind"] == "bracket-history");
}

TEST_CASE("cli: missing command block and unknown config key exit 3") {
  const fs::path dir = fresh_dir("missing");
  spit(dir / "config.json", R"({"system": {"kind": "simple"}, "controller": {"expr": "0"}})");
  CHECK(cli({"classify", "--config", (dir / "config.json").string(), "--out",
             (dir / "out").string()}) == 3);
  spit(dir / "config2.json", R"({"system": {"kind": "simple"}, "controller": {"expr": "0"},
    "classify": {"state0": [1, 0], "horizon": 5.0, "extra": 1}})");
  CHECK(cli({"classify", "--config", (dir / "config2.json").string(), "--out",
             (dir / "out").string()}) == 3);
}

TEST_CASE("cli: runs are bit-reproducible and thread-independent") {
  const fs::path dir = fresh_dir("repro");
  spit(dir / "config.json", R"({
    "system": {"kind": "simple"},
    "controller": {"builtin": "pd", "params": {"k_p": 2.0, "k_d": 1.0, "q_ref": 1.5707963267948966}},
    "integrator": {"rtol": 1e-8, "atol": 1e-10},
    "capture": {"kind": "auto_ball", "mu": [1.5707963267948966, 0.0], "t0": 0.0, "n_samples": 1200},
    "sweep": {
      "axis_x": {"index": 0, "lo": 0.4, "hi": 2.6, "count": 11},
      "axis_y": {"index": 1, "lo": -1.2, "hi": 1.2, "count": 11},
      "base_state": [0, 0], "t0": 0.0, "horizon": 12.0
    }
  })");
  auto run_with = [&](const std::string& name, const std::string& threads) {
    const fs::path out = dir / name;
    REQUIRE(cli({"sweep", "--config", (dir / "config.json").string(), "--out", out.string(),
                 "--threads", threads}) == 0);
    return slurp(out / "basin.json") + slurp(out / "basin.csv");
  };
  const std::string a = run_with("a", "1");
  const std::string b = run_with("b", "1");
  const std::string c = run_with("c", "4");
  CHECK(a == b);
  CHECK(a == c);
}

TEST_CASE("cli: resolved config re-runs to identical artifacts") {
  const fs::path dir = fresh_dir("resolved");
  spit(dir / "config.json", kSurvivorConfig);
  REQUIRE(cli({"survivor", "--config", (dir / "config.json").string(), "--out",
               (dir / "one").string()}) == 0);
  REQUIRE(cli({"survivor", "--config", (dir / "one" / "resolved-config.json").string(), "--out",
               (dir / "two").string()}) == 0);
  CHECK(slurp(dir / "one" / "survivor.json") == slurp(dir / "two" / "survivor.json"));
  CHECK(slurp(dir / "one" / "trajectory.csv") == slurp(dir / "two" / "trajectory.csv"));
  CHECK(slurp(dir / "one" / "resolved-config.json") ==
        slurp(dir / "two" / "resolved-config.json"));
}

TEST_CASE("cli: non-lipschitz controllers carry a warning") {
  const fs::path dir = fresh_dir("warning");
  spit(dir / "config.json", R"({
    "system": {"kind": "simple"},
    "controller": {"expr": "sign(p)*0.1"},
    "classify": {"state0": [1.0, 0.5], "horizon": 5.0}
  })");
  std::string err;
  REQUIRE(cli({"classify", "--config", (dir / "config.json").string(), "--out",
               (dir / "out").string()},
              nullptr, &err) == 0);
  CHECK(err.find("warning") != std::string::npos);
  auto fate = nlohmann::json::parse(slurp(dir / "out" / "fate.json"));
  REQUIRE(fate.contains("warnings"));
  CHECK(fate["warnings"].size() == 1);
}

TEST_CASE("cli: usage errors exit 3") {
  CHECK(cli({"frobnicate", "--config", "x.json"}) == 3);
  CHECK(cli({"classify"}) == 3);
}

TEST_CASE("cli: exhausted budgets exit 2") {
  const fs::path dir = fresh_dir("budget");
  spit(dir / "config.json", R"({
    "system": {"kind": "simple"},
    "controller": {"expr": "0"},
    "integrator": {"max_steps": 5},
    "classify": {"state0": [1.5707963267948966, 0.0], "horizon": 50.0}
  })");
  std::string out;
  const int code = cli({"classify", "--config", (dir / "config.json").string(), "--out",
                        (dir / "out").string()},
                       &out);
  CHECK(code == 2);
  auto fate = nlohmann::json::parse(slurp(dir / "out" / "fate.json"));
  CHECK(fate["tag"] == "Inconclusive");
}
