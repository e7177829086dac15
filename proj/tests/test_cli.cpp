#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "sindyc/dmd.hpp"
#include "sindyc/errors.hpp"
#include "sindyc/sindy.hpp"
#include "sindyc/timeseries.hpp"

using namespace sindyc;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result sindyc_run(std::vector<std::string> args) {
  args.insert(args.begin(), "sindyc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sindyc_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_json(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path.string();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const fs::path& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

const char* kLvConfig = R"({
  "system": "lotka-volterra",
  "signal": {"kind": "sum-of-sinusoids",
             "components": [{"amplitude": 2, "frequency": 1, "phase": 0},
                            {"amplitude": 2, "frequency": 0.1, "phase": 0}]},
  "t_span": 20, "dt": 0.001
})";

}  // namespace

TEST_CASE("simulate writes the full Lorenz trajectory") {
  const fs::path dir = fresh_dir("sim_lorenz");
  const auto cfg = write_json(dir / "cfg.json", R"({"system": "lorenz", "t_span": 50})");
  const Result r = sindyc_run({"simulate", "--config", cfg, "--out", (dir / "out").string()});
  REQUIRE(r.code == 0);
  CHECK(count_lines(dir / "out" / "trajectory.csv") == 50002);  // header + 50001 samples
  CHECK(fs::exists(dir / "out" / "config.json"));
  CHECK(fs::exists(dir / "out" / "run.json"));
  const auto resolved = nlohmann::json::parse(read_file(dir / "out" / "config.json"));
  CHECK(resolved.at("system") == "lorenz");
}

TEST_CASE("invalid input exits with code 2") {
  const fs::path dir = fresh_dir("bad");
  const auto bad_system = write_json(dir / "a.json", R"({"system": "duffing"})");
  Result r = sindyc_run({"simulate", "--config", bad_system, "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("duffing") != std::string::npos);

  const auto bad_key = write_json(dir / "b.json", R"({"system": "lorenz", "colour": 1})");
  CHECK(sindyc_run({"simulate", "--config", bad_key}).code == 2);
  CHECK(sindyc_run({"simulate", "--config", (dir / "missing.json").string()}).code == 2);
  CHECK(sindyc_run({"frobnicate"}).code == 2);
  CHECK(sindyc_run({}).code == 2);
  CHECK(sindyc_run({"identify"}).code == 2);
  CHECK(sindyc_run({"--help"}).code == 0);
}

TEST_CASE("runs are deterministic given config and seed") {
  const fs::path dir = fresh_dir("determinism");
  const auto cfg = write_json(dir / "cfg.json", R"({
    "system": "lorenz", "t_span": 2,
    "signal": {"kind": "state-feedback", "offset": 26, "gains": [-1, 0, 0], "noise_std": 1}})");
  std::vector<std::string> trajectories, configs;
  for (const char* sub : {"a", "b"}) {
    REQUIRE(sindyc_run({"simulate", "--config", cfg, "--seed", "5", "--out",
                        (dir / "a").string()}).code == 0);
    trajectories.push_back(read_file(dir / "a" / "trajectory.csv"));
    configs.push_back(read_file(dir / "a" / "config.json"));
    fs::copy_file(dir / "a" / "trajectory.csv", dir / (std::string(sub) + ".csv"));
  }
  CHECK(trajectories[0] == trajectories[1]);
  CHECK(configs[0] == configs[1]);
  fs::create_directories(dir / "b");
  fs::copy_file(dir / "b.csv", dir / "b" / "trajectory.csv");
  REQUIRE(sindyc_run({"simulate", "--config", cfg, "--seed", "6", "--out",
                      (dir / "c").string()}).code == 0);
  CHECK(read_file(dir / "a" / "trajectory.csv") != read_file(dir / "c" / "trajectory.csv"));

  std::vector<std::string> models;
  for (const char* sub : {"a", "b"}) {
    REQUIRE(sindyc_run({"identify", "--data", (dir / sub / "trajectory.csv").string(), "--out",
                        (dir / "model").string()}).code == 0);
    models.push_back(read_file(dir / "model" / "model.json"));
  }
  CHECK(models[0] == models[1]);
}

TEST_CASE("identify on forced Lotka-Volterra") {
  const fs::path dir = fresh_dir("identify");
  const auto cfg = write_json(dir / "cfg.json", kLvConfig);
  REQUIRE(sindyc_run({"simulate", "--config", cfg, "--out", (dir / "sim").string()}).code == 0);
  const std::string data = (dir / "sim" / "trajectory.csv").string();

  REQUIRE(sindyc_run({"identify", "--data", data, "--out", (dir / "c").string()}).code == 0);
  const SparseModel sindyc = load_model(dir / "c" / "model.json");
  CHECK(count_active(sindyc.coefficients.values) == 5);
  CHECK(sindyc.input_dim() == 1);
  CHECK(read_file(dir / "c" / "equations.txt").find("u^2") != std::string::npos);

  REQUIRE(sindyc_run({"identify", "--data", data, "--no-input", "--out",
                      (dir / "naive").string()}).code == 0);
  CHECK(load_model(dir / "naive" / "model.json").input_dim() == 0);

  REQUIRE(sindyc_run({"identify", "--config", cfg, "--data", data, "--diff", "exact", "--out",
                      (dir / "exact").string()}).code == 0);
  const SparseModel exact = load_model(dir / "exact" / "model.json");
  CHECK(count_active(exact.coefficients.values) == 5);

  const auto tv = sindyc_run({"identify", "--data", data, "--diff", "tv", "--tv-lambda", "1e-5",
                              "--tv-iters", "5", "--out", (dir / "tv").string()});
  CHECK(tv.code == 0);
  CHECK(sindyc_run({"identify", "--data", data, "--diff", "spline"}).code == 2);
  CHECK(sindyc_run({"identify", "--data", data, "--diff", "exact"}).code == 2);
}

TEST_CASE("degree-1 library at threshold 0 gives a dense linear model") {
  const fs::path dir = fresh_dir("linear");
  const auto cfg = write_json(dir / "cfg.json", R"({"system": "lorenz", "t_span": 1,
    "input_map": "none", "library": {"include_constant": false}})");
  REQUIRE(sindyc_run({"simulate", "--config", cfg, "--out", (dir / "sim").string()}).code == 0);
  REQUIRE(sindyc_run({"identify", "--config", cfg, "--data",
                      (dir / "sim" / "trajectory.csv").string(), "--degree", "1", "--threshold",
                      "0", "--out", (dir / "m").string()}).code == 0);
  const SparseModel m = load_model(dir / "m" / "model.json");
  CHECK(m.coefficients.values.rows() == 3);
  CHECK(m.coefficients.values.cols() == 3);
  CHECK(count_active(m.coefficients.values) == 9);
}

TEST_CASE("validate reports per-channel errors") {
  const fs::path dir = fresh_dir("validate");
  const LibrarySpec spec = build_spec(3, 1, 2);
  Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(3, spec.size());
  auto idx = [&](std::vector<int> e) {
    for (std::size_t j = 0; j < spec.terms.size(); ++j) {
      if (spec.terms[j].exponents == e) return static_cast<Eigen::Index>(j);
    }
    return Eigen::Index{-1};
  };
  xi(0, idx({1, 0, 0, 0})) = -10;
  xi(0, idx({0, 1, 0, 0})) = 10;
  xi(0, idx({0, 0, 0, 1})) = 1;
  xi(1, idx({1, 0, 0, 0})) = 28;
  xi(1, idx({0, 1, 0, 0})) = -1;
  xi(1, idx({1, 0, 1, 0})) = -1;
  xi(2, idx({1, 1, 0, 0})) = 1;
  xi(2, idx({0, 0, 1, 0})) = -8.0 / 3.0;
  SparseModel model;
  model.coefficients = {xi, spec};
  save_model(model, dir / "sindyc.json");

  const auto cfg = write_json(dir / "cfg.json", R"({"system": "lorenz",
    "signal": {"kind": "sum-of-sinusoids", "components": [{"amplitude": 50, "frequency": 10}]},
    "validation": {"t_span": 2}})");
  const Result r = sindyc_run({"validate", "--config", cfg, "--model",
                               (dir / "sindyc.json").string(), "--out", (dir / "v").string()});
  REQUIRE(r.code == 0);
  const std::string summary = read_file(dir / "v" / "summary.csv");
  CHECK(summary.rfind("model,channel,rms,relative_rms,diverged,divergence_time\n", 0) == 0);
  CHECK(count_lines(dir / "v" / "summary.csv") == 4);
  CHECK(summary.find("sindyc,x1,") != std::string::npos);
  CHECK(count_lines(dir / "v" / "comparison.csv") == 2002);

  const auto zero = write_json(dir / "zero.json", R"({"system": "lorenz",
    "signal": {"kind": "constant"}, "validation": {"t_span": 0}})");
  CHECK(sindyc_run({"validate", "--config", zero, "--model", (dir / "sindyc.json").string(),
                    "--out", (dir / "z").string()}).code == 2);

  const auto lv = write_json(dir / "lv.json", kLvConfig);
  CHECK(sindyc_run({"validate", "--config", lv, "--model", (dir / "sindyc.json").string(),
                    "--out", (dir / "m").string()}).code == 2);
}

TEST_CASE("validate flags diverging models") {
  const fs::path dir = fresh_dir("diverge");
  SparseModel model;
  model.coefficients = {(Eigen::MatrixXd(2, 3) << 0, 5, 0, 0, 0, 5).finished(), build_spec(2, 0, 1)};
  save_model(model, dir / "bad.json");
  const auto cfg = write_json(dir / "cfg.json", R"({"system": "lotka-volterra", "t_span": 10})");
  const Result r = sindyc_run({"validate", "--config", cfg, "--model",
                               (dir / "bad.json").string(), "--out", (dir / "v").string()});
  REQUIRE(r.code == 0);
  CHECK(read_file(dir / "v" / "summary.csv").find(",1,") != std::string::npos);
}

TEST_CASE("pareto sweeps") {
  const fs::path dir = fresh_dir("pareto");
  const auto cfg = write_json(dir / "cfg.json", kLvConfig);
  REQUIRE(sindyc_run({"simulate", "--config", cfg, "--out", (dir / "sim").string()}).code == 0);
  const std::string data = (dir / "sim" / "trajectory.csv").string();

  REQUIRE(sindyc_run({"pareto", "--data", data, "--alphas", "0.1", "--out",
                      (dir / "one").string()}).code == 0);
  CHECK(count_lines(dir / "one" / "pareto.csv") == 2);

  REQUIRE(sindyc_run({"pareto", "--config", cfg, "--data", data, "--diff", "exact", "--alphas",
                      "1e-6:1e2:25", "--out", (dir / "lv").string()}).code == 0);
  CHECK(count_active(load_model(dir / "lv" / "model.json").coefficients.values) == 5);
  CHECK(count_lines(dir / "lv" / "pareto.csv") > 26);

  REQUIRE(sindyc_run({"pareto", "--config", cfg, "--data", data, "--diff", "exact", "--alphas",
                      "1e-6:1e2:25", "--no-refine", "--out", (dir / "coarse").string()})
              .code == 0);
  CHECK(count_lines(dir / "coarse" / "pareto.csv") == 26);

  CHECK(sindyc_run({"pareto", "--data", data, "--alphas", "1:0.1:3"}).code == 2);
  CHECK(sindyc_run({"pareto", "--data", data, "--train-fraction", "1.5"}).code == 2);
}

TEST_CASE("dmd command") {
  const fs::path dir = fresh_dir("dmd");
  Eigen::MatrixXd decay(1, 4);
  decay << 1, 0.9, 0.81, 0.729;
  save_timeseries(TimeSeries::uniform(0, 1, decay), dir / "decay.csv");
  REQUIRE(sindyc_run({"dmd", "--data", (dir / "decay.csv").string(), "--out",
                      (dir / "d").string()}).code == 0);
  const DmdResult r = dmd_from_json(nlohmann::json::parse(read_file(dir / "d" / "dmd.json")));
  CHECK(std::abs(r.eigenvalues(0) - 0.9) < 1e-12);

  CHECK(sindyc_run({"dmd", "--data", (dir / "decay.csv").string(), "--control"}).code == 2);

  Eigen::Matrix2d rot;
  rot << std::cos(0.2), -std::sin(0.2), std::sin(0.2), std::cos(0.2);
  Eigen::MatrixXd x(2, 30);
  x.col(0) = Eigen::Vector2d(1, 0.5);
  for (Eigen::Index k = 1; k < 30; ++k) x.col(k) = rot * x.col(k - 1);
  save_timeseries(TimeSeries::uniform(0, 1, x), dir / "rot.csv");
  REQUIRE(sindyc_run({"dmd", "--data", (dir / "rot.csv").string(), "--out",
                      (dir / "r").string()}).code == 0);
  const DmdResult rr = dmd_from_json(nlohmann::json::parse(read_file(dir / "r" / "dmd.json")));
  REQUIRE(rr.eigenvalues.size() == 2);
  CHECK(std::abs(rr.eigenvalues(0) - std::conj(rr.eigenvalues(1))) < 1e-10);
  CHECK(std::abs(rr.eigenvalues(0).imag() - std::sin(0.2)) < 1e-8);

  save_timeseries(TimeSeries::uniform(0, 1, Eigen::MatrixXd::Zero(2, 5)), dir / "zero.csv");
  CHECK(sindyc_run({"dmd", "--data", (dir / "zero.csv").string(), "--out",
                    (dir / "z").string()}).code == 3);
  CHECK(sindyc_run({"dmd", "--data", (dir / "rot.csv").string(), "--rank", "5"}).code == 2);

  save_timeseries(TimeSeries::uniform(0, 1, x, Eigen::MatrixXd::Random(1, 30)), dir / "ctl.csv");
  REQUIRE(sindyc_run({"dmd", "--data", (dir / "ctl.csv").string(), "--control", "--out",
                      (dir / "c").string()}).code == 0);
  CHECK(dmdc_from_json(nlohmann::json::parse(read_file(dir / "c" / "dmd.json")))
            .state_operator.isApprox(rot, 1e-8));
}

TEST_CASE("output root comes from the environment") {
  const fs::path root = fresh_dir("env_root");
  const fs::path dir = fresh_dir("env_cfg");
  const auto cfg = write_json(dir / "cfg.json", R"({"system": "lorenz", "t_span": 0.1})");
  setenv("SINDYC_OUTPUT_ROOT", root.c_str(), 1);
  const Result r = sindyc_run({"simulate", "--config", cfg});
  unsetenv("SINDYC_OUTPUT_ROOT");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(root / "simulate" / "trajectory.csv"));
}

TEST_CASE("experiment config round trips through JSON") {
  const auto doc = nlohmann::json::parse(R"({
    "system": "lorenz", "input_map": "cubic", "t_span": 3,
    "library": {"poly_degree": 3, "trig_frequencies": [1]},
    "differentiation": {"method": "tv", "tv_lambda": 1e-4, "tv_iterations": 30},
    "solver": {"kind": "lasso", "alpha": 0.2},
    "split": {"train_fraction": 0.7}, "pareto": {"alphas": "0,0.1", "refine": false},
    "dmd": {"rank": 2}, "data": {"stride": 4}, "seed": 3,
    "validation": {"t_span": 1}})");
  const cli::ExperimentConfig a = cli::ExperimentConfig::from_json(doc);
  CHECK(a.library.poly_degree == 3);
  CHECK(a.derivative.method == "tv");
  CHECK(a.solver.kind == SolverKind::kLasso);
  CHECK(a.stride == 4);
  CHECK(a.rank == 2);
  CHECK(a.seed == 3u);
  const cli::ExperimentConfig b = cli::ExperimentConfig::from_json(a.to_json());
  CHECK(b.to_json() == a.to_json());
  CHECK_THROWS_AS(cli::ExperimentConfig::from_json({{"library", {{"degree", 2}}}}), SchemaError);
  CHECK_THROWS_AS(cli::ExperimentConfig::from_json({{"validation", {{"system", "x"}}}}),
                  SchemaError);
}
