#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sindyc/differentiation.hpp"
#include "sindyc/regression.hpp"
#include "sindyc/systems.hpp"

namespace sindyc::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kNumerical = 3 };

struct LibrarySettings {
  int poly_degree = 2;
  std::vector<int> trig_frequencies;
  bool include_constant = true;
  bool use_inputs = true;
};

struct DerivativeSettings {
  /// "central", "tv" or "exact" (analytic, needs a system block).
  std::string method = "central";
  double tv_lambda = DerivativeMethod::kDefaultTvLambda;
  int tv_iterations = DerivativeMethod::kDefaultTvIterations;
};

/// Everything a run depends on. Config file first, flags second.
struct ExperimentConfig {
  std::optional<SystemConfig> system;
  /// Overrides applied to `system` for validation runs.
  nlohmann::json validation = nlohmann::json::object();
  LibrarySettings library;
  DerivativeSettings derivative;
  SolverOptions solver;
  /// Fraction of samples used for training in pareto sweeps.
  double train_fraction = 0.8;
  std::string alphas = "1e-6:1e2:25";
  bool refine = true;
  std::optional<long> rank;
  Eigen::Index stride = 1;
  std::string output_dir;
  std::optional<std::uint64_t> seed;

  nlohmann::json to_json() const;
  /// Throws SchemaError / ParamError.
  static ExperimentConfig from_json(const nlohmann::json& doc);
};

ExperimentConfig load_config(const std::filesystem::path& path);

/// Runs the command line; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sindyc::cli
