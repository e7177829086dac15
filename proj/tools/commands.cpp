#include "commands.hpp"

#include <algorithm>
#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "sindyc/dmd.hpp"
#include "sindyc/errors.hpp"
#include "sindyc/library.hpp"
#include "sindyc/sindy.hpp"
#include "sindyc/timeseries.hpp"

namespace sindyc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSystemKeys[] = {"system", "params", "input_map", "signal",
                                       "x0",     "t0",     "t_span",    "dt"};

bool is_system_key(const std::string& key) {
  for (const char* k : kSystemKeys) {
    if (key == k) return true;
  }
  return false;
}

template <typename F>
void with_object(const json& doc, const char* key,
                 std::initializer_list<const char*> known, F&& f) {
  if (!doc.contains(key)) return;
  const json& obj = doc.at(key);
  if (!obj.is_object()) throw SchemaError(std::string("'") + key + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw SchemaError("unknown key '" + it.key() + "' in '" + key + "'");
  }
  f(obj);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path resolve_output(const std::string& flag, const ExperimentConfig& cfg,
                        const std::string& command) {
  fs::path dir;
  if (!flag.empty()) {
    dir = flag;
  } else if (!cfg.output_dir.empty()) {
    dir = cfg.output_dir;
  } else if (const char* root = std::getenv("SINDYC_OUTPUT_ROOT"); root && *root) {
    dir = fs::path(root) / command;
  } else {
    dir = fs::path("sindyc-out") / command;
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string());
  return dir;
}

// Resolved config plus a timestamped sidecar; only the sidecar varies
// between identical runs.
void write_run_files(const fs::path& dir, const ExperimentConfig& cfg,
                     const std::string& command, const json& inputs) {
  json resolved = cfg.to_json();
  resolved["output_dir"] = dir.string();
  write_text(dir / "config.json", resolved.dump(2) + "\n");
  const json sidecar = {{"command", command}, {"inputs", inputs}, {"created_at", utc_timestamp()}};
  write_text(dir / "run.json", sidecar.dump(2) + "\n");
}

void apply_seed(ExperimentConfig& cfg) {
  if (!cfg.seed || !cfg.system || !cfg.system->signal) return;
  cfg.system->signal->seed = *cfg.seed;
}

DerivativeMethod derivative_method(const DerivativeSettings& s) {
  const DerivativeKind kind = parse_derivative_kind(s.method);
  if (kind == DerivativeKind::kTotalVariation) {
    return DerivativeMethod::total_variation(s.tv_lambda, s.tv_iterations);
  }
  DerivativeMethod m;
  m.kind = kind;
  return m;
}

// Derivatives of the full series, aligned column for column.
Eigen::MatrixXd derivatives_for(const TimeSeries& series, const ExperimentConfig& cfg) {
  const DerivativeMethod method = derivative_method(cfg.derivative);
  if (method.kind != DerivativeKind::kSupplied) {
    return differentiate(series, method).values;
  }
  if (!cfg.system) throw ParamError("exact derivatives need a system block in the config");
  if (cfg.system->state_dim() != series.state_dim()) {
    throw ParamError("config system dimension does not match the data");
  }
  if (cfg.system->signal && !series.has_inputs()) {
    throw ParamError("config system is forced but the data has no input column");
  }
  return evaluate_rhs(system_rhs(*cfg.system), series);
}

LibrarySpec library_for(const TimeSeries& series, const ExperimentConfig& cfg) {
  return build_spec(static_cast<int>(series.state_dim()),
                    static_cast<int>(series.input_dim()), cfg.library.poly_degree,
                    cfg.library.trig_frequencies, cfg.library.include_constant);
}

TimeSeries load_data(const std::string& path, const ExperimentConfig& cfg) {
  CsvSchema schema;
  schema.stride = cfg.stride;
  return load_timeseries(path, schema);
}

void write_model_outputs(const fs::path& dir, const SparseModel& model,
                         const std::vector<std::string>& names, std::ostream& out) {
  save_model(model, dir / "model.json");
  const std::string equations = model_to_equations(model, names);
  write_text(dir / "equations.txt", equations);
  out << equations;
}

// Regression data for columns [first, first + count) with both ends trimmed.
ValidationData regression_block(const TimeSeries& series, const Eigen::MatrixXd& deriv,
                                const LibrarySpec& spec, Eigen::Index first,
                                Eigen::Index count) {
  if (count < 3) throw SizeError("split leaves fewer than 3 samples in a segment");
  const Eigen::Index m = count - 2;
  std::optional<Eigen::MatrixXd> inputs;
  if (series.inputs()) inputs = series.inputs()->middleCols(first + 1, m);
  return {evaluate(spec, series.states().middleCols(first + 1, m), inputs).values,
          deriv.middleCols(first + 1, m)};
}

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct IdentifyFlags {
  std::string data;
  bool no_input = false;
  std::optional<std::string> diff;
  std::optional<double> tv_lambda;
  std::optional<int> tv_iters;
  std::optional<std::string> solver;
  std::optional<double> threshold;
  std::optional<double> alpha;
  std::optional<int> degree;
};

ExperimentConfig base_config(const CommonFlags& common) {
  ExperimentConfig cfg = common.config.empty() ? ExperimentConfig{} : load_config(common.config);
  if (common.seed) cfg.seed = common.seed;
  apply_seed(cfg);
  return cfg;
}

void apply_identify_flags(ExperimentConfig& cfg, const IdentifyFlags& f) {
  if (f.diff) cfg.derivative.method = *f.diff;
  if (f.tv_lambda) cfg.derivative.tv_lambda = *f.tv_lambda;
  if (f.tv_iters) cfg.derivative.tv_iterations = *f.tv_iters;
  if (f.solver) cfg.solver.kind = parse_solver_kind(*f.solver);
  if (f.threshold) cfg.solver.threshold = *f.threshold;
  if (f.alpha) cfg.solver.alpha = *f.alpha;
  if (f.degree) cfg.library.poly_degree = *f.degree;
  if (f.no_input) cfg.library.use_inputs = false;
  parse_derivative_kind(cfg.derivative.method);
}

void add_identify_flags(CLI::App* cmd, IdentifyFlags& f) {
  cmd->add_option("--data", f.data, "Training CSV (t, states, u columns)")->required();
  cmd->add_flag("--no-input", f.no_input, "Ignore input columns (plain SINDy)");
  cmd->add_option("--diff", f.diff, "Derivative estimator: central, tv or exact");
  cmd->add_option("--tv-lambda", f.tv_lambda, "TV regularization weight");
  cmd->add_option("--tv-iters", f.tv_iters, "TV fixed-point iterations");
  cmd->add_option("--solver", f.solver, "stlsq or lasso");
  cmd->add_option("--threshold", f.threshold, "STLSQ threshold");
  cmd->add_option("--alpha", f.alpha, "LASSO penalty");
  cmd->add_option("--degree", f.degree, "Polynomial library degree");
}

void add_common_flags(CLI::App* cmd, CommonFlags& c) {
  cmd->add_option("--config", c.config, "JSON experiment config");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--seed", c.seed, "Seed for stochastic signals");
}

int cmd_simulate(const CommonFlags& common, std::optional<double> t_span,
                 std::optional<double> dt, std::ostream& out) {
  ExperimentConfig cfg = base_config(common);
  if (!cfg.system) throw ParamError("simulate needs a system in the config");
  if (t_span) cfg.system->t_span = *t_span;
  if (dt) cfg.system->dt = *dt;
  cfg.system->validate();
  const TimeSeries series = simulate_system(*cfg.system);
  const fs::path dir = resolve_output(common.out, cfg, "simulate");
  save_timeseries(series, dir / "trajectory.csv");
  write_run_files(dir, cfg, "simulate", json::object());
  out << "wrote " << series.samples() << " samples to " << (dir / "trajectory.csv").string()
      << "\n";
  return kOk;
}

int cmd_identify(const CommonFlags& common, const IdentifyFlags& flags, std::ostream& out) {
  ExperimentConfig cfg = base_config(common);
  apply_identify_flags(cfg, flags);
  const TimeSeries full = load_data(flags.data, cfg);
  const Eigen::MatrixXd deriv = derivatives_for(full, cfg);
  const TimeSeries series = cfg.library.use_inputs ? full : full.without_inputs();
  const LibrarySpec spec = library_for(series, cfg);
  SparseModel model = identify(series, deriv, spec, cfg.solver);
  model.metadata.derivative = derivative_method(cfg.derivative).describe();
  if (cfg.system && cfg.system->signal && cfg.system->signal->held()) {
    model.metadata.seed = cfg.system->signal->seed;
  }
  const fs::path dir = resolve_output(common.out, cfg, "identify");
  write_model_outputs(dir, model, series.channel_names(), out);
  write_run_files(dir, cfg, "identify", {{"data", flags.data}, {"no_input", flags.no_input}});
  return kOk;
}

int cmd_pareto(const CommonFlags& common, const IdentifyFlags& flags,
               std::optional<std::string> alphas, bool no_refine,
               std::optional<double> train_fraction, std::ostream& out) {
  ExperimentConfig cfg = base_config(common);
  apply_identify_flags(cfg, flags);
  if (alphas) cfg.alphas = *alphas;
  if (no_refine) cfg.refine = false;
  if (train_fraction) cfg.train_fraction = *train_fraction;
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw ParamError("train_fraction must lie in (0, 1)");
  }
  const std::vector<double> grid = parse_alpha_grid(cfg.alphas);

  const TimeSeries full = load_data(flags.data, cfg);
  const Eigen::MatrixXd deriv = derivatives_for(full, cfg);
  const TimeSeries series = cfg.library.use_inputs ? full : full.without_inputs();
  const LibrarySpec spec = library_for(series, cfg);
  const Eigen::Index n_train = static_cast<Eigen::Index>(
      std::floor(cfg.train_fraction * static_cast<double>(series.samples())));
  const ValidationData train = regression_block(series, deriv, spec, 0, n_train);
  const ValidationData valid =
      regression_block(series, deriv, spec, n_train, series.samples() - n_train);

  const ParetoCurve curve =
      pareto_sweep(train.theta, train.targets, grid, cfg.solver, valid, cfg.refine);
  const fs::path dir = resolve_output(common.out, cfg, "pareto");
  save_pareto_csv(curve, dir / "pareto.csv");

  SparseModel model;
  model.coefficients = {curve.selected_coefficients, spec};
  model.metadata.solver = to_string(cfg.solver.kind);
  model.metadata.alpha_or_threshold = curve.points[curve.selected].alpha;
  model.metadata.fingerprint = fingerprint(full);
  model.metadata.derivative = derivative_method(cfg.derivative).describe();
  model.metadata.condition_number = scaled_condition_number(train.theta);
  const auto& sel = curve.points[curve.selected];
  out << "selected alpha=" << format_double(sel.alpha) << " nnz=" << sel.nnz
      << " validation_error=" << format_double(sel.validation_error) << "\n";
  write_model_outputs(dir, model, series.channel_names(), out);
  write_run_files(dir, cfg, "pareto", {{"data", flags.data}, {"no_input", flags.no_input}});
  return kOk;
}

int cmd_dmd(const CommonFlags& common, const std::string& data, bool control,
            std::optional<long> rank, std::ostream& out) {
  ExperimentConfig cfg = base_config(common);
  if (rank) cfg.rank = rank;
  const TimeSeries series = load_data(data, cfg);
  if (control && !series.has_inputs()) {
    throw ParamError("--control needs input columns in the data");
  }
  const std::optional<Eigen::Index> r =
      cfg.rank ? std::optional<Eigen::Index>(*cfg.rank) : std::nullopt;
  json doc;
  Eigen::VectorXcd eig;
  if (control) {
    const DmdcResult res = dmdc(to_snapshot_pair(series), r);
    doc = dmdc_to_json(res);
    eig = res.eigenvalues;
    for (const auto& w : res.warnings) out << "warning: " << w << "\n";
  } else {
    const DmdResult res = dmd(to_snapshot_pair(series.without_inputs()), r);
    doc = dmd_to_json(res);
    eig = res.eigenvalues;
  }
  const fs::path dir = resolve_output(common.out, cfg, "dmd");
  write_text(dir / "dmd.json", doc.dump(2) + "\n");
  write_run_files(dir, cfg, "dmd", {{"data", data}, {"control", control}});
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    out << "lambda" << i + 1 << " = " << format_double(eig(i).real()) << " "
        << (eig(i).imag() < 0 ? "- " : "+ ") << format_double(std::abs(eig(i).imag()))
        << "i\n";
  }
  return kOk;
}

struct Prediction {
  std::string label;
  Eigen::MatrixXd states;  // n x samples, NaN after divergence
  std::optional<double> divergence_time;
};

int cmd_validate(const CommonFlags& common, const std::vector<std::string>& models,
                 std::optional<double> horizon, std::ostream& out) {
  ExperimentConfig cfg = base_config(common);
  if (!cfg.system) throw ParamError("validate needs a system in the config");
  json truth_doc = system_config_to_json(*cfg.system);
  for (auto it = cfg.validation.begin(); it != cfg.validation.end(); ++it) {
    truth_doc[it.key()] = it.value();
  }
  const SystemConfig truth_cfg = system_config_from_json(truth_doc);
  const TimeSeries truth = simulate_system(truth_cfg);
  const Eigen::Index n = truth.state_dim();
  const Eigen::Index samples = truth.samples();
  const double dt = truth.dt();

  std::vector<Prediction> predictions;
  for (const auto& path : models) {
    const SparseModel model = load_model(path);
    if (model.state_dim() != n) {
      throw ParamError("model " + path + " has " + std::to_string(model.state_dim()) +
                       " states, validation system has " + std::to_string(n));
    }
    if (model.input_dim() > truth.input_dim()) {
      throw ParamError("model " + path + " needs inputs the validation system lacks");
    }
    InputFunction input_fn;
    if (model.input_dim() > 0) {
      if (truth_cfg.signal->held()) {
        // Replay the realized samples with the same zero-order hold.
        const Eigen::MatrixXd u = *truth.inputs();
        const double t0 = truth_cfg.t0;
        input_fn = [u, t0, dt, samples](double t) {
          auto k = static_cast<Eigen::Index>(std::floor((t - t0) / dt + 1e-6));
          k = std::clamp<Eigen::Index>(k, 0, samples - 1);
          return Eigen::VectorXd(u.col(k));
        };
      } else {
        const SignalFn sig = make_signal(*truth_cfg.signal);
        input_fn = [sig](double t) { return Eigen::VectorXd::Constant(1, sig(t)); };
      }
    }
    Prediction p{fs::path(path).stem().string(),
                 Eigen::MatrixXd::Constant(n, samples, std::nan("")), std::nullopt};
    const Eigen::VectorXd x0 = truth.states().col(0);
    try {
      p.states = simulate(model, x0, input_fn, truth_cfg.t_span, dt, truth_cfg.t0).states();
    } catch (const DivergenceError& e) {
      p.divergence_time = e.time();
      const auto good = static_cast<Eigen::Index>(
          std::floor((e.time() - truth_cfg.t0) / dt + 1e-6)) - 1;
      if (good >= 1) {
        const Eigen::MatrixXd partial =
            simulate(model, x0, input_fn, static_cast<double>(good) * dt, dt, truth_cfg.t0)
                .states();
        p.states.leftCols(partial.cols()) = partial;
      } else {
        p.states.col(0) = x0;
      }
    }
    // Labels must be unique to keep column names distinct; models saved as
    // <run>/model.json are told apart by their directory.
    auto taken = [&](const std::string& label) {
      return std::any_of(predictions.begin(), predictions.end(),
                         [&](const Prediction& o) { return o.label == label; });
    };
    if (taken(p.label)) {
      const std::string dir_name = fs::path(path).parent_path().filename().string();
      if (!dir_name.empty()) p.label = dir_name;
    }
    if (taken(p.label)) p.label += "_" + std::to_string(predictions.size());
    predictions.push_back(std::move(p));
  }

  const fs::path dir = resolve_output(common.out, cfg, "validate");
  const auto names = truth.state_names();
  {
    std::ostringstream csv;
    csv << "t";
    for (const auto& nm : names) csv << ",true_" << nm;
    for (const auto& p : predictions) {
      for (const auto& nm : names) csv << "," << p.label << "_" << nm;
    }
    if (truth.has_inputs()) csv << ",u";
    csv << "\n";
    for (Eigen::Index k = 0; k < samples; ++k) {
      csv << format_double(truth.times()(k));
      for (Eigen::Index i = 0; i < n; ++i) csv << "," << format_double(truth.states()(i, k));
      for (const auto& p : predictions) {
        for (Eigen::Index i = 0; i < n; ++i) csv << "," << format_double(p.states(i, k));
      }
      if (truth.has_inputs()) csv << "," << format_double((*truth.inputs())(0, k));
      csv << "\n";
    }
    write_text(dir / "comparison.csv", csv.str());
  }

  const double span = horizon ? *horizon : truth_cfg.t_span;
  if (!(span > 0.0)) throw ParamError("horizon must be positive");
  const Eigen::Index count =
      std::min<Eigen::Index>(samples, static_cast<Eigen::Index>(std::llround(span / dt)) + 1);
  std::ostringstream summary;
  summary << "model,channel,rms,relative_rms,diverged,divergence_time\n";
  for (const auto& p : predictions) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::ArrayXd tr = truth.states().row(i).head(count).transpose().array();
      const Eigen::ArrayXd pr = p.states.row(i).head(count).transpose().array();
      const double rms = std::sqrt((pr - tr).square().mean());
      const double sd = std::sqrt((tr - tr.mean()).square().mean());
      const double rel = std::isfinite(rms) ? rms / sd : std::numeric_limits<double>::infinity();
      const double rms_out = std::isfinite(rms) ? rms : std::numeric_limits<double>::infinity();
      summary << p.label << "," << names[static_cast<std::size_t>(i)] << ","
              << format_double(rms_out) << "," << format_double(rel) << ","
              << (p.divergence_time ? 1 : 0) << ","
              << (p.divergence_time ? format_double(*p.divergence_time) : std::string("nan"))
              << "\n";
    }
  }
  write_text(dir / "summary.csv", summary.str());
  out << summary.str();
  write_run_files(dir, cfg, "validate", {{"models", models}});
  return kOk;
}

}  // namespace

json ExperimentConfig::to_json() const {
  json doc = system ? system_config_to_json(*system) : json::object();
  doc["validation"] = validation;
  doc["library"] = {{"poly_degree", library.poly_degree},
                    {"trig_frequencies", library.trig_frequencies},
                    {"include_constant", library.include_constant},
                    {"use_inputs", library.use_inputs}};
  doc["differentiation"] = {{"method", derivative.method},
                            {"tv_lambda", derivative.tv_lambda},
                            {"tv_iterations", derivative.tv_iterations}};
  doc["solver"] = {{"kind", to_string(solver.kind)}, {"threshold", solver.threshold},
                   {"alpha", solver.alpha},          {"max_rounds", solver.max_rounds},
                   {"max_iters", solver.max_iters},  {"tol", solver.tol}};
  doc["split"] = {{"train_fraction", train_fraction}};
  doc["pareto"] = {{"alphas", alphas}, {"refine", refine}};
  doc["dmd"] = {{"rank", rank ? json(*rank) : json(nullptr)}};
  doc["data"] = {{"stride", stride}};
  doc["output_dir"] = output_dir;
  doc["seed"] = seed ? json(*seed) : json(nullptr);
  return doc;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  try {
    if (!doc.is_object()) throw SchemaError("config must be a JSON object");
    ExperimentConfig cfg;
    json system_doc = json::object();
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      const std::string& key = it.key();
      if (is_system_key(key)) {
        system_doc[key] = it.value();
      } else if (key != "validation" && key != "library" && key != "differentiation" &&
                 key != "solver" && key != "split" && key != "pareto" && key != "dmd" &&
                 key != "data" && key != "output_dir" && key != "seed") {
        throw SchemaError("unknown config key '" + key + "'");
      }
    }
    if (system_doc.contains("system")) cfg.system = system_config_from_json(system_doc);
    if (doc.contains("validation")) {
      const json& v = doc.at("validation");
      if (!v.is_object()) throw SchemaError("'validation' must be an object");
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (it.key() != "signal" && it.key() != "x0" && it.key() != "t0" &&
            it.key() != "t_span" && it.key() != "dt") {
          throw SchemaError("unknown key '" + it.key() + "' in 'validation'");
        }
      }
      cfg.validation = v;
    }
    with_object(doc, "library",
                {"poly_degree", "trig_frequencies", "include_constant", "use_inputs"},
                [&](const json& o) {
                  cfg.library.poly_degree = o.value("poly_degree", cfg.library.poly_degree);
                  cfg.library.trig_frequencies =
                      o.value("trig_frequencies", cfg.library.trig_frequencies);
                  cfg.library.include_constant =
                      o.value("include_constant", cfg.library.include_constant);
                  cfg.library.use_inputs = o.value("use_inputs", cfg.library.use_inputs);
                });
    with_object(doc, "differentiation", {"method", "tv_lambda", "tv_iterations"},
                [&](const json& o) {
                  cfg.derivative.method = o.value("method", cfg.derivative.method);
                  cfg.derivative.tv_lambda = o.value("tv_lambda", cfg.derivative.tv_lambda);
                  cfg.derivative.tv_iterations =
                      o.value("tv_iterations", cfg.derivative.tv_iterations);
                });
    parse_derivative_kind(cfg.derivative.method);
    with_object(doc, "solver", {"kind", "threshold", "alpha", "max_rounds", "max_iters", "tol"},
                [&](const json& o) {
                  if (o.contains("kind")) {
                    cfg.solver.kind = parse_solver_kind(o.at("kind").get<std::string>());
                  }
                  cfg.solver.threshold = o.value("threshold", cfg.solver.threshold);
                  cfg.solver.alpha = o.value("alpha", cfg.solver.alpha);
                  cfg.solver.max_rounds = o.value("max_rounds", cfg.solver.max_rounds);
                  cfg.solver.max_iters = o.value("max_iters", cfg.solver.max_iters);
                  cfg.solver.tol = o.value("tol", cfg.solver.tol);
                });
    with_object(doc, "split", {"train_fraction"}, [&](const json& o) {
      cfg.train_fraction = o.value("train_fraction", cfg.train_fraction);
    });
    with_object(doc, "pareto", {"alphas", "refine"}, [&](const json& o) {
      cfg.alphas = o.value("alphas", cfg.alphas);
      cfg.refine = o.value("refine", cfg.refine);
    });
    with_object(doc, "dmd", {"rank"}, [&](const json& o) {
      if (o.contains("rank") && !o.at("rank").is_null()) cfg.rank = o.at("rank").get<long>();
    });
    with_object(doc, "data", {"stride"}, [&](const json& o) {
      cfg.stride = o.value("stride", cfg.stride);
    });
    if (cfg.stride < 1) throw ParamError("data.stride must be >= 1");
    cfg.output_dir = doc.value("output_dir", std::string());
    if (doc.contains("seed") && !doc.at("seed").is_null()) {
      cfg.seed = doc.at("seed").get<std::uint64_t>();
    }
    return cfg;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed config: ") + e.what());
  }
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return ExperimentConfig::from_json(doc);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"System identification with SINDy, SINDYc, DMD and DMDc"};
  app.require_subcommand(1);

  CommonFlags common;
  IdentifyFlags idf;
  std::optional<double> t_span, dt, horizon, train_fraction;
  std::optional<std::string> alphas;
  std::optional<long> rank;
  std::vector<std::string> models;
  std::string dmd_data;
  bool control = false;
  bool no_refine = false;

  CLI::App* sim = app.add_subcommand("simulate", "Integrate a benchmark system to CSV");
  add_common_flags(sim, common);
  sim->add_option("--t-span", t_span, "Simulated time units");
  sim->add_option("--dt", dt, "Integration step");

  CLI::App* ident = app.add_subcommand("identify", "Fit a sparse model to CSV data");
  add_common_flags(ident, common);
  add_identify_flags(ident, idf);

  CLI::App* val = app.add_subcommand("validate", "Compare models against a simulated truth");
  add_common_flags(val, common);
  val->add_option("--model", models, "Model JSON (repeatable)")->required();
  val->add_option("--horizon", horizon, "Time span used for the RMS summary");

  CLI::App* par = app.add_subcommand("pareto", "Sweep the sparsity knob");
  add_common_flags(par, common);
  add_identify_flags(par, idf);
  par->add_option("--alphas", alphas, "lo:hi:count (log-spaced) or a comma list");
  par->add_flag("--no-refine", no_refine, "Skip the refinement pass");
  par->add_option("--train-fraction", train_fraction, "Training share of the samples");

  CLI::App* dm = app.add_subcommand("dmd", "Dynamic mode decomposition of CSV data");
  add_common_flags(dm, common);
  dm->add_option("--data", dmd_data, "Snapshot CSV")->required();
  dm->add_flag("--control", control, "Fit X' = A X + B U using the input columns");
  dm->add_option("--rank", rank, "SVD truncation rank");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*sim) return cmd_simulate(common, t_span, dt, out);
    if (*ident) return cmd_identify(common, idf, out);
    if (*val) return cmd_validate(common, models, horizon, out);
    if (*par) return cmd_pareto(common, idf, alphas, no_refine, train_fraction, out);
    if (*dm) return cmd_dmd(common, dmd_data, control, rank, out);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << " at t=" << e.time() << "\n";
    return kNumerical;
  } catch (const RankError& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace sindyc::cli
