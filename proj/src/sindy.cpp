#include "sindyc/sindy.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "sindyc/errors.hpp"

namespace sindyc {

namespace {

void check_library_matches(const TimeSeries& series, const LibrarySpec& library) {
  if (library.state_dim != series.state_dim()) {
    throw ParamError("library has " + std::to_string(library.state_dim) +
                     " state channels but the series has " +
                     std::to_string(series.state_dim()));
  }
  if (library.input_dim != series.input_dim()) {
    throw ParamError("library has " + std::to_string(library.input_dim) +
                     " input channels but the series has " +
                     std::to_string(series.input_dim()));
  }
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::vector<std::string> default_channels(const LibrarySpec& spec) {
  auto names = default_names("x", spec.state_dim);
  const auto u = spec.input_dim == 1 ? std::vector<std::string>{"u"}
                                     : default_names("u", spec.input_dim);
  names.insert(names.end(), u.begin(), u.end());
  return names;
}

nlohmann::json matrix_rows(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_rows(const nlohmann::json& rows, Eigen::Index expect_rows,
                                 Eigen::Index expect_cols) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != expect_rows) {
    throw SchemaError("coefficient matrix must have " + std::to_string(expect_rows) +
                      " rows");
  }
  Eigen::MatrixXd m(expect_rows, expect_cols);
  for (Eigen::Index i = 0; i < expect_rows; ++i) {
    const auto row = rows.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != expect_cols) {
      throw SchemaError("coefficient row " + std::to_string(i) + " must have " +
                        std::to_string(expect_cols) + " entries");
    }
    for (Eigen::Index j = 0; j < expect_cols; ++j) m(i, j) = row[static_cast<std::size_t>(j)];
  }
  if (!m.allFinite()) throw SchemaError("coefficients must be finite");
  return m;
}

}  // namespace

bool ModelMetadata::operator==(const ModelMetadata& o) const {
  const bool same_cond = condition_number == o.condition_number ||
                         (std::isnan(condition_number) && std::isnan(o.condition_number));
  return solver == o.solver && alpha_or_threshold == o.alpha_or_threshold &&
         seed == o.seed && fingerprint == o.fingerprint && derivative == o.derivative &&
         same_cond && warnings == o.warnings;
}

bool SparseModel::operator==(const SparseModel& o) const {
  return coefficients.library == o.coefficients.library &&
         coefficients.values.rows() == o.coefficients.values.rows() &&
         coefficients.values.cols() == o.coefficients.values.cols() &&
         coefficients.values == o.coefficients.values && metadata == o.metadata;
}

std::string fingerprint(const TimeSeries& series) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const double* data, Eigen::Index count) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < static_cast<std::size_t>(count) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  feed(series.times().data(), series.times().size());
  feed(series.states().data(), series.states().size());
  if (series.inputs()) feed(series.inputs()->data(), series.inputs()->size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SparseModel identify(const TimeSeries& series, const LibrarySpec& library,
                     const DerivativeMethod& method, const SolverOptions& solver) {
  check_library_matches(series, library);
  if (method.kind == DerivativeKind::kSupplied) {
    throw ParamError("supplied derivatives must be passed explicitly");
  }
  const DerivativeEstimate estimate = differentiate(series, method);
  SparseModel model = identify(series, estimate.values, library, solver);
  model.metadata.derivative = method.describe();
  return model;
}

SparseModel identify(const TimeSeries& series, const Eigen::MatrixXd& derivatives,
                     const LibrarySpec& library, const SolverOptions& solver) {
  check_library_matches(series, library);
  if (derivatives.rows() != series.state_dim() || derivatives.cols() != series.samples()) {
    throw ShapeError("derivatives must be state_dim x samples");
  }
  if (series.samples() < 3) throw SizeError("identification needs at least 3 samples");

  const Eigen::Index m = series.samples() - 2;
  std::optional<Eigen::MatrixXd> inputs;
  if (series.inputs()) inputs = series.inputs()->middleCols(1, m);
  const LibraryMatrix theta =
      evaluate(library, series.states().middleCols(1, m), inputs);
  const Eigen::MatrixXd targets = derivatives.middleCols(1, m);

  SparseModel model;
  model.coefficients = {solve_sparse(theta.values, targets, solver), library};
  model.metadata.solver = to_string(solver.kind);
  model.metadata.alpha_or_threshold = solver.sparsity();
  model.metadata.fingerprint = fingerprint(series);
  model.metadata.derivative = "supplied";
  model.metadata.condition_number = scaled_condition_number(theta.values);
  if (m < library.size() + 1) {
    model.metadata.warnings.push_back("fewer usable samples than library terms");
  }
  return model;
}

FeedbackLaw identify_feedback(const TimeSeries& series, const LibrarySpec& library,
                              const SolverOptions& solver) {
  if (!series.inputs()) throw ParamError("feedback identification needs inputs");
  if (library.input_dim != 0) throw ParamError("feedback library must be state-only");
  if (library.state_dim != series.state_dim()) {
    throw ParamError("library state dimension does not match the series");
  }
  const LibraryMatrix theta = evaluate(library, series.states());
  return {{solve_sparse(theta.values, *series.inputs(), solver), library}};
}

Eigen::VectorXd model_rhs(const SparseModel& model, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& u) {
  if (x.size() != model.state_dim() || u.size() != model.input_dim()) {
    throw ShapeError("model expects " + std::to_string(model.state_dim()) +
                     " states and " + std::to_string(model.input_dim()) + " inputs");
  }
  Eigen::VectorXd theta(model.library().size());
  evaluate_point(model.library(), x, u, theta);
  return model.coefficients.values * theta;
}

TimeSeries simulate(const SparseModel& model, const Eigen::VectorXd& x0,
                    const InputFunction& input_fn, double t_span, double dt,
                    double t0) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParamError("dt must be positive");
  if (!(t_span >= dt * (1.0 - 1e-12)) || !std::isfinite(t_span)) {
    throw ParamError("t_span must be >= dt");
  }
  if (x0.size() != model.state_dim()) throw ParamError("x0 has the wrong length");
  const int q = model.input_dim();
  if (q > 0 && !input_fn) throw ParamError("model has inputs but no input function");

  const auto steps = static_cast<Eigen::Index>(std::llround(t_span / dt));
  Eigen::MatrixXd states(x0.size(), steps + 1);
  std::optional<Eigen::MatrixXd> inputs;
  if (q > 0) inputs = Eigen::MatrixXd(q, steps + 1);

  auto input_at = [&](double t) -> Eigen::VectorXd {
    if (q == 0) return Eigen::VectorXd();
    Eigen::VectorXd u = input_fn(t);
    if (u.size() != q) throw ShapeError("input function returned the wrong length");
    return u;
  };

  Eigen::VectorXd x = x0;
  for (Eigen::Index k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    states.col(k) = x;
    const Eigen::VectorXd u0 = input_at(t);
    if (inputs) inputs->col(k) = u0;
    if (k == steps) break;
    const Eigen::VectorXd um = input_at(t + 0.5 * dt);
    const Eigen::VectorXd u1 = input_at(t + dt);
    const Eigen::VectorXd k1 = model_rhs(model, x, u0);
    const Eigen::VectorXd k2 = model_rhs(model, x + 0.5 * dt * k1, um);
    const Eigen::VectorXd k3 = model_rhs(model, x + 0.5 * dt * k2, um);
    const Eigen::VectorXd k4 = model_rhs(model, x + dt * k3, u1);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double norm = x.norm();
    if (!std::isfinite(norm) || norm > kModelBlowup) {
      throw DivergenceError("identified model diverged", t + dt);
    }
  }
  std::vector<std::string> input_names;
  if (q == 1) input_names = {"u"};
  return TimeSeries::uniform(t0, dt, std::move(states), std::move(inputs), {},
                             std::move(input_names));
}

std::string model_to_equations(const SparseModel& model,
                               const std::vector<std::string>& channel_names) {
  const LibrarySpec& spec = model.library();
  const auto names = channel_names.empty() ? default_channels(spec) : channel_names;
  if (static_cast<int>(names.size()) < spec.state_dim) {
    throw ParamError("not enough channel names for the model states");
  }
  std::ostringstream out;
  for (int i = 0; i < spec.state_dim; ++i) {
    out << 'd' << names[static_cast<std::size_t>(i)] << "/dt = ";
    bool first = true;
    for (Eigen::Index j = 0; j < spec.size(); ++j) {
      const double c = model.coefficients.values(i, j);
      if (c == 0.0) continue;
      const TermDescriptor& term = spec.terms[static_cast<std::size_t>(j)];
      const double shown = first ? c : std::abs(c);
      if (!first) out << (c < 0.0 ? " - " : " + ");
      out << format_number(shown);
      if (term.kind != TermKind::kConstant) out << '*' << term_name(term, names);
      first = false;
    }
    if (first) out << '0';
    out << '\n';
  }
  return out.str();
}

nlohmann::json model_to_json(const SparseModel& model) {
  const ModelMetadata& md = model.metadata;
  nlohmann::json meta = {
      {"solver", md.solver},
      {"alpha_or_threshold", md.alpha_or_threshold},
      {"seed", md.seed ? nlohmann::json(*md.seed) : nlohmann::json(nullptr)},
      {"fingerprint", md.fingerprint},
      {"derivative", md.derivative},
      {"condition_number", std::isfinite(md.condition_number)
                               ? nlohmann::json(md.condition_number)
                               : nlohmann::json(nullptr)},
      {"warnings", md.warnings},
  };
  return {
      {"version", kModelFormatVersion},
      {"state_dim", model.state_dim()},
      {"input_dim", model.input_dim()},
      {"library", library_to_json(model.library())},
      {"coefficients", matrix_rows(model.coefficients.values)},
      {"metadata", meta},
  };
}

SparseModel model_from_json(const nlohmann::json& doc) {
  try {
    if (!doc.is_object()) throw SchemaError("model document must be an object");
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw SchemaError("unsupported model version " + std::to_string(version) +
                        " (expected " + std::to_string(kModelFormatVersion) + ")");
    }
    SparseModel model;
    model.coefficients.library = library_from_json(doc.at("library"));
    const LibrarySpec& spec = model.coefficients.library;
    if (doc.at("state_dim").get<int>() != spec.state_dim ||
        doc.at("input_dim").get<int>() != spec.input_dim) {
      throw SchemaError("model dimensions disagree with its library");
    }
    model.coefficients.values =
        matrix_from_rows(doc.at("coefficients"), spec.state_dim, spec.size());
    const auto& meta = doc.at("metadata");
    ModelMetadata& md = model.metadata;
    md.solver = meta.at("solver").get<std::string>();
    md.alpha_or_threshold = meta.at("alpha_or_threshold").get<double>();
    if (!meta.at("seed").is_null()) md.seed = meta.at("seed").get<std::uint64_t>();
    md.fingerprint = meta.value("fingerprint", std::string());
    md.derivative = meta.value("derivative", std::string());
    if (meta.contains("condition_number")) {
      const auto& c = meta.at("condition_number");
      md.condition_number =
          c.is_null() ? std::numeric_limits<double>::infinity() : c.get<double>();
    }
    md.warnings = meta.value("warnings", std::vector<std::string>{});
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed model: ") + e.what());
  }
}

void save_model(const SparseModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << model_to_json(model).dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

SparseModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("model file " + path.string() + " is not valid JSON: " + e.what());
  }
  return model_from_json(doc);
}

nlohmann::json feedback_to_json(const FeedbackLaw& law) {
  const LibrarySpec& spec = law.coefficients.library;
  return {{"library", library_to_json(spec)},
          {"coefficients", matrix_rows(law.coefficients.values)}};
}

}  // namespace sindyc
