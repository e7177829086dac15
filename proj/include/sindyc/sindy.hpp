#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "sindyc/differentiation.hpp"
#include "sindyc/library.hpp"
#include "sindyc/regression.hpp"
#include "sindyc/timeseries.hpp"

namespace sindyc {

inline constexpr int kModelFormatVersion = 1;

struct ModelMetadata {
  std::string solver;
  double alpha_or_threshold = 0.0;
  std::optional<std::uint64_t> seed;
  /// Hex digest of the training samples.
  std::string fingerprint;
  std::string derivative;
  /// Of the RMS-scaled library; informational.
  double condition_number = 0.0;
  std::vector<std::string> warnings;

  bool operator==(const ModelMetadata&) const;
};

/// Identified dynamics x' = Ξ Θᵀ(x, u).
struct SparseModel {
  CoefficientMatrix coefficients;
  ModelMetadata metadata;

  const LibrarySpec& library() const { return coefficients.library; }
  int state_dim() const { return coefficients.library.state_dim; }
  int input_dim() const { return coefficients.library.input_dim; }
  bool operator==(const SparseModel&) const;
};

/// Static input law u = Ξ_u Θᵀ(x) over a state-only library.
struct FeedbackLaw {
  CoefficientMatrix coefficients;
};

/// Fits a sparse model to a series.
///
/// The derivative estimate and the library matrix lose their first and last
/// columns before regression. Throws ParamError when the library's state or
/// input dimension disagrees with the series or when the method is
/// kSupplied; fewer usable columns than terms adds a warning.
SparseModel identify(const TimeSeries& series, const LibrarySpec& library,
                     const DerivativeMethod& method, const SolverOptions& solver);

/// Same with derivatives supplied by the caller (state_dim x samples).
SparseModel identify(const TimeSeries& series, const Eigen::MatrixXd& derivatives,
                     const LibrarySpec& library, const SolverOptions& solver);

/// Regresses the recorded inputs on a state-only library. Throws ParamError
/// when the series has no inputs or the library has input channels.
FeedbackLaw identify_feedback(const TimeSeries& series, const LibrarySpec& library,
                              const SolverOptions& solver);

/// Ξ Θᵀ(x, u) at one point. Throws ShapeError on dimension mismatch.
Eigen::VectorXd model_rhs(const SparseModel& model, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& u);

/// u(t) for simulation; unused when the model has no inputs.
using InputFunction = std::function<Eigen::VectorXd(double)>;

/// Norm beyond which an identified model is declared unstable.
inline constexpr double kModelBlowup = 1e6;

/// RK4 on [t0, t0 + t_span] with u sampled at the substep times. The
/// returned series carries the sampled inputs when q > 0. Throws ParamError
/// (dt <= 0, t_span < dt, missing input function, wrong x0 length) and
/// DivergenceError when |x| exceeds kModelBlowup.
TimeSeries simulate(const SparseModel& model, const Eigen::VectorXd& x0,
                    const InputFunction& input_fn, double t_span, double dt,
                    double t0 = 0.0);

/// One line per state, e.g. `dx1/dt = 0.5*x1 - 0.025*x1*x2 + 1*u^2`, with
/// non-zero terms in library order and 12 significant digits. Empty
/// channel_names selects x1..xn and u (or u1..uq).
std::string model_to_equations(const SparseModel& model,
                               const std::vector<std::string>& channel_names = {});

nlohmann::json model_to_json(const SparseModel& model);
/// Throws SchemaError for malformed documents or an unsupported version.
SparseModel model_from_json(const nlohmann::json& doc);

void save_model(const SparseModel& model, const std::filesystem::path& path);
SparseModel load_model(const std::filesystem::path& path);

nlohmann::json feedback_to_json(const FeedbackLaw& law);

/// FNV-1a digest of the grid, states and inputs.
std::string fingerprint(const TimeSeries& series);

}  // namespace sindyc
