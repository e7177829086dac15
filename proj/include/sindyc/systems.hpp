#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "sindyc/timeseries.hpp"

namespace sindyc {

/// Forced predator-prey model
///   x1' = a x1 - b x1 x2 + u^2
///   x2' = -c x2 + d x1 x2
struct LotkaVolterraParams {
  double a = 0.5;
  double b = 0.025;
  double c = 0.5;
  double d = 0.005;

  /// Throws ParamError unless every rate is positive.
  void validate() const;
};

enum class InputMap { kNone, kIdentity, kCubic };

InputMap parse_input_map(const std::string& name);
std::string to_string(InputMap map);

/// x' = sigma (y - x) + g(u), y' = x (rho - z) - y, z' = x y - beta z.
struct LorenzParams {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
  InputMap input_map = InputMap::kIdentity;

  void validate() const;
};

Eigen::Vector2d lotka_volterra_rhs(const Eigen::Vector2d& x, double u,
                                   const LotkaVolterraParams& p);
Eigen::Vector3d lorenz_rhs(const Eigen::Vector3d& x, double u,
                           const LorenzParams& p);

enum class SignalKind {
  kSumOfSinusoids,
  kConstant,
  kWhiteNoise,
  kStateFeedback,
  kStepTrain,
};

SignalKind parse_signal_kind(const std::string& name);
std::string to_string(SignalKind kind);

/// amplitude * sin(frequency * t + phase), frequency in rad per time unit.
struct Sinusoid {
  double amplitude = 1.0;
  double frequency = 1.0;
  double phase = 0.0;

  bool operator==(const Sinusoid&) const = default;
};

/// Scalar forcing signal. Every kind adds `offset`.
///
///   sum-of-sinusoids: offset + sum of components
///   constant:         offset
///   white-noise:      offset + N(0, noise_std^2), one draw per sample step
///   state-feedback:   offset + gains . x + white noise of noise_std
///   step-train:       offset + step_amplitude during the first
///                     step_duration of every step_period
struct SignalSpec {
  SignalKind kind = SignalKind::kConstant;
  double offset = 0.0;
  std::vector<Sinusoid> components;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
  std::vector<double> gains;
  double step_amplitude = 1.0;
  double step_period = 1.0;
  double step_duration = 0.1;

  /// White-noise and state-feedback signals are sampled once per step and
  /// held (zero-order hold).
  bool held() const;
  void validate() const;
  bool operator==(const SignalSpec&) const = default;
};

/// Standard normal draw number `index` of the stream identified by `seed`.
/// Stateless, so any sample can be regenerated on its own.
double gaussian_sample(std::uint64_t seed, std::uint64_t index);

using StateProbe = std::function<Eigen::VectorXd()>;
using SignalFn = std::function<double(double)>;

/// Builds u(t). Held kinds draw their noise from the sample index
/// floor((t - t0) / sample_step) and therefore need sample_step > 0.
/// Throws ParamError when a state-feedback signal has no probe or the probe
/// state is shorter than the gain vector.
SignalFn make_signal(const SignalSpec& spec, StateProbe probe = {},
                     double sample_step = 0.0, double t0 = 0.0);

/// Right-hand side f(x, u, t); u is empty for unforced systems.
using Rhs = std::function<Eigen::VectorXd(const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& u, double t)>;

/// Norm beyond which rk4_integrate reports divergence.
inline constexpr double kIntegratorBlowup = 1e8;

/// Classical fixed-step RK4 on [t0, t0 + t_span] with round(t_span / dt)
/// steps. Deterministic signals are evaluated at the substep times; held
/// signals are sampled at the start of each step with the probe reading the
/// current state. The realized input at every sample becomes the series'
/// input channel (absent when signal is empty). Throws ParamError for
/// dt <= 0 or t_span < dt and DivergenceError when |x| exceeds
/// kIntegratorBlowup or turns non-finite.
TimeSeries rk4_integrate(const Rhs& rhs, const Eigen::VectorXd& x0,
                         const std::optional<SignalSpec>& signal,
                         double t_span, double dt, double t0 = 0.0);

/// f evaluated at every sample of a series (inputs taken from the series).
Eigen::MatrixXd evaluate_rhs(const Rhs& rhs, const TimeSeries& series);

/// Benchmark experiment description.
struct SystemConfig {
  std::string system = "lotka-volterra";
  LotkaVolterraParams lotka_volterra;
  LorenzParams lorenz;
  std::optional<SignalSpec> signal;
  Eigen::VectorXd x0;
  double t0 = 0.0;
  double t_span = 1.0;
  double dt = 1e-3;

  Eigen::Index state_dim() const;
  void validate() const;
  bool operator==(const SystemConfig&) const;
};

/// Default initial state of a named system: (60, 50) for Lotka-Volterra,
/// (-8, 8, 27) for Lorenz. Throws ParamError for an unknown name.
Eigen::VectorXd default_initial_state(const std::string& system);

/// Parses `{system, params, input_map, signal, x0, t0, t_span, dt}`;
/// missing fields take defaults. Throws SchemaError for wrong types and
/// ParamError for invalid values.
SystemConfig system_config_from_json(const nlohmann::json& doc);
nlohmann::json system_config_to_json(const SystemConfig& config);
nlohmann::json signal_to_json(const SignalSpec& spec);
SignalSpec signal_from_json(const nlohmann::json& doc);

Rhs system_rhs(const SystemConfig& config);
TimeSeries simulate_system(const SystemConfig& config);

}  // namespace sindyc
