#include "sindyc/systems.hpp"

#include <cmath>
#include <numbers>

#include "sindyc/errors.hpp"

namespace sindyc {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform in (0, 1] from the top 53 bits.
double unit_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ParamError(std::string(name) + " must be positive");
  }
}

template <typename T, typename F>
T schema_guard(F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed system config: ") + e.what());
  }
}

void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw SchemaError("unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace

void LotkaVolterraParams::validate() const {
  require_positive(a, "a");
  require_positive(b, "b");
  require_positive(c, "c");
  require_positive(d, "d");
}

InputMap parse_input_map(const std::string& name) {
  if (name == "none") return InputMap::kNone;
  if (name == "identity") return InputMap::kIdentity;
  if (name == "cubic") return InputMap::kCubic;
  throw ParamError("unknown input map '" + name + "'");
}

std::string to_string(InputMap map) {
  switch (map) {
    case InputMap::kNone:
      return "none";
    case InputMap::kIdentity:
      return "identity";
    case InputMap::kCubic:
      return "cubic";
  }
  return {};
}

void LorenzParams::validate() const {
  require_positive(sigma, "sigma");
  require_positive(rho, "rho");
  require_positive(beta, "beta");
}

Eigen::Vector2d lotka_volterra_rhs(const Eigen::Vector2d& x, double u,
                                   const LotkaVolterraParams& p) {
  const double x1x2 = x(0) * x(1);
  return {p.a * x(0) - p.b * x1x2 + u * u, -p.c * x(1) + p.d * x1x2};
}

Eigen::Vector3d lorenz_rhs(const Eigen::Vector3d& x, double u,
                           const LorenzParams& p) {
  double g = 0.0;
  switch (p.input_map) {
    case InputMap::kNone:
      break;
    case InputMap::kIdentity:
      g = u;
      break;
    case InputMap::kCubic:
      g = u * u * u;
      break;
  }
  return {p.sigma * (x(1) - x(0)) + g, x(0) * (p.rho - x(2)) - x(1),
          x(0) * x(1) - p.beta * x(2)};
}

SignalKind parse_signal_kind(const std::string& name) {
  if (name == "sum-of-sinusoids") return SignalKind::kSumOfSinusoids;
  if (name == "constant") return SignalKind::kConstant;
  if (name == "white-noise") return SignalKind::kWhiteNoise;
  if (name == "state-feedback") return SignalKind::kStateFeedback;
  if (name == "step-train") return SignalKind::kStepTrain;
  throw ParamError("unknown signal kind '" + name + "'");
}

std::string to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::kSumOfSinusoids:
      return "sum-of-sinusoids";
    case SignalKind::kConstant:
      return "constant";
    case SignalKind::kWhiteNoise:
      return "white-noise";
    case SignalKind::kStateFeedback:
      return "state-feedback";
    case SignalKind::kStepTrain:
      return "step-train";
  }
  return {};
}

bool SignalSpec::held() const {
  return kind == SignalKind::kWhiteNoise || kind == SignalKind::kStateFeedback;
}

void SignalSpec::validate() const {
  if (!std::isfinite(offset)) throw ParamError("signal offset must be finite");
  if (held() && !(noise_std >= 0.0 && std::isfinite(noise_std))) {
    throw ParamError("noise_std must be finite and >= 0");
  }
  if (kind == SignalKind::kStateFeedback && gains.empty()) {
    throw ParamError("state-feedback signal needs gains");
  }
  if (kind == SignalKind::kStepTrain) {
    require_positive(step_period, "step_period");
    if (!(step_duration >= 0.0)) throw ParamError("step_duration must be >= 0");
  }
  for (const auto& c : components) {
    if (!std::isfinite(c.amplitude) || !std::isfinite(c.frequency) ||
        !std::isfinite(c.phase)) {
      throw ParamError("sinusoid parameters must be finite");
    }
  }
}

double gaussian_sample(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t base = splitmix64(seed ^ splitmix64(index));
  const double u1 = unit_open(splitmix64(base));
  const double u2 = unit_open(splitmix64(base + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SignalFn make_signal(const SignalSpec& spec, StateProbe probe,
                     double sample_step, double t0) {
  spec.validate();
  if (spec.kind == SignalKind::kStateFeedback && !probe) {
    throw ParamError("state-feedback signal needs a state probe");
  }
  if (spec.held() && spec.noise_std > 0.0 && !(sample_step > 0.0)) {
    throw ParamError("noise signals need a positive sample step");
  }
  auto noise = [spec, sample_step, t0](double t) {
    if (spec.noise_std == 0.0) return 0.0;
    const double k = std::floor((t - t0) / sample_step + 1e-6);
    const auto index = k < 0.0 ? std::uint64_t{0} : static_cast<std::uint64_t>(k);
    return spec.noise_std * gaussian_sample(spec.seed, index);
  };
  switch (spec.kind) {
    case SignalKind::kSumOfSinusoids:
      return [spec](double t) {
        double v = spec.offset;
        for (const auto& c : spec.components) {
          v += c.amplitude * std::sin(c.frequency * t + c.phase);
        }
        return v;
      };
    case SignalKind::kConstant:
      return [v = spec.offset](double) { return v; };
    case SignalKind::kWhiteNoise:
      return [offset = spec.offset, noise](double t) { return offset + noise(t); };
    case SignalKind::kStateFeedback:
      return [spec, probe = std::move(probe), noise](double t) {
        const Eigen::VectorXd x = probe();
        if (x.size() < static_cast<Eigen::Index>(spec.gains.size())) {
          throw ParamError("state-feedback gains exceed the state dimension");
        }
        double v = spec.offset;
        for (std::size_t i = 0; i < spec.gains.size(); ++i) {
          v += spec.gains[i] * x(static_cast<Eigen::Index>(i));
        }
        return v + noise(t);
      };
    case SignalKind::kStepTrain:
      return [spec, t0](double t) {
        const double phase = std::fmod(t - t0, spec.step_period);
        const double wrapped = phase < 0.0 ? phase + spec.step_period : phase;
        return spec.offset + (wrapped < spec.step_duration ? spec.step_amplitude : 0.0);
      };
  }
  throw ParamError("unhandled signal kind");
}

TimeSeries rk4_integrate(const Rhs& rhs, const Eigen::VectorXd& x0,
                         const std::optional<SignalSpec>& signal,
                         double t_span, double dt, double t0) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParamError("dt must be positive");
  if (!(t_span >= dt * (1.0 - 1e-12))) throw ParamError("t_span must be >= dt");
  if (x0.size() < 1 || !x0.allFinite()) throw ParamError("x0 must be finite and non-empty");

  const auto steps = static_cast<Eigen::Index>(std::llround(t_span / dt));
  const Eigen::Index n = x0.size();
  Eigen::MatrixXd states(n, steps + 1);
  std::optional<Eigen::MatrixXd> inputs;
  if (signal) inputs = Eigen::MatrixXd(1, steps + 1);

  Eigen::VectorXd x = x0;
  SignalFn u_of;
  if (signal) {
    u_of = make_signal(*signal, [&x]() -> Eigen::VectorXd { return x; }, dt, t0);
  }
  const bool held = signal && signal->held();
  Eigen::VectorXd u(signal ? 1 : 0);
  auto input_at = [&](double t) {
    if (signal) u(0) = u_of(t);
    return u;
  };

  for (Eigen::Index k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    states.col(k) = x;
    const Eigen::VectorXd u0 = input_at(t);
    if (inputs) (*inputs)(0, k) = u0(0);
    if (k == steps) break;

    Eigen::VectorXd k1, k2, k3, k4;
    if (held) {
      k1 = rhs(x, u0, t);
      k2 = rhs(x + 0.5 * dt * k1, u0, t + 0.5 * dt);
      k3 = rhs(x + 0.5 * dt * k2, u0, t + 0.5 * dt);
      k4 = rhs(x + dt * k3, u0, t + dt);
    } else {
      const Eigen::VectorXd um = input_at(t + 0.5 * dt);
      const Eigen::VectorXd u1 = input_at(t + dt);
      k1 = rhs(x, u0, t);
      k2 = rhs(x + 0.5 * dt * k1, um, t + 0.5 * dt);
      k3 = rhs(x + 0.5 * dt * k2, um, t + 0.5 * dt);
      k4 = rhs(x + dt * k3, u1, t + dt);
    }
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double norm = x.norm();
    if (!std::isfinite(norm) || norm > kIntegratorBlowup) {
      throw DivergenceError("trajectory diverged", t + dt);
    }
  }

  std::vector<std::string> input_names;
  if (signal) input_names = {"u"};
  return TimeSeries::uniform(t0, dt, std::move(states), std::move(inputs), {},
                             std::move(input_names));
}

Eigen::MatrixXd evaluate_rhs(const Rhs& rhs, const TimeSeries& series) {
  Eigen::MatrixXd out(series.state_dim(), series.samples());
  Eigen::VectorXd u(series.input_dim());
  for (Eigen::Index k = 0; k < series.samples(); ++k) {
    if (series.has_inputs()) u = series.inputs()->col(k);
    out.col(k) = rhs(series.states().col(k), u, series.times()(k));
  }
  return out;
}

Eigen::Index SystemConfig::state_dim() const {
  if (system == "lotka-volterra") return 2;
  if (system == "lorenz") return 3;
  throw ParamError("unknown system '" + system + "'");
}

void SystemConfig::validate() const {
  const Eigen::Index n = state_dim();
  if (system == "lotka-volterra") lotka_volterra.validate();
  if (system == "lorenz") lorenz.validate();
  if (x0.size() != n) {
    throw ParamError("x0 must have " + std::to_string(n) + " entries");
  }
  if (!x0.allFinite()) throw ParamError("x0 must be finite");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParamError("dt must be positive");
  if (!(t_span >= dt) || !std::isfinite(t_span)) throw ParamError("t_span must be >= dt");
  if (!std::isfinite(t0)) throw ParamError("t0 must be finite");
  if (signal) signal->validate();
}

bool SystemConfig::operator==(const SystemConfig& o) const {
  return system == o.system && lotka_volterra.a == o.lotka_volterra.a &&
         lotka_volterra.b == o.lotka_volterra.b &&
         lotka_volterra.c == o.lotka_volterra.c &&
         lotka_volterra.d == o.lotka_volterra.d && lorenz.sigma == o.lorenz.sigma &&
         lorenz.rho == o.lorenz.rho && lorenz.beta == o.lorenz.beta &&
         lorenz.input_map == o.lorenz.input_map && signal == o.signal &&
         x0 == o.x0 && t0 == o.t0 && t_span == o.t_span && dt == o.dt;
}

Eigen::VectorXd default_initial_state(const std::string& system) {
  if (system == "lotka-volterra") return Eigen::Vector2d(60.0, 50.0);
  if (system == "lorenz") return Eigen::Vector3d(-8.0, 8.0, 27.0);
  throw ParamError("unknown system '" + system + "'");
}

nlohmann::json signal_to_json(const SignalSpec& s) {
  nlohmann::json doc = {{"kind", to_string(s.kind)}, {"offset", s.offset}};
  switch (s.kind) {
    case SignalKind::kSumOfSinusoids: {
      nlohmann::json comps = nlohmann::json::array();
      for (const auto& c : s.components) {
        comps.push_back({{"amplitude", c.amplitude},
                         {"frequency", c.frequency},
                         {"phase", c.phase}});
      }
      doc["components"] = comps;
      break;
    }
    case SignalKind::kConstant:
      break;
    case SignalKind::kStateFeedback:
      doc["gains"] = s.gains;
      [[fallthrough]];
    case SignalKind::kWhiteNoise:
      doc["noise_std"] = s.noise_std;
      doc["seed"] = s.seed;
      break;
    case SignalKind::kStepTrain:
      doc["step_amplitude"] = s.step_amplitude;
      doc["step_period"] = s.step_period;
      doc["step_duration"] = s.step_duration;
      break;
  }
  return doc;
}

SignalSpec signal_from_json(const nlohmann::json& doc) {
  return schema_guard<SignalSpec>([&] {
    reject_unknown(doc,
                   {"kind", "offset", "components", "noise_std", "seed", "gains",
                    "step_amplitude", "step_period", "step_duration"},
                   "signal");
    SignalSpec s;
    s.kind = parse_signal_kind(doc.at("kind").get<std::string>());
    s.offset = doc.value("offset", 0.0);
    if (doc.contains("components")) {
      for (const auto& c : doc.at("components")) {
        reject_unknown(c, {"amplitude", "frequency", "phase"}, "sinusoid");
        s.components.push_back({c.value("amplitude", 1.0), c.value("frequency", 1.0),
                                c.value("phase", 0.0)});
      }
    }
    s.noise_std = doc.value("noise_std", 1.0);
    s.seed = doc.value("seed", std::uint64_t{0});
    s.gains = doc.value("gains", std::vector<double>{});
    s.step_amplitude = doc.value("step_amplitude", 1.0);
    s.step_period = doc.value("step_period", 1.0);
    s.step_duration = doc.value("step_duration", 0.1);
    s.validate();
    return s;
  });
}

SystemConfig system_config_from_json(const nlohmann::json& doc) {
  return schema_guard<SystemConfig>([&] {
    if (!doc.is_object()) throw SchemaError("system config must be an object");
    SystemConfig c;
    c.system = doc.value("system", c.system);
    c.state_dim();  // rejects unknown systems before reading params
    if (doc.contains("params")) {
      const auto& p = doc.at("params");
      if (c.system == "lotka-volterra") {
        reject_unknown(p, {"a", "b", "c", "d"}, "params");
        c.lotka_volterra.a = p.value("a", c.lotka_volterra.a);
        c.lotka_volterra.b = p.value("b", c.lotka_volterra.b);
        c.lotka_volterra.c = p.value("c", c.lotka_volterra.c);
        c.lotka_volterra.d = p.value("d", c.lotka_volterra.d);
      } else {
        reject_unknown(p, {"sigma", "rho", "beta"}, "params");
        c.lorenz.sigma = p.value("sigma", c.lorenz.sigma);
        c.lorenz.rho = p.value("rho", c.lorenz.rho);
        c.lorenz.beta = p.value("beta", c.lorenz.beta);
      }
    }
    if (doc.contains("input_map")) {
      c.lorenz.input_map = parse_input_map(doc.at("input_map").get<std::string>());
    }
    if (doc.contains("signal") && !doc.at("signal").is_null()) {
      c.signal = signal_from_json(doc.at("signal"));
    }
    if (doc.contains("x0")) {
      const auto v = doc.at("x0").get<std::vector<double>>();
      c.x0 = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    } else {
      c.x0 = default_initial_state(c.system);
    }
    c.t0 = doc.value("t0", c.t0);
    c.t_span = doc.value("t_span", c.t_span);
    c.dt = doc.value("dt", c.dt);
    c.validate();
    return c;
  });
}

nlohmann::json system_config_to_json(const SystemConfig& c) {
  nlohmann::json doc;
  doc["system"] = c.system;
  if (c.system == "lotka-volterra") {
    doc["params"] = {{"a", c.lotka_volterra.a},
                     {"b", c.lotka_volterra.b},
                     {"c", c.lotka_volterra.c},
                     {"d", c.lotka_volterra.d}};
  } else {
    doc["params"] = {{"sigma", c.lorenz.sigma}, {"rho", c.lorenz.rho}, {"beta", c.lorenz.beta}};
    doc["input_map"] = to_string(c.lorenz.input_map);
  }
  doc["signal"] = c.signal ? signal_to_json(*c.signal) : nlohmann::json(nullptr);
  doc["x0"] = std::vector<double>(c.x0.data(), c.x0.data() + c.x0.size());
  doc["t0"] = c.t0;
  doc["t_span"] = c.t_span;
  doc["dt"] = c.dt;
  return doc;
}

Rhs system_rhs(const SystemConfig& config) {
  if (config.system == "lotka-volterra") {
    const auto p = config.lotka_volterra;
    return [p](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double) {
      return Eigen::VectorXd(lotka_volterra_rhs(x, u.size() ? u(0) : 0.0, p));
    };
  }
  if (config.system == "lorenz") {
    const auto p = config.lorenz;
    return [p](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double) {
      return Eigen::VectorXd(lorenz_rhs(x, u.size() ? u(0) : 0.0, p));
    };
  }
  throw ParamError("unknown system '" + config.system + "'");
}

TimeSeries simulate_system(const SystemConfig& config) {
  config.validate();
  return rk4_integrate(system_rhs(config), config.x0, config.signal, config.t_span,
                       config.dt, config.t0);
}

}  // namespace sindyc
