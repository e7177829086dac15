#include <doctest.h>

#include <cmath>
#include <random>

#include "sindyc/differentiation.hpp"
#include "sindyc/errors.hpp"
#include "sindyc/systems.hpp"

using namespace sindyc;

namespace {

Eigen::VectorXd sample(double t0, double dt, Eigen::Index n, double (*f)(double)) {
  Eigen::VectorXd v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = f(t0 + dt * static_cast<double>(k));
  return v;
}

double max_error_on_sine(double dt) {
  const auto n = static_cast<Eigen::Index>(std::llround(2.0 / dt)) + 1;
  const Eigen::VectorXd x = sample(0.0, dt, n, [](double t) { return std::sin(t); });
  const Eigen::VectorXd d = central_difference(x, dt);
  double err = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    err = std::max(err, std::abs(d(k) - std::cos(dt * static_cast<double>(k))));
  }
  return err;
}

}  // namespace

TEST_CASE("central difference examples") {
  const Eigen::VectorXd ramp = sample(0.3, 0.01, 50, [](double t) { return 3.0 * t; });
  const Eigen::VectorXd d = central_difference(ramp, 0.01);
  CHECK((d.array() - 3.0).abs().maxCoeff() < 1e-12);

  const Eigen::VectorXd sq = sample(0.0, 0.1, 5, [](double t) { return t * t; });
  CHECK(central_difference(sq, 0.1)(1) == doctest::Approx(0.2).epsilon(1e-12));

  const Eigen::VectorXd s = sample(-1.0, 0.01, 201, [](double t) { return std::sin(t); });
  CHECK(std::abs(central_difference(s, 0.01)(100) - 1.0) < 1e-4);

  CHECK_THROWS_AS(central_difference(Eigen::VectorXd::Ones(2), 0.1), SizeError);
}

TEST_CASE("quadratics are differentiated exactly including the endpoints") {
  const Eigen::VectorXd q = sample(0.0, 0.1, 8, [](double t) { return 2 * t * t - t + 1; });
  const Eigen::VectorXd d = central_difference(q, 0.1);
  for (Eigen::Index k = 0; k < 8; ++k) {
    CHECK(d(k) == doctest::Approx(4 * 0.1 * static_cast<double>(k) - 1).epsilon(1e-10));
  }
}

TEST_CASE("central difference is linear") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Eigen::VectorXd x(100), y(100);
  for (Eigen::Index k = 0; k < 100; ++k) {
    x(k) = g(rng);
    y(k) = g(rng);
  }
  const Eigen::VectorXd lhs = central_difference(Eigen::VectorXd(2.5 * x - 0.7 * y), 0.01);
  const Eigen::VectorXd rhs = 2.5 * central_difference(x, 0.01) - 0.7 * central_difference(y, 0.01);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10 * rhs.cwiseAbs().maxCoeff());
}

TEST_CASE("central difference converges at second order") {
  const double ratio = max_error_on_sine(0.02) / max_error_on_sine(0.01);
  CHECK(ratio >= 3.5);
  CHECK(ratio <= 4.5);
}

TEST_CASE("TV derivative of a clean ramp") {
  const Eigen::VectorXd ramp = sample(0.0, 0.01, 200, [](double t) { return 3.0 * t; });
  for (double reg : {1e-3, 1e-5}) {
    const Eigen::VectorXd d = tv_derivative(ramp, 0.01, reg, 100);
    CHECK((d.array() - 3.0).abs().maxCoeff() < 1e-3);
  }
}

TEST_CASE("TV derivative of a constant is zero") {
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(300, 4.2);
  CHECK(tv_derivative(c, 0.01, 1e-2, 50).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("TV beats central differences on a noisy kink") {
  const double dt = 0.01;
  const Eigen::Index n = 1001;
  const double half = 0.5 * dt * static_cast<double>(n - 1);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> noise(-0.01, 0.01);
  Eigen::VectorXd f(n), truth(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double t = dt * static_cast<double>(k);
    f(k) = std::abs(t - half) + noise(rng);
    truth(k) = t < half ? -1.0 : 1.0;
  }
  const Eigen::VectorXd tv = tv_derivative(f, dt, 1e-2, 200);
  const Eigen::VectorXd cd = central_difference(f, dt);
  const double tv_rms = std::sqrt((tv - truth).squaredNorm() / static_cast<double>(n));
  const double cd_rms = std::sqrt((cd - truth).squaredNorm() / static_cast<double>(n));
  CHECK(tv_rms < cd_rms);
}

TEST_CASE("TV objective never increases on randomized inputs") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 50 + 37 * trial;
    Eigen::VectorXd f(n);
    double walk = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      walk += g(rng);
      f(k) = walk + 0.1 * g(rng);
    }
    const double reg = std::pow(10.0, -3 + trial % 4);
    TvTrace trace;
    const Eigen::VectorXd v = tv_derivative(f, 0.05, reg, 40, &trace);
    REQUIRE(trace.objective.size() == 41);
    for (std::size_t k = 1; k < trace.objective.size(); ++k) {
      CHECK(trace.objective[k] <= trace.objective[k - 1] * (1.0 + 1e-12));
    }
    CHECK(tv_objective(v, f, 0.05, reg) == doctest::Approx(trace.objective.back()));
  }
}

TEST_CASE("TV argument checks") {
  const Eigen::VectorXd f = Eigen::VectorXd::LinSpaced(10, 0, 1);
  CHECK_THROWS_AS(tv_derivative(f, 0.1, 0.0, 10), ParamError);
  CHECK_THROWS_AS(tv_derivative(f, 0.1, 1e-2, 0), ParamError);
  CHECK_THROWS_AS(tv_derivative(Eigen::VectorXd::Ones(4), 0.1, 1e-2, 10), SizeError);
  Eigen::VectorXd bad = f;
  bad(3) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(tv_derivative(bad, 0.1, 1e-2, 10), DataError);
}

TEST_CASE("differentiate dispatches per channel") {
  Eigen::MatrixXd x(2, 100);
  for (Eigen::Index k = 0; k < 100; ++k) {
    x(0, k) = 3.0 * 0.01 * static_cast<double>(k);
    x(1, k) = -1.0 * 0.01 * static_cast<double>(k);
  }
  const TimeSeries ts = TimeSeries::uniform(0, 0.01, x);
  const DerivativeEstimate c = differentiate(ts, DerivativeMethod::central());
  CHECK((c.values.row(0).array() - 3.0).abs().maxCoeff() < 1e-12);
  CHECK((c.values.row(1).array() + 1.0).abs().maxCoeff() < 1e-12);
  CHECK(c.method.kind == DerivativeKind::kCentral);

  CHECK_THROWS_AS(differentiate(ts, DerivativeMethod::total_variation(0.0)), ParamError);
  DerivativeMethod supplied;
  supplied.kind = DerivativeKind::kSupplied;
  CHECK_THROWS_AS(differentiate(ts, supplied), ParamError);
  CHECK_THROWS_AS(parse_derivative_kind("spline"), ParamError);
  CHECK(parse_derivative_kind("tv") == DerivativeKind::kTotalVariation);
}

TEST_CASE("TV on a noisy Lorenz channel keeps the shape") {
  SystemConfig cfg;
  cfg.system = "lorenz";
  cfg.lorenz.input_map = InputMap::kNone;
  cfg.x0 = default_initial_state("lorenz");
  cfg.t_span = 2.0;
  cfg.dt = 1e-3;
  const TimeSeries ts = simulate_system(cfg);
  const DerivativeEstimate d = differentiate(ts, DerivativeMethod::total_variation(1e-2, 20));
  CHECK(d.values.rows() == 3);
  CHECK(d.values.cols() == ts.samples());
  CHECK(d.values.allFinite());
}
