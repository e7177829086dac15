#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sindyc/timeseries.hpp"

namespace sindyc {

enum class DerivativeKind { kCentral, kTotalVariation, kSupplied };

/// Estimator choice plus its parameters.
struct DerivativeMethod {
  static constexpr double kDefaultTvLambda = 1e-2;
  static constexpr int kDefaultTvIterations = 200;

  DerivativeKind kind = DerivativeKind::kCentral;
  double tv_lambda = kDefaultTvLambda;
  int tv_iterations = kDefaultTvIterations;

  static DerivativeMethod central() { return {}; }
  static DerivativeMethod total_variation(
      double lambda = kDefaultTvLambda,
      int iterations = kDefaultTvIterations) {
    return {DerivativeKind::kTotalVariation, lambda, iterations};
  }

  /// "central", "tv(lambda=...,iters=...)" or "supplied".
  std::string describe() const;
};

/// Parses "central", "tv" or "supplied"; throws ParamError otherwise.
DerivativeKind parse_derivative_kind(const std::string& name);

/// Time derivative aligned column-for-column with the sampled states.
struct DerivativeEstimate {
  Eigen::MatrixXd values;
  DerivativeMethod method;
};

/// Second-order finite differences: centered in the interior, one-sided
/// three-point stencils at both ends. Throws SizeError below 3 samples.
DerivativeEstimate central_difference(const TimeSeries& series);

/// Same stencil on a single channel.
Eigen::VectorXd central_difference(const Eigen::VectorXd& signal, double dt);

/// Diagnostics from a total-variation solve.
struct TvTrace {
  /// Objective after each iteration; entry 0 is the starting point.
  std::vector<double> objective;
};

/// Total-variation regularized derivative of a single channel.
///
/// Minimizes reg * sum_i sqrt((v[i+1]-v[i])^2 + eps) + 1/2 |A v - (f - f[0])|^2
/// where A is trapezoidal cumulative integration, by lagged-diffusivity
/// fixed-point iteration started from the central-difference estimate.
/// Each step minimizes a quadratic majorizer, so the objective never
/// increases. Throws ParamError (reg <= 0, iterations < 1), SizeError
/// (fewer than 5 samples) or DataError (non-finite signal).
Eigen::VectorXd tv_derivative(const Eigen::VectorXd& signal, double dt,
                              double reg, int iterations,
                              TvTrace* trace = nullptr);

/// Value of the smoothed objective minimized by tv_derivative.
double tv_objective(const Eigen::VectorXd& derivative,
                    const Eigen::VectorXd& signal, double dt, double reg);

/// Applies the chosen estimator channel by channel. Throws ParamError for
/// an invalid method (including kSupplied, which has nothing to compute).
DerivativeEstimate differentiate(const TimeSeries& series,
                                 const DerivativeMethod& method);

}  // namespace sindyc
