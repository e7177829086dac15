#include "sindyc/differentiation.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <cmath>
#include <sstream>

#include "sindyc/errors.hpp"
#include "sindyc/kernels.hpp"

namespace sindyc {

namespace {

// Smoothing of |.| inside the total-variation term.
constexpr double kTvEpsilon = 1e-8;

void central_difference_into(const double* x, Eigen::Index count, double dt,
                             double* out) {
  const double inv_two_dt = 0.5 / dt;
  out[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) * inv_two_dt;
  kernels::active().centered_difference(x, inv_two_dt, out + 1,
                                        static_cast<std::size_t>(count - 2));
  out[count - 1] =
      (3.0 * x[count - 1] - 4.0 * x[count - 2] + x[count - 3]) * inv_two_dt;
}

// Trapezoidal running integral: y[k] = sum_{i<k} dt/2 (v[i] + v[i+1]),
// returned for k = 1..N-1 (y[0] is identically zero).
Eigen::VectorXd cumulative_trapezoid(const Eigen::VectorXd& v, double dt) {
  const Eigen::Index n = v.size();
  Eigen::VectorXd y(n - 1);
  double acc = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    acc += 0.5 * dt * (v(i) + v(i + 1));
    y(i) = acc;
  }
  return y;
}

// Adjoint of cumulative_trapezoid applied to r (length N-1).
Eigen::VectorXd cumulative_trapezoid_adjoint(const Eigen::VectorXd& r,
                                             double dt) {
  const Eigen::Index m = r.size();
  // Reverse cumulative sum: c[i] = sum_{k>=i} r[k].
  Eigen::VectorXd c(m);
  double acc = 0.0;
  for (Eigen::Index i = m - 1; i >= 0; --i) {
    acc += r(i);
    c(i) = acc;
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m + 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    out(i) += 0.5 * dt * c(i);
    out(i + 1) += 0.5 * dt * c(i);
  }
  return out;
}

}  // namespace

std::string DerivativeMethod::describe() const {
  std::ostringstream os;
  switch (kind) {
    case DerivativeKind::kCentral:
      os << "central";
      break;
    case DerivativeKind::kTotalVariation:
      os << "tv(lambda=" << tv_lambda << ",iters=" << tv_iterations << ")";
      break;
    case DerivativeKind::kSupplied:
      os << "supplied";
      break;
  }
  return os.str();
}

DerivativeKind parse_derivative_kind(const std::string& name) {
  if (name == "central") return DerivativeKind::kCentral;
  if (name == "tv") return DerivativeKind::kTotalVariation;
  if (name == "supplied" || name == "exact") return DerivativeKind::kSupplied;
  throw ParamError("unknown differentiation method '" + name + "'");
}

Eigen::VectorXd central_difference(const Eigen::VectorXd& signal, double dt) {
  if (signal.size() < 3) {
    throw SizeError("central difference needs at least 3 samples");
  }
  Eigen::VectorXd out(signal.size());
  central_difference_into(signal.data(), signal.size(), dt, out.data());
  return out;
}

DerivativeEstimate central_difference(const TimeSeries& series) {
  const Eigen::Index count = series.samples();
  if (count < 3) {
    throw SizeError("central difference needs at least 3 samples");
  }
  // Rows of a column-major matrix are strided; work on contiguous copies.
  Eigen::MatrixXd out(series.state_dim(), count);
  Eigen::VectorXd row(count), drow(count);
  for (Eigen::Index i = 0; i < series.state_dim(); ++i) {
    row = series.states().row(i).transpose();
    central_difference_into(row.data(), count, series.dt(), drow.data());
    out.row(i) = drow.transpose();
  }
  return {std::move(out), DerivativeMethod::central()};
}

double tv_objective(const Eigen::VectorXd& derivative,
                    const Eigen::VectorXd& signal, double dt, double reg) {
  const Eigen::Index n = derivative.size();
  double tv = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double d = derivative(i + 1) - derivative(i);
    tv += std::sqrt(d * d + kTvEpsilon);
  }
  const Eigen::VectorXd integral = cumulative_trapezoid(derivative, dt);
  const Eigen::VectorXd target =
      signal.tail(n - 1).array() - signal(0);
  return reg * tv + 0.5 * kernels::squared_distance(
                              {integral.data(), static_cast<std::size_t>(n - 1)},
                              {target.data(), static_cast<std::size_t>(n - 1)});
}

Eigen::VectorXd tv_derivative(const Eigen::VectorXd& signal, double dt,
                              double reg, int iterations, TvTrace* trace) {
  if (!(reg > 0.0)) throw ParamError("tv regularization must be positive");
  if (iterations < 1) throw ParamError("tv iterations must be at least 1");
  if (!(dt > 0.0)) throw ParamError("time step must be positive");
  if (signal.size() < 5) throw SizeError("tv derivative needs at least 5 samples");
  if (!signal.allFinite()) throw DataError("non-finite sample in tv input");

  const Eigen::Index n = signal.size();
  const Eigen::Index m = n - 1;
  const Eigen::VectorXd target = signal.tail(m).array() - signal(0);
  const Eigen::VectorXd rhs_v = cumulative_trapezoid_adjoint(target, dt);

  // Each fixed-point step solves (reg D'WD + A'A) v = A'b. A = L P with L the
  // running-sum matrix and P the two-point trapezoid average, and
  // (L'L)^-1 = K is tridiagonal, so with s = K^-1 P v the step becomes the
  // sparse saddle system
  //   [ reg D'WD   P' ] [v]   [A'b]
  //   [ P         -K  ] [s] = [ 0 ]
  // Unknowns are interleaved (v0, s0, v1, s1, ...) to keep it banded.
  const Eigen::Index dim = n + m;
  auto vi = [](Eigen::Index i) { return 2 * i; };
  auto si = [](Eigen::Index i) { return 2 * i + 1; };

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  for (Eigen::Index i = 0; i < n; ++i) rhs(vi(i)) = rhs_v(i);

  Eigen::VectorXd v = central_difference(signal, dt);
  double best_objective = tv_objective(v, signal, dt, reg);
  Eigen::VectorXd best = v;
  if (trace) trace->objective.assign(1, best_objective);

  const double half_dt = 0.5 * dt;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::NaturalOrdering<int>>
      solver;
  bool analyzed = false;
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(11 * n));

  for (int iter = 0; iter < iterations; ++iter) {
    entries.clear();
    for (Eigen::Index i = 0; i < m; ++i) {
      const double d = v(i + 1) - v(i);
      const double w = reg / std::sqrt(d * d + kTvEpsilon);
      entries.emplace_back(vi(i), vi(i), w);
      entries.emplace_back(vi(i + 1), vi(i + 1), w);
      entries.emplace_back(vi(i), vi(i + 1), -w);
      entries.emplace_back(vi(i + 1), vi(i), -w);
      // P and P'
      entries.emplace_back(si(i), vi(i), half_dt);
      entries.emplace_back(si(i), vi(i + 1), half_dt);
      entries.emplace_back(vi(i), si(i), half_dt);
      entries.emplace_back(vi(i + 1), si(i), half_dt);
      // -K, K = E E' with E the first-difference matrix.
      entries.emplace_back(si(i), si(i), i == 0 ? -1.0 : -2.0);
      if (i > 0) {
        entries.emplace_back(si(i), si(i - 1), 1.0);
        entries.emplace_back(si(i - 1), si(i), 1.0);
      }
    }
    Eigen::SparseMatrix<double> system(dim, dim);
    system.setFromTriplets(entries.begin(), entries.end());
    system.makeCompressed();
    if (!analyzed) {
      solver.analyzePattern(system);
      analyzed = true;
    }
    solver.factorize(system);
    if (solver.info() != Eigen::Success) break;
    const Eigen::VectorXd sol = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !sol.allFinite()) break;
    for (Eigen::Index i = 0; i < n; ++i) v(i) = sol(vi(i));

    const double objective = tv_objective(v, signal, dt, reg);
    if (trace) trace->objective.push_back(objective);
    if (objective <= best_objective) {
      best_objective = objective;
      best = v;
    }
  }
  return best;
}

DerivativeEstimate differentiate(const TimeSeries& series,
                                 const DerivativeMethod& method) {
  switch (method.kind) {
    case DerivativeKind::kCentral:
      return central_difference(series);
    case DerivativeKind::kTotalVariation: {
      if (!(method.tv_lambda > 0.0)) {
        throw ParamError("tv regularization must be positive");
      }
      Eigen::MatrixXd out(series.state_dim(), series.samples());
      for (Eigen::Index i = 0; i < series.state_dim(); ++i) {
        const Eigen::VectorXd row = series.states().row(i).transpose();
        out.row(i) = tv_derivative(row, series.dt(), method.tv_lambda,
                                   method.tv_iterations)
                         .transpose();
      }
      return {std::move(out), method};
    }
    case DerivativeKind::kSupplied:
      break;
  }
  throw ParamError("differentiation method '" + method.describe() +
                   "' cannot be computed from the series");
}

}  // namespace sindyc
