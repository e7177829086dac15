#include "sindyc/regression.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sindyc/errors.hpp"
#include "sindyc/kernels.hpp"

namespace sindyc {

namespace {

void require_finite(const RowMatrix& theta, const Eigen::MatrixXd& targets) {
  if (!theta.allFinite()) throw DataError("non-finite entry in library matrix");
  if (!targets.allFinite()) throw DataError("non-finite entry in regression target");
}

void require_columns(const RowMatrix& theta, Eigen::Index cols) {
  if (theta.cols() != cols) {
    throw ShapeError("library has " + std::to_string(theta.cols()) +
                     " columns, target has " + std::to_string(cols));
  }
}

// Minimum-norm solution of min |c - R x| through the SVD of R.
Eigen::VectorXd pinv_solve(const Eigen::MatrixXd& r, const Eigen::VectorXd& c) {
  if (r.cols() == 0) return Eigen::VectorXd();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return Eigen::VectorXd::Zero(r.cols());
  const double cutoff = kPinvCutoff * s(0);
  Eigen::VectorXd proj = svd.matrixU().transpose() * c;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    proj(i) = s(i) > cutoff ? proj(i) / s(i) : 0.0;
  }
  return svd.matrixV() * proj;
}

// The regression min |t - x theta| with theta (p x m) compressed through a
// Householder QR of thetaᵀ = Q R: for any column subset S,
// |t - x_S theta_S|^2 = |Qᵀtᵀ - R_S x_S|^2 + |(I - QQᵀ) tᵀ|^2, so every
// restricted fit only touches the small triangular factor.
class ReducedProblem {
 public:
  ReducedProblem(const RowMatrix& theta, const Eigen::MatrixXd& targets) {
    const Eigen::Index p = theta.rows();
    const Eigen::Index m = theta.cols();
    const Eigen::Index r = std::min(p, m);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(theta.transpose());
    r_ = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    Eigen::MatrixXd qt = targets.transpose();
    qt.applyOnTheLeft(qr.householderQ().transpose());
    c_ = qt.topRows(r);
  }

  Eigen::Index terms() const { return r_.cols(); }

  Eigen::VectorXd fit(Eigen::Index row, const std::vector<bool>& support) const {
    std::vector<Eigen::Index> cols;
    for (std::size_t j = 0; j < support.size(); ++j) {
      if (support[j]) cols.push_back(static_cast<Eigen::Index>(j));
    }
    Eigen::MatrixXd sub(r_.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
      sub.col(static_cast<Eigen::Index>(k)) = r_.col(cols[k]);
    }
    const Eigen::VectorXd xs = pinv_solve(sub, c_.col(row));
    Eigen::VectorXd x = Eigen::VectorXd::Zero(terms());
    for (std::size_t k = 0; k < cols.size(); ++k) {
      x(cols[k]) = xs(static_cast<Eigen::Index>(k));
    }
    return x;
  }

  // Rᵀ as a p x r "library" and the matching compressed target, so LASSO on
  // the small system has the same minimizer as on the full one.
  RowMatrix lasso_library() const { return r_.transpose(); }
  Eigen::RowVectorXd lasso_target(Eigen::Index row) const {
    return c_.col(row).transpose();
  }

 private:
  Eigen::MatrixXd r_;
  Eigen::MatrixXd c_;
};

// Library rows scaled to unit root-mean-square; all-zero rows stay zero.
// A scaled coefficient is then the RMS contribution of its term to the
// target, independent of the number of samples.
struct ScaledLibrary {
  explicit ScaledLibrary(const RowMatrix& theta)
      : scaled(theta), norms(theta.rows()) {
    const double count = static_cast<double>(std::max<Eigen::Index>(theta.cols(), 1));
    for (Eigen::Index j = 0; j < theta.rows(); ++j) {
      norms(j) = std::sqrt(kernels::active().sum_squares(
                               theta.row(j).data(),
                               static_cast<std::size_t>(theta.cols())) /
                           count);
      if (norms(j) > 0.0) {
        kernels::active().scale(scaled.row(j).data(), 1.0 / norms(j),
                                scaled.row(j).data(),
                                static_cast<std::size_t>(theta.cols()));
      }
    }
  }

  Eigen::MatrixXd unscale(const Eigen::MatrixXd& xi) const {
    Eigen::MatrixXd out = xi;
    for (Eigen::Index j = 0; j < norms.size(); ++j) {
      if (norms(j) > 0.0) {
        out.col(j) /= norms(j);
      } else {
        out.col(j).setZero();
      }
    }
    return out;
  }

  std::vector<bool> nonzero_rows() const {
    std::vector<bool> mask(static_cast<std::size_t>(norms.size()));
    for (Eigen::Index j = 0; j < norms.size(); ++j) {
      mask[static_cast<std::size_t>(j)] = norms(j) > 0.0;
    }
    return mask;
  }

  RowMatrix scaled;
  Eigen::VectorXd norms;
};

// STLSQ / LASSO on one scaled, QR-compressed problem; reused across a sweep.
class SparseProblem {
 public:
  SparseProblem(const RowMatrix& theta, const Eigen::MatrixXd& targets)
      : library_(theta), reduced_(library_.scaled, targets),
        rows_(targets.rows()), samples_(static_cast<double>(theta.cols())) {}

  // Returns scaled coefficients; support is updated in place.
  Eigen::MatrixXd stlsq(double threshold, int max_rounds,
                        std::vector<std::vector<bool>>& support,
                        StlsqTrace* trace) const {
    const Eigen::Index p = reduced_.terms();
    Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(rows_, p);
    if (trace) trace->supports.assign(static_cast<std::size_t>(rows_), {});
    for (Eigen::Index i = 0; i < rows_; ++i) {
      auto& active = support[static_cast<std::size_t>(i)];
      Eigen::VectorXd x;
      bool stable = false;
      for (int round = 0; round < max_rounds; ++round) {
        if (trace) trace->supports[static_cast<std::size_t>(i)].push_back(active);
        x = reduced_.fit(i, active);
        std::vector<bool> next = active;
        for (Eigen::Index j = 0; j < p; ++j) {
          if (next[static_cast<std::size_t>(j)] && std::abs(x(j)) < threshold) {
            next[static_cast<std::size_t>(j)] = false;
          }
        }
        if (next == active) {
          stable = true;
          break;
        }
        active = std::move(next);
      }
      if (!stable) {
        if (trace) trace->supports[static_cast<std::size_t>(i)].push_back(active);
        x = reduced_.fit(i, active);
      }
      xi.row(i) = x.transpose();
    }
    return xi;
  }

  // Minimizes 1/(2m) |r|^2 + alpha |xi|_1 per row on the scaled library.
  Eigen::MatrixXd lasso(double alpha, int max_iters, double tol,
                        const Eigen::MatrixXd* start) const {
    const RowMatrix lib = reduced_.lasso_library();
    const double penalty = alpha * samples_;
    Eigen::MatrixXd xi(rows_, reduced_.terms());
    for (Eigen::Index i = 0; i < rows_; ++i) {
      Eigen::RowVectorXd warm;
      if (start) warm = start->row(i);
      xi.row(i) = sindyc::lasso(lib, reduced_.lasso_target(i), penalty, max_iters,
                                tol, nullptr, start ? &warm : nullptr);
    }
    // Zero library rows carry no information; pin their coefficients.
    const auto nz = library_.nonzero_rows();
    for (std::size_t j = 0; j < nz.size(); ++j) {
      if (!nz[j]) xi.col(static_cast<Eigen::Index>(j)).setZero();
    }
    return xi;
  }

  std::vector<std::vector<bool>> full_support() const {
    return std::vector<std::vector<bool>>(static_cast<std::size_t>(rows_),
                                          library_.nonzero_rows());
  }

  const ScaledLibrary& library() const { return library_; }

 private:
  ScaledLibrary library_;
  ReducedProblem reduced_;
  Eigen::Index rows_;
  double samples_;
};

std::vector<std::vector<bool>> support_from_mask(const SupportMask& mask,
                                                 const std::vector<bool>& nonzero) {
  std::vector<std::vector<bool>> out(static_cast<std::size_t>(mask.rows()));
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    auto& row = out[static_cast<std::size_t>(i)];
    row.resize(static_cast<std::size_t>(mask.cols()));
    for (Eigen::Index j = 0; j < mask.cols(); ++j) {
      row[static_cast<std::size_t>(j)] =
          mask(i, j) && nonzero[static_cast<std::size_t>(j)];
    }
  }
  return out;
}

double lasso_objective(const Eigen::RowVectorXd& residual,
                       const Eigen::RowVectorXd& xi, double alpha) {
  return 0.5 * kernels::sum_squares({residual.data(),
                                     static_cast<std::size_t>(residual.size())}) +
         alpha * xi.lpNorm<1>();
}

void check_grid(const std::vector<double>& alphas) {
  if (alphas.empty()) throw ParamError("alpha grid is empty");
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (!std::isfinite(alphas[i]) || alphas[i] < 0.0) {
      throw ParamError("alpha values must be finite and non-negative");
    }
    if (i > 0 && !(alphas[i] > alphas[i - 1])) {
      throw ParamError("alpha grid must be strictly increasing");
    }
  }
}

}  // namespace

Eigen::RowVectorXd least_squares(const RowMatrix& theta,
                                 const Eigen::RowVectorXd& target) {
  return least_squares(theta, Eigen::MatrixXd(target)).row(0);
}

Eigen::MatrixXd least_squares(const RowMatrix& theta,
                              const Eigen::MatrixXd& targets) {
  require_columns(theta, targets.cols());
  require_finite(theta, targets);
  if (theta.rows() < 1 || theta.cols() < 1) {
    throw ShapeError("least squares needs at least one term and one sample");
  }
  const ReducedProblem reduced(theta, targets);
  const std::vector<bool> all(static_cast<std::size_t>(theta.rows()), true);
  Eigen::MatrixXd xi(targets.rows(), theta.rows());
  for (Eigen::Index i = 0; i < targets.rows(); ++i) {
    xi.row(i) = reduced.fit(i, all).transpose();
  }
  return xi;
}

Eigen::RowVectorXd lasso(const RowMatrix& theta,
                         const Eigen::RowVectorXd& target, double alpha,
                         int max_iters, double tol, LassoTrace* trace,
                         const Eigen::RowVectorXd* start) {
  if (!(alpha >= 0.0)) throw ParamError("lasso alpha must be >= 0");
  require_columns(theta, target.size());
  require_finite(theta, target);
  const Eigen::Index p = theta.rows();
  const auto m = static_cast<std::size_t>(theta.cols());
  const auto& k = kernels::active();

  Eigen::RowVectorXd xi = Eigen::RowVectorXd::Zero(p);
  if (start) {
    if (start->size() != p) throw ShapeError("lasso warm start has wrong length");
    xi = *start;
  }
  Eigen::RowVectorXd residual = target - xi * theta;
  Eigen::VectorXd sq_norms(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    sq_norms(j) = k.sum_squares(theta.row(j).data(), m);
  }

  const bool track = trace != nullptr;
#ifndef NDEBUG
  const bool check = true;
#else
  const bool check = track;
#endif
  double previous = check ? lasso_objective(residual, xi, alpha) : 0.0;
  if (track) {
    trace->objective.assign(1, previous);
    trace->converged = false;
  }

  int cycle = 0;
  for (; cycle < max_iters; ++cycle) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (sq_norms(j) == 0.0) {
        xi(j) = 0.0;
        continue;
      }
      const double* row = theta.row(j).data();
      const double rho = k.dot(row, residual.data(), m) + xi(j) * sq_norms(j);
      double updated = 0.0;
      if (rho > alpha) {
        updated = (rho - alpha) / sq_norms(j);
      } else if (rho < -alpha) {
        updated = (rho + alpha) / sq_norms(j);
      }
      const double change = updated - xi(j);
      if (change != 0.0) {
        k.axpy(-change, row, residual.data(), m);
        xi(j) = updated;
        max_change = std::max(max_change, std::abs(change));
      }
    }
    if (check) {
      const double current = lasso_objective(residual, xi, alpha);
      assert(current <= previous + 1e-12 * std::max(1.0, std::abs(previous)));
      previous = current;
      if (track) trace->objective.push_back(current);
    }
    if (max_change < tol) {
      ++cycle;
      if (track) trace->converged = true;
      break;
    }
  }
  if (track) trace->cycles = cycle;
  return xi;
}

Eigen::MatrixXd stlsq(const RowMatrix& theta, const Eigen::MatrixXd& targets,
                      double threshold, int max_rounds,
                      const SupportMask* initial_support, StlsqTrace* trace) {
  if (!(threshold >= 0.0)) throw ParamError("stlsq threshold must be >= 0");
  if (max_rounds < 1) throw ParamError("stlsq needs at least one round");
  require_columns(theta, targets.cols());
  require_finite(theta, targets);
  const SparseProblem problem(theta, targets);
  auto support = problem.full_support();
  if (initial_support) {
    if (initial_support->rows() != targets.rows() ||
        initial_support->cols() != theta.rows()) {
      throw ShapeError("initial support has the wrong shape");
    }
    support = support_from_mask(*initial_support, problem.library().nonzero_rows());
  }
  return problem.library().unscale(
      problem.stlsq(threshold, max_rounds, support, trace));
}

CoefficientMatrix stlsq(const LibraryMatrix& theta,
                        const Eigen::MatrixXd& targets, double threshold,
                        int max_rounds) {
  return {stlsq(theta.values, targets, threshold, max_rounds), theta.spec};
}

SolverKind parse_solver_kind(const std::string& name) {
  if (name == "stlsq") return SolverKind::kStlsq;
  if (name == "lasso") return SolverKind::kLasso;
  throw ParamError("unknown solver '" + name + "'");
}

std::string to_string(SolverKind kind) {
  return kind == SolverKind::kStlsq ? "stlsq" : "lasso";
}

SolverOptions SolverOptions::with_sparsity(double value) const {
  SolverOptions out = *this;
  if (kind == SolverKind::kStlsq) {
    out.threshold = value;
  } else {
    out.alpha = value;
  }
  return out;
}

Eigen::MatrixXd solve_sparse(const RowMatrix& theta,
                             const Eigen::MatrixXd& targets,
                             const SolverOptions& options) {
  if (options.kind == SolverKind::kStlsq) {
    return stlsq(theta, targets, options.threshold, options.max_rounds);
  }
  if (!(options.alpha >= 0.0)) throw ParamError("lasso alpha must be >= 0");
  require_columns(theta, targets.cols());
  require_finite(theta, targets);
  const SparseProblem problem(theta, targets);
  return problem.library().unscale(
      problem.lasso(options.alpha, options.max_iters, options.tol, nullptr));
}

double scaled_condition_number(const RowMatrix& theta) {
  const ScaledLibrary lib(theta);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < theta.rows(); ++j) {
    if (lib.norms(j) > 0.0) keep.push_back(j);
  }
  if (keep.empty()) return std::numeric_limits<double>::infinity();
  RowMatrix sub(static_cast<Eigen::Index>(keep.size()), theta.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    sub.row(static_cast<Eigen::Index>(k)) = lib.scaled.row(keep[k]);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(sub.transpose());
  const Eigen::Index r = std::min(sub.rows(), sub.cols());
  const Eigen::MatrixXd tri =
      qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  const Eigen::VectorXd s = Eigen::BDCSVD<Eigen::MatrixXd>(tri).singularValues();
  if (s.size() < sub.rows() || s(s.size() - 1) == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return s(0) / s(s.size() - 1);
}

double rms_residual(const RowMatrix& theta, const Eigen::MatrixXd& targets,
                    const Eigen::MatrixXd& xi) {
  require_columns(theta, targets.cols());
  if (xi.rows() != targets.rows() || xi.cols() != theta.rows()) {
    throw ShapeError("coefficient matrix shape does not match the regression");
  }
  if (targets.size() == 0) return 0.0;
  const Eigen::MatrixXd fitted = xi * theta;
  const double ss = kernels::squared_distance(
      {fitted.data(), static_cast<std::size_t>(fitted.size())},
      {targets.data(), static_cast<std::size_t>(targets.size())});
  return std::sqrt(ss / static_cast<double>(targets.size()));
}

int count_active(const Eigen::MatrixXd& xi) {
  return static_cast<int>((xi.array() != 0.0).count());
}

std::size_t select_pareto_point(const std::vector<ParetoPoint>& points) {
  if (points.empty()) throw ParamError("no Pareto points to select from");
  double best = points.front().validation_error;
  for (const auto& p : points) best = std::min(best, p.validation_error);
  const double limit = kParetoSlack * best;
  std::size_t chosen = points.size();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!(p.validation_error <= limit)) continue;
    if (chosen == points.size() || p.nnz < points[chosen].nnz ||
        (p.nnz == points[chosen].nnz &&
         p.validation_error < points[chosen].validation_error)) {
      chosen = i;
    }
  }
  return chosen;
}

namespace {

struct SweepResult {
  std::vector<ParetoPoint> points;
  std::vector<Eigen::MatrixXd> coefficients;
};

SweepResult run_sweep(const SparseProblem& problem, const RowMatrix& theta,
                      const Eigen::MatrixXd& targets,
                      const std::vector<double>& alphas,
                      const SolverOptions& solver,
                      const ValidationData& validation) {
  SweepResult out;
  auto support = problem.full_support();
  Eigen::MatrixXd warm;
  for (double alpha : alphas) {
    Eigen::MatrixXd scaled;
    if (solver.kind == SolverKind::kStlsq) {
      scaled = problem.stlsq(alpha, solver.max_rounds, support, nullptr);
    } else {
      scaled = problem.lasso(alpha, solver.max_iters, solver.tol,
                             warm.size() ? &warm : nullptr);
      warm = scaled;
    }
    Eigen::MatrixXd xi = problem.library().unscale(scaled);
    ParetoPoint point;
    point.alpha = alpha;
    point.nnz = count_active(xi);
    point.train_error = rms_residual(theta, targets, xi);
    point.validation_error =
        rms_residual(validation.theta, validation.targets, xi);
    if (solver.kind == SolverKind::kStlsq && !out.points.empty() &&
        point.nnz > out.points.back().nnz) {
      throw Error("stlsq sweep produced a growing support");
    }
    out.points.push_back(point);
    out.coefficients.push_back(std::move(xi));
  }
  return out;
}

std::vector<double> refine_grid(const std::vector<double>& alphas,
                                std::size_t selected) {
  const std::size_t lo = selected == 0 ? 0 : selected - 1;
  const std::size_t hi = std::min(selected + 1, alphas.size() - 1);
  std::vector<double> merged = alphas;
  const double a = alphas[lo];
  const double b = alphas[hi];
  if (a > 0.0 && alphas.front() > 0.0) {
    const double coarse =
        std::log(alphas.back() / alphas.front()) / static_cast<double>(alphas.size() - 1);
    const double fine = coarse / 10.0;
    for (int k = 1;; ++k) {
      const double v = a * std::exp(fine * k);
      if (v >= b * (1.0 - 1e-12)) break;
      merged.push_back(v);
    }
  } else {
    const double fine =
        (alphas.back() - alphas.front()) / static_cast<double>(alphas.size() - 1) / 10.0;
    for (int k = 1;; ++k) {
      const double v = a + fine * k;
      if (v >= b - 1e-12 * std::abs(b)) break;
      merged.push_back(v);
    }
  }
  std::sort(merged.begin(), merged.end());
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  return merged;
}

}  // namespace

ParetoCurve pareto_sweep(const RowMatrix& theta, const Eigen::MatrixXd& targets,
                         const std::vector<double>& alphas,
                         const SolverOptions& solver,
                         const ValidationData& validation, bool refine) {
  check_grid(alphas);
  require_columns(theta, targets.cols());
  require_finite(theta, targets);
  if (validation.theta.rows() != theta.rows() ||
      validation.targets.rows() != targets.rows()) {
    throw ShapeError("validation data does not match the training regression");
  }
  const SparseProblem problem(theta, targets);
  SweepResult sweep = run_sweep(problem, theta, targets, alphas, solver, validation);
  std::size_t selected = select_pareto_point(sweep.points);
  if (refine && alphas.size() > 1) {
    const auto grid = refine_grid(alphas, selected);
    sweep = run_sweep(problem, theta, targets, grid, solver, validation);
    selected = select_pareto_point(sweep.points);
  }
  ParetoCurve curve;
  curve.points = std::move(sweep.points);
  curve.selected = selected;
  curve.selected_coefficients = std::move(sweep.coefficients[selected]);
  return curve;
}

void save_pareto_csv(const ParetoCurve& curve,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "alpha,nnz,train_error,validation_error\n";
  char buf[128];
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g,%.17g\n", p.alpha, p.nnz,
                  p.train_error, p.validation_error);
    out << buf;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<double> parse_alpha_grid(const std::string& text) {
  auto parse = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ParamError("cannot parse alpha grid '" + text + "'");
    }
  };
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() != 3) throw ParamError("alpha grid must be lo:hi:count");
    const double lo = parse(parts[0]);
    const double hi = parse(parts[1]);
    const double count = parse(parts[2]);
    if (!(lo > 0.0) || !(hi > lo) || count < 1 || count != std::floor(count)) {
      throw ParamError("alpha grid needs 0 < lo < hi and an integer count");
    }
    const int n = static_cast<int>(count);
    if (n == 1) return {lo};
    for (int i = 0; i < n; ++i) {
      const double f = static_cast<double>(i) / (n - 1);
      out.push_back(i == n - 1 ? hi : lo * std::pow(hi / lo, f));
    }
    return out;
  }
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse(part));
  check_grid(out);
  return out;
}

}  // namespace sindyc
