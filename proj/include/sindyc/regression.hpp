#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sindyc/library.hpp"

namespace sindyc {

/// Singular values below this fraction of the largest are treated as zero
/// by every pseudo-inverse in the toolkit.
inline constexpr double kPinvCutoff = 1e-12;

/// Ξ: one row per regression target, one column per library term.
struct CoefficientMatrix {
  Eigen::MatrixXd values;
  LibrarySpec library;
};

/// Minimum-norm solution of min |target - xi * theta|_2 via the SVD of
/// thetaᵀ. theta is p x m, target 1 x m. Throws DataError on non-finite
/// input and ShapeError on mismatched lengths.
Eigen::RowVectorXd least_squares(const RowMatrix& theta,
                                 const Eigen::RowVectorXd& target);

/// Multi-target variant: each row of targets is solved independently.
Eigen::MatrixXd least_squares(const RowMatrix& theta,
                              const Eigen::MatrixXd& targets);

struct LassoTrace {
  /// Objective after every full coordinate cycle; entry 0 is at xi = 0.
  std::vector<double> objective;
  int cycles = 0;
  bool converged = false;
};

/// Cyclic coordinate descent on 1/2 |target - xi theta|_2^2 + alpha |xi|_1
/// on theta exactly as given (no rescaling). Stops when the largest
/// coordinate change in a cycle drops below tol or after max_iters cycles.
/// `start` optionally warm-starts the iterate. Throws ParamError for
/// alpha < 0.
Eigen::RowVectorXd lasso(const RowMatrix& theta,
                         const Eigen::RowVectorXd& target, double alpha,
                         int max_iters = 10000, double tol = 1e-10,
                         LassoTrace* trace = nullptr,
                         const Eigen::RowVectorXd* start = nullptr);

/// Support mask per target row (true = term active).
using SupportMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct StlsqTrace {
  /// supports[row][round] is the active set entering that round's fit.
  std::vector<std::vector<std::vector<bool>>> supports;
};

/// Sequential thresholded least squares.
///
/// Library rows are scaled to unit root-mean-square, so a scaled coefficient
/// is the RMS contribution of its term to the target. Each round fits least
/// squares on the surviving terms, zeroes every scaled coefficient below
/// threshold and repeats until the support stops changing or max_rounds is
/// reached. Coefficients are returned in the original scale with exact zeros
/// off-support. Rows of theta that are identically zero never enter the
/// support. `initial_support` (targets.rows() x p) restricts the starting
/// active set.
Eigen::MatrixXd stlsq(const RowMatrix& theta, const Eigen::MatrixXd& targets,
                      double threshold, int max_rounds = 20,
                      const SupportMask* initial_support = nullptr,
                      StlsqTrace* trace = nullptr);

CoefficientMatrix stlsq(const LibraryMatrix& theta,
                        const Eigen::MatrixXd& targets, double threshold,
                        int max_rounds = 20);

enum class SolverKind { kStlsq, kLasso };

SolverKind parse_solver_kind(const std::string& name);
std::string to_string(SolverKind kind);

struct SolverOptions {
  SolverKind kind = SolverKind::kStlsq;
  /// STLSQ cutoff on RMS-scaled coefficients (target units).
  double threshold = 0.1;
  /// LASSO penalty weight on RMS-scaled coefficients.
  double alpha = 0.0;
  int max_rounds = 20;
  int max_iters = 10000;
  double tol = 1e-10;

  /// The sparsity knob of the selected solver.
  double sparsity() const { return kind == SolverKind::kStlsq ? threshold : alpha; }
  SolverOptions with_sparsity(double value) const;
};

/// Dispatches to STLSQ or to LASSO on the RMS-scaled library, returning
/// coefficients in the original scale. LASSO minimizes
/// 1/(2m) |target - xi theta|^2 + alpha |xi|_1 per target row.
Eigen::MatrixXd solve_sparse(const RowMatrix& theta,
                             const Eigen::MatrixXd& targets,
                             const SolverOptions& options);

/// 2-norm condition number of the RMS-scaled library (zero rows
/// ignored); informational only.
double scaled_condition_number(const RowMatrix& theta);

/// RMS over all entries of targets - xi * theta.
double rms_residual(const RowMatrix& theta, const Eigen::MatrixXd& targets,
                    const Eigen::MatrixXd& xi);

/// Number of non-zero coefficients.
int count_active(const Eigen::MatrixXd& xi);

struct ParetoPoint {
  double alpha = 0.0;
  int nnz = 0;
  double train_error = 0.0;
  double validation_error = 0.0;
};

struct ParetoCurve {
  std::vector<ParetoPoint> points;
  std::size_t selected = 0;
  /// Coefficients at the selected point.
  Eigen::MatrixXd selected_coefficients;
};

struct ValidationData {
  RowMatrix theta;
  Eigen::MatrixXd targets;
};

/// Relative slack on the minimum validation error within which the
/// sparsest model is preferred.
inline constexpr double kParetoSlack = 1.05;

/// Sweeps the sparsity knob over an increasing grid.
///
/// STLSQ points are solved in order with each point's support seeded from
/// the previous one, so nnz never increases with alpha; LASSO points are
/// warm-started. The selected point is the sparsest one whose validation
/// error is within kParetoSlack of the minimum. With refine set and more
/// than one grid point, the grid between the selected point's neighbours is
/// filled in at ten times the coarse spacing and the sweep is repeated on
/// the merged grid. Throws ParamError for an empty or non-increasing grid.
ParetoCurve pareto_sweep(const RowMatrix& theta, const Eigen::MatrixXd& targets,
                         const std::vector<double>& alphas,
                         const SolverOptions& solver,
                         const ValidationData& validation, bool refine = true);

/// Selection rule applied to a finished curve.
std::size_t select_pareto_point(const std::vector<ParetoPoint>& points);

/// `alpha,nnz,train_error,validation_error` with one row per point.
void save_pareto_csv(const ParetoCurve& curve,
                     const std::filesystem::path& path);

/// "lo:hi:count" -> count log-spaced values, or a comma-separated list.
std::vector<double> parse_alpha_grid(const std::string& text);

}  // namespace sindyc
