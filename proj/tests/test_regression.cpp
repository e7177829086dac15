#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "sindyc/errors.hpp"
#include "sindyc/regression.hpp"

using namespace sindyc;

namespace {

RowMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// p x m with orthonormal rows.
RowMatrix orthonormal_rows(Eigen::Index p, Eigen::Index m, std::mt19937_64& rng) {
  const Eigen::MatrixXd a = random_matrix(m, p, rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ() *
                            Eigen::MatrixXd::Identity(m, p);
  return q.transpose();
}

double lasso_objective(const RowMatrix& theta, const Eigen::RowVectorXd& target,
                       const Eigen::RowVectorXd& xi, double alpha) {
  return 0.5 * (target - xi * theta).squaredNorm() + alpha * xi.lpNorm<1>();
}

}  // namespace

TEST_CASE("least squares examples") {
  CHECK(least_squares(RowMatrix::Ones(1, 6), Eigen::RowVectorXd(Eigen::RowVectorXd::Constant(6, 5.0)))(0) ==
        doctest::Approx(5.0));
  CHECK(least_squares(RowMatrix::Identity(2, 2), Eigen::RowVectorXd(Eigen::RowVector2d(3, 4))).isApprox(
      Eigen::RowVector2d(3, 4), 1e-14));

  std::mt19937_64 rng(1);
  const RowMatrix q = orthonormal_rows(4, 30, rng);
  const Eigen::RowVectorXd t = random_matrix(1, 30, rng);
  const Eigen::RowVectorXd xi = least_squares(q, t);
  CHECK((xi - t * q.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("least squares residual is orthogonal to the library rows") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const RowMatrix theta = random_matrix(1 + trial % 6, 40, rng);
    const Eigen::RowVectorXd t = random_matrix(1, 40, rng);
    const Eigen::RowVectorXd r = t - least_squares(theta, t) * theta;
    CHECK((theta * r.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * t.norm());
  }
}

TEST_CASE("least squares is minimum norm on rank-deficient libraries") {
  RowMatrix theta(2, 4);
  theta << 1, 2, 3, 4, 1, 2, 3, 4;
  const Eigen::RowVectorXd xi = least_squares(theta, Eigen::RowVectorXd(Eigen::RowVector4d(2, 4, 6, 8)));
  CHECK(xi(0) == doctest::Approx(1.0));
  CHECK(xi(1) == doctest::Approx(1.0));
}

TEST_CASE("least squares input checks") {
  RowMatrix theta = RowMatrix::Ones(2, 3);
  CHECK_THROWS_AS(least_squares(theta, Eigen::RowVectorXd(Eigen::RowVectorXd::Ones(4))), ShapeError);
  theta(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(least_squares(theta, Eigen::RowVectorXd(Eigen::RowVectorXd::Ones(3))), DataError);
}

TEST_CASE("lasso without penalty equals least squares") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const RowMatrix theta = random_matrix(5, 60, rng);
    const Eigen::RowVectorXd t = random_matrix(1, 60, rng);
    const Eigen::RowVectorXd a = lasso(theta, t, 0.0, 100000, 1e-14);
    CHECK((a - least_squares(theta, t)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("lasso on one coordinate is soft thresholding") {
  const Eigen::Index m = 20;
  RowMatrix row(1, m);
  for (Eigen::Index k = 0; k < m; ++k) row(0, k) = 0.5 + 0.1 * static_cast<double>(k);
  const double norm2 = row.squaredNorm();
  for (double beta : {3.0, -2.0, 0.05}) {
    const Eigen::RowVectorXd target = beta * row;
    for (double alpha : {0.0, 1.0, 10.0}) {
      const double expected =
          (beta > 0 ? 1.0 : -1.0) * std::max(std::abs(beta) - alpha / norm2, 0.0);
      CHECK(lasso(row, target, alpha)(0) == doctest::Approx(expected).epsilon(1e-10));
    }
  }
}

TEST_CASE("lasso with a large penalty returns zero") {
  std::mt19937_64 rng(4);
  const RowMatrix theta = random_matrix(6, 50, rng);
  const Eigen::RowVectorXd t = random_matrix(1, 50, rng);
  const double alpha = (t * theta.transpose()).cwiseAbs().maxCoeff();
  CHECK(lasso(theta, t, alpha).isZero(0.0));
  CHECK_THROWS_AS(lasso(theta, t, -1.0), ParamError);
}

TEST_CASE("lasso objective never increases") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const RowMatrix theta = random_matrix(8, 40, rng);
    const Eigen::RowVectorXd t = random_matrix(1, 40, rng);
    const double alpha = 0.5 * trial;
    LassoTrace trace;
    const Eigen::RowVectorXd xi = lasso(theta, t, alpha, 10000, 1e-12, &trace);
    REQUIRE(trace.objective.size() >= 2);
    for (std::size_t k = 1; k < trace.objective.size(); ++k) {
      CHECK(trace.objective[k] <= trace.objective[k - 1] * (1 + 1e-12));
    }
    CHECK(trace.objective.back() == doctest::Approx(lasso_objective(theta, t, xi, alpha)));
    CHECK(trace.converged);
  }
}

TEST_CASE("stlsq with zero threshold is least squares") {
  std::mt19937_64 rng(6);
  const RowMatrix theta = random_matrix(5, 30, rng);
  const Eigen::MatrixXd targets = random_matrix(3, 30, rng);
  CHECK((stlsq(theta, targets, 0.0) - least_squares(theta, targets)).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("stlsq drops a small orthogonal component") {
  std::mt19937_64 rng(7);
  const Eigen::Index m = 10;
  const RowMatrix q = orthonormal_rows(2, m, rng);
  const Eigen::RowVectorXd target = 2.0 * q.row(0) + 0.01 * q.row(1);
  // Rows are scaled to unit RMS, so the cut applies to coef / sqrt(m).
  const Eigen::MatrixXd xi = stlsq(q, Eigen::MatrixXd(target), 0.1);
  CHECK(xi(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(xi(0, 1) == 0.0);
}

TEST_CASE("stlsq recovers an exact three-term combination") {
  std::mt19937_64 rng(8);
  const RowMatrix theta = random_matrix(8, 100, rng);
  Eigen::RowVectorXd planted = Eigen::RowVectorXd::Zero(8);
  planted(1) = 1.5;
  planted(4) = -0.7;
  planted(6) = 3.0;
  const Eigen::MatrixXd xi = stlsq(theta, Eigen::MatrixXd(planted * theta), 0.2);
  CHECK((xi.row(0) - planted).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(count_active(xi) == 3);
}

TEST_CASE("stlsq support never grows between rounds") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const RowMatrix theta = random_matrix(10, 50, rng);
    const Eigen::MatrixXd targets = random_matrix(2, 50, rng);
    StlsqTrace trace;
    stlsq(theta, targets, 0.05 + 0.05 * trial, 20, nullptr, &trace);
    for (const auto& rounds : trace.supports) {
      for (std::size_t r = 1; r < rounds.size(); ++r) {
        for (std::size_t j = 0; j < rounds[r].size(); ++j) {
          CHECK((!rounds[r][j] || rounds[r - 1][j]));
        }
      }
    }
  }
}

TEST_CASE("stlsq is idempotent on its own support") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const RowMatrix theta = random_matrix(9, 40, rng);
    const Eigen::MatrixXd targets = random_matrix(3, 40, rng);
    const Eigen::MatrixXd first = stlsq(theta, targets, 0.3);
    const SupportMask support = first.array() != 0.0;
    const Eigen::MatrixXd second = stlsq(theta, targets, 0.3, 20, &support);
    CHECK(first == second);
  }
}

TEST_CASE("stlsq exact recovery on orthonormal libraries") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mag(1.0, 5.0);
  int recovered = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index p = 2 + trial % 9;
    const Eigen::Index m = p + 5 + trial % 40;
    const RowMatrix q = orthonormal_rows(p, m, rng);
    // Scaled coefficients are coef * rms(row) = coef / sqrt(m).
    const double threshold = 0.5 / std::sqrt(static_cast<double>(m));
    Eigen::MatrixXd planted = Eigen::MatrixXd::Zero(2, p);
    for (Eigen::Index i = 0; i < planted.size(); ++i) {
      if (rng() % 2) planted(i) = (rng() % 2 ? 1.0 : -1.0) * mag(rng);
    }
    const Eigen::MatrixXd xi = stlsq(q, Eigen::MatrixXd(planted * q), threshold);
    const bool same = ((xi.array() != 0.0) == (planted.array() != 0.0)).all();
    if (same && (xi - planted).cwiseAbs().maxCoeff() < 1e-10) ++recovered;
  }
  CHECK(recovered == 100);
}

TEST_CASE("zero library rows stay inactive") {
  std::mt19937_64 rng(12);
  RowMatrix theta = random_matrix(4, 30, rng);
  theta.row(2).setZero();
  const Eigen::MatrixXd xi = stlsq(theta, random_matrix(1, 30, rng), 0.0);
  CHECK(xi(0, 2) == 0.0);
  CHECK(std::isfinite(scaled_condition_number(theta)));
}

TEST_CASE("solve_sparse dispatch") {
  std::mt19937_64 rng(13);
  const RowMatrix theta = random_matrix(4, 50, rng);
  const Eigen::MatrixXd targets = random_matrix(2, 50, rng);
  SolverOptions opts;
  opts.kind = SolverKind::kLasso;
  opts.alpha = 0.0;
  opts.tol = 1e-14;
  CHECK((solve_sparse(theta, targets, opts) - least_squares(theta, targets)).cwiseAbs().maxCoeff() <
        1e-8);
  opts.alpha = 1e3;
  CHECK(solve_sparse(theta, targets, opts).isZero(0.0));
  CHECK(parse_solver_kind("lasso") == SolverKind::kLasso);
  CHECK(to_string(SolverKind::kStlsq) == "stlsq");
  CHECK_THROWS_AS(parse_solver_kind("omp"), ParamError);
  CHECK(opts.with_sparsity(0.25).alpha == 0.25);
}

TEST_CASE("residual helpers") {
  RowMatrix theta(1, 4);
  theta << 1, 1, 1, 1;
  Eigen::MatrixXd targets(1, 4);
  targets << 1, 3, 1, 3;
  CHECK(rms_residual(theta, targets, Eigen::MatrixXd::Constant(1, 1, 2.0)) == 1.0);
  CHECK(count_active((Eigen::MatrixXd(2, 2) << 0, 1, -2, 0).finished()) == 2);
}

TEST_CASE("alpha grid parsing") {
  const auto grid = parse_alpha_grid("1e-6:1e2:25");
  REQUIRE(grid.size() == 25);
  CHECK(grid.front() == doctest::Approx(1e-6));
  CHECK(grid.back() == doctest::Approx(1e2));
  for (std::size_t k = 1; k < grid.size(); ++k) {
    CHECK(std::log10(grid[k] / grid[k - 1]) == doctest::Approx(8.0 / 24.0));
  }
  CHECK(parse_alpha_grid("0,0.1,0.5") == std::vector<double>{0.0, 0.1, 0.5});
  CHECK(parse_alpha_grid("0.3") == std::vector<double>{0.3});
  CHECK_THROWS_AS(parse_alpha_grid(""), ParamError);
  CHECK_THROWS_AS(parse_alpha_grid("0.5,0.1"), ParamError);
  CHECK_THROWS_AS(parse_alpha_grid("1:abc:3"), ParamError);
}

TEST_CASE("pareto selection rule") {
  std::vector<ParetoPoint> pts = {
      {0.1, 6, 0.0, 1.00}, {0.2, 4, 0.0, 1.04}, {0.3, 3, 0.0, 1.20}, {0.4, 4, 0.0, 1.01}};
  // Points 1 and 3 tie on sparsity; the lower validation error wins.
  CHECK(select_pareto_point(pts) == 3);
  pts[3].nnz = 5;
  CHECK(select_pareto_point(pts) == 1);
}

TEST_CASE("pareto sweep on a single alpha") {
  std::mt19937_64 rng(14);
  const RowMatrix theta = random_matrix(5, 40, rng);
  const Eigen::MatrixXd targets = random_matrix(1, 40, rng);
  const ParetoCurve c = pareto_sweep(theta, targets, {0.1}, {}, {theta, targets});
  CHECK(c.points.size() == 1);
  CHECK(c.selected == 0);
  CHECK_THROWS_AS(pareto_sweep(theta, targets, {}, {}, {theta, targets}), ParamError);
  CHECK_THROWS_AS(pareto_sweep(theta, targets, {0.2, 0.1}, {}, {theta, targets}), ParamError);
}

TEST_CASE("pareto sweep finds the planted model on noiseless data") {
  std::mt19937_64 rng(15);
  const RowMatrix train = random_matrix(10, 200, rng);
  const RowMatrix valid = random_matrix(10, 100, rng);
  Eigen::MatrixXd planted = Eigen::MatrixXd::Zero(2, 10);
  planted(0, 1) = 2.0;
  planted(0, 7) = -1.0;
  planted(1, 3) = 0.8;
  for (SolverKind kind : {SolverKind::kStlsq, SolverKind::kLasso}) {
    SolverOptions opts;
    opts.kind = kind;
    const ParetoCurve c = pareto_sweep(train, planted * train, parse_alpha_grid("1e-9:1e-1:17"),
                                       opts, {valid, planted * valid});
    const ParetoPoint& best = c.points[c.selected];
    CAPTURE(to_string(kind));
    CAPTURE(best.alpha);
    CHECK(best.validation_error < 1e-6);
    CHECK(best.nnz == 3);
    if (kind == SolverKind::kStlsq) {
      for (std::size_t k = 1; k < c.points.size(); ++k) {
        CHECK(c.points[k].alpha > c.points[k - 1].alpha);
        CHECK(c.points[k].nnz <= c.points[k - 1].nnz);
      }
      CHECK(c.points.size() > 17);  // refined
    }
  }
}

TEST_CASE("pareto sweep on pure noise ends empty") {
  std::mt19937_64 rng(16);
  const RowMatrix theta = random_matrix(6, 80, rng);
  const Eigen::MatrixXd noise = random_matrix(1, 80, rng);
  for (SolverKind kind : {SolverKind::kStlsq, SolverKind::kLasso}) {
    SolverOptions opts;
    opts.kind = kind;
    const ParetoCurve c =
        pareto_sweep(theta, noise, parse_alpha_grid("1e-6:1e3:10"), opts, {theta, noise}, false);
    CHECK(c.points.size() == 10);
    CHECK(c.points.back().nnz == 0);
  }
}

TEST_CASE("pareto CSV layout") {
  ParetoCurve c;
  c.points = {{0.5, 3, 0.25, 0.125}};
  const auto p = std::filesystem::temp_directory_path() / "sindyc_pareto_test.csv";
  save_pareto_csv(c, p);
  std::ifstream in(p);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "alpha,nnz,train_error,validation_error");
  CHECK(row == "0.5,3,0.25,0.125");
  std::filesystem::remove(p);
}
