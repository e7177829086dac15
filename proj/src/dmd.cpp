#include "sindyc/dmd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sindyc/errors.hpp"
#include "sindyc/regression.hpp"

namespace sindyc {

namespace {

struct EigenPairs {
  Eigen::VectorXcd values;
  Eigen::MatrixXcd vectors;
};

EigenPairs sorted_eigen(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, true);
  if (solver.info() != Eigen::Success) {
    throw RankError("eigendecomposition did not converge");
  }
  const Eigen::VectorXcd vals = solver.eigenvalues();
  const Eigen::MatrixXcd vecs = solver.eigenvectors();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(vals.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    const double mi = std::abs(vals(i));
    const double mj = std::abs(vals(j));
    if (mi != mj) return mi > mj;
    return vals(i).imag() > vals(j).imag();
  });
  EigenPairs out{Eigen::VectorXcd(vals.size()), Eigen::MatrixXcd(vecs.rows(), vecs.cols())};
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    out.values(kk) = vals(order[k]);
    out.vectors.col(kk) = vecs.col(order[k]);
  }
  return out;
}

// Number of singular values kept after the relative cutoff and optional cap.
Eigen::Index kept_rank(const Eigen::VectorXd& s, std::optional<Eigen::Index> cap) {
  if (s.size() == 0 || !(s(0) > 0.0)) return 0;
  const double cutoff = kPinvCutoff * s(0);
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > cutoff) ++r;
  if (cap) r = std::min(r, *cap);
  return r;
}

void check_rank_arg(std::optional<Eigen::Index> rank, Eigen::Index limit) {
  if (rank && (*rank < 1 || *rank > limit)) {
    throw ParamError("rank must lie in [1, " + std::to_string(limit) + "]");
  }
}

nlohmann::json real_matrix_json(const Eigen::MatrixXd& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Eigen::MatrixXd real_matrix_from(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw SchemaError("matrix data has the wrong length");
  }
  return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

nlohmann::json complex_matrix_json(const Eigen::MatrixXcd& m) {
  const Eigen::MatrixXd re = m.real();
  const Eigen::MatrixXd im = m.imag();
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"real", std::vector<double>(re.data(), re.data() + re.size())},
          {"imag", std::vector<double>(im.data(), im.data() + im.size())}};
}

Eigen::MatrixXcd complex_matrix_from(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto re = j.at("real").get<std::vector<double>>();
  const auto im = j.at("imag").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(re.size()) != rows * cols ||
      re.size() != im.size()) {
    throw SchemaError("complex matrix data has the wrong length");
  }
  Eigen::MatrixXcd out(rows, cols);
  out.real() = Eigen::Map<const Eigen::MatrixXd>(re.data(), rows, cols);
  out.imag() = Eigen::Map<const Eigen::MatrixXd>(im.data(), rows, cols);
  return out;
}

nlohmann::json eigenvalues_json(const Eigen::VectorXcd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back({v(i).real(), v(i).imag()});
  }
  return out;
}

Eigen::VectorXcd eigenvalues_from(const nlohmann::json& j) {
  Eigen::VectorXcd out(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto pair = j.at(i).get<std::vector<double>>();
    if (pair.size() != 2) throw SchemaError("eigenvalue must be [re, im]");
    out(static_cast<Eigen::Index>(i)) = {pair[0], pair[1]};
  }
  return out;
}

Eigen::VectorXd vector_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <typename F>
auto parse_or_schema(F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed DMD document: ") + e.what());
  }
}

}  // namespace

bool DmdResult::operator==(const DmdResult& o) const {
  return rank == o.rank && eigenvalues == o.eigenvalues && modes == o.modes &&
         reduced_operator == o.reduced_operator && svd_basis == o.svd_basis &&
         singular_values == o.singular_values && right_vectors == o.right_vectors &&
         eigvec_reduced == o.eigvec_reduced && full_operator == o.full_operator;
}

bool DmdcResult::operator==(const DmdcResult& o) const {
  return rank == o.rank && state_operator == o.state_operator &&
         input_operator == o.input_operator && eigenvalues == o.eigenvalues &&
         eigenvectors == o.eigenvectors && singular_values == o.singular_values &&
         ill_conditioned == o.ill_conditioned && warnings == o.warnings;
}

DmdResult dmd(const SnapshotPair& pair, std::optional<Eigen::Index> rank) {
  const Eigen::MatrixXd& x = pair.current;
  const Eigen::MatrixXd& xp = pair.shifted;
  if (x.rows() != xp.rows() || x.cols() != xp.cols()) {
    throw ShapeError("snapshot matrices differ in shape");
  }
  if (x.cols() < 1 || x.rows() < 1) throw SizeError("dmd needs at least one snapshot");
  if (!x.allFinite() || !xp.allFinite()) throw DataError("non-finite snapshot entry");
  check_rank_arg(rank, std::min(x.rows(), x.cols()));

  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Index r = kept_rank(svd.singularValues(), rank);
  if (r == 0) throw RankError("snapshot matrix has no usable rank");

  DmdResult out;
  out.rank = r;
  out.svd_basis = svd.matrixU().leftCols(r);
  out.singular_values = svd.singularValues().head(r);
  out.right_vectors = svd.matrixV().leftCols(r);
  // X' V Σ⁻¹, shared by the reduced operator and the modes.
  const Eigen::MatrixXd xvs =
      (xp * out.right_vectors) * out.singular_values.cwiseInverse().asDiagonal();
  out.reduced_operator = out.svd_basis.transpose() * xvs;
  out.full_operator = xvs * out.svd_basis.transpose();
  EigenPairs eig = sorted_eigen(out.reduced_operator);
  out.eigenvalues = std::move(eig.values);
  out.eigvec_reduced = std::move(eig.vectors);
  out.modes = xvs.cast<std::complex<double>>() * out.eigvec_reduced;
  return out;
}

DmdcResult dmdc(const SnapshotPair& pair, std::optional<Eigen::Index> rank) {
  if (!pair.inputs_current) throw ParamError("dmdc needs input snapshots");
  const Eigen::MatrixXd& x = pair.current;
  const Eigen::MatrixXd& xp = pair.shifted;
  const Eigen::MatrixXd& u = *pair.inputs_current;
  if (x.rows() != xp.rows() || x.cols() != xp.cols() || u.cols() != x.cols()) {
    throw ShapeError("snapshot matrices differ in shape");
  }
  if (x.cols() < 1) throw SizeError("dmdc needs at least one snapshot");
  if (!x.allFinite() || !xp.allFinite() || !u.allFinite()) {
    throw DataError("non-finite snapshot entry");
  }
  const Eigen::Index n = x.rows();
  const Eigen::Index q = u.rows();
  check_rank_arg(rank, std::min(n + q, x.cols()));

  Eigen::MatrixXd omega(n + q, x.cols());
  omega.topRows(n) = x;
  omega.bottomRows(q) = u;

  DmdcResult out;
  if (x.cols() < n + q) {
    out.warnings.push_back("fewer snapshots than state plus input channels");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(omega, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.singular_values = svd.singularValues();
  const Eigen::Index full = kept_rank(out.singular_values, std::nullopt);
  if (full == 0) throw RankError("stacked snapshot matrix has no usable rank");
  if (full < n + q) {
    out.ill_conditioned = true;
    out.warnings.push_back("stacked state/input matrix is rank deficient");
  }
  const Eigen::Index r = kept_rank(out.singular_values, rank);
  out.rank = r;
  const Eigen::MatrixXd g =
      (xp * svd.matrixV().leftCols(r)) *
      out.singular_values.head(r).cwiseInverse().asDiagonal() *
      svd.matrixU().leftCols(r).transpose();
  out.state_operator = g.leftCols(n);
  out.input_operator = g.rightCols(q);
  EigenPairs eig = sorted_eigen(out.state_operator);
  out.eigenvalues = std::move(eig.values);
  out.eigenvectors = std::move(eig.vectors);
  return out;
}

Eigen::MatrixXd dmd_predict(const DmdResult& result, const Eigen::VectorXd& x0,
                            Eigen::Index steps) {
  if (steps < 0) throw ParamError("prediction steps must be >= 0");
  if (x0.size() != result.modes.rows()) {
    throw ShapeError("initial state length does not match the modes");
  }
  const Eigen::MatrixXcd& phi = result.modes;
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  Eigen::VectorXcd proj = svd.matrixU().adjoint() * x0.cast<std::complex<double>>();
  const double cutoff = s.size() ? kPinvCutoff * s(0) : 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    proj(i) = s(i) > cutoff ? proj(i) / s(i) : std::complex<double>(0.0);
  }
  Eigen::VectorXcd b = svd.matrixV() * proj;

  Eigen::MatrixXd out(x0.size(), steps + 1);
  for (Eigen::Index k = 0; k <= steps; ++k) {
    out.col(k) = (phi * b).real();
    b = b.cwiseProduct(result.eigenvalues);
  }
  return out;
}

nlohmann::json dmd_to_json(const DmdResult& r) {
  return {
      {"rank", r.rank},
      {"eigenvalues", eigenvalues_json(r.eigenvalues)},
      {"singular_values", std::vector<double>(r.singular_values.data(),
                                              r.singular_values.data() +
                                                  r.singular_values.size())},
      {"modes", complex_matrix_json(r.modes)},
      {"reduced_operator", real_matrix_json(r.reduced_operator)},
      {"svd_basis", real_matrix_json(r.svd_basis)},
      {"right_vectors", real_matrix_json(r.right_vectors)},
      {"eigvec_reduced", complex_matrix_json(r.eigvec_reduced)},
      {"full_operator", real_matrix_json(r.full_operator)},
  };
}

DmdResult dmd_from_json(const nlohmann::json& doc) {
  return parse_or_schema([&] {
    DmdResult r;
    r.rank = doc.at("rank").get<Eigen::Index>();
    r.eigenvalues = eigenvalues_from(doc.at("eigenvalues"));
    r.singular_values = vector_from(doc.at("singular_values"));
    r.modes = complex_matrix_from(doc.at("modes"));
    r.reduced_operator = real_matrix_from(doc.at("reduced_operator"));
    r.svd_basis = real_matrix_from(doc.at("svd_basis"));
    r.right_vectors = real_matrix_from(doc.at("right_vectors"));
    r.eigvec_reduced = complex_matrix_from(doc.at("eigvec_reduced"));
    r.full_operator = real_matrix_from(doc.at("full_operator"));
    if (r.eigenvalues.size() != r.rank || r.modes.cols() != r.rank) {
      throw SchemaError("DMD rank does not match its spectral data");
    }
    return r;
  });
}

nlohmann::json dmdc_to_json(const DmdcResult& r) {
  return {
      {"rank", r.rank},
      {"state_operator", real_matrix_json(r.state_operator)},
      {"input_operator", real_matrix_json(r.input_operator)},
      {"eigenvalues", eigenvalues_json(r.eigenvalues)},
      {"eigenvectors", complex_matrix_json(r.eigenvectors)},
      {"singular_values", std::vector<double>(r.singular_values.data(),
                                              r.singular_values.data() +
                                                  r.singular_values.size())},
      {"ill_conditioned", r.ill_conditioned},
      {"warnings", r.warnings},
  };
}

DmdcResult dmdc_from_json(const nlohmann::json& doc) {
  return parse_or_schema([&] {
    DmdcResult r;
    r.rank = doc.at("rank").get<Eigen::Index>();
    r.state_operator = real_matrix_from(doc.at("state_operator"));
    r.input_operator = real_matrix_from(doc.at("input_operator"));
    r.eigenvalues = eigenvalues_from(doc.at("eigenvalues"));
    r.eigenvectors = complex_matrix_from(doc.at("eigenvectors"));
    r.singular_values = vector_from(doc.at("singular_values"));
    r.ill_conditioned = doc.at("ill_conditioned").get<bool>();
    r.warnings = doc.at("warnings").get<std::vector<std::string>>();
    if (r.state_operator.rows() != r.state_operator.cols() ||
        r.input_operator.rows() != r.state_operator.rows()) {
      throw SchemaError("DMDc operators have inconsistent shapes");
    }
    return r;
  });
}

}  // namespace sindyc
