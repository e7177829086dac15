#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "sindyc/timeseries.hpp"

namespace sindyc {

/// Exact DMD of a snapshot pair.
///
/// With X = U Σ V* (economy, truncated to `rank`), the reduced operator is
/// Ã = U* X' V Σ⁻¹, Ã W = W Λ and Φ = X' V Σ⁻¹ W. Eigenvalues are sorted by
/// decreasing magnitude, then decreasing imaginary part.
struct DmdResult {
  Eigen::VectorXcd eigenvalues;
  Eigen::MatrixXcd modes;              // n x r
  Eigen::MatrixXd reduced_operator;    // r x r
  Eigen::MatrixXd svd_basis;           // n x r
  Eigen::VectorXd singular_values;     // r
  Eigen::MatrixXd right_vectors;       // m x r
  Eigen::MatrixXcd eigvec_reduced;     // r x r
  Eigen::Index rank = 0;
  /// X' V Σ⁻¹ U*, the least-squares operator X' X† restricted to the kept
  /// subspace (n x n).
  Eigen::MatrixXd full_operator;

  bool operator==(const DmdResult&) const;
};

/// Throws RankError when X has no singular value above the cutoff (e.g.
/// all-zero data), ParamError for rank < 1 or rank > min(n, m) and
/// ShapeError when X and X' differ in shape. Singular values below
/// kPinvCutoff * sigma_max are dropped, which can lower the returned rank.
DmdResult dmd(const SnapshotPair& pair, std::optional<Eigen::Index> rank = {});

/// Linear model with actuation: X' ≈ A X + B Υ.
struct DmdcResult {
  Eigen::MatrixXd state_operator;   // A, n x n
  Eigen::MatrixXd input_operator;   // B, n x q
  Eigen::VectorXcd eigenvalues;     // of A, sorted as in DmdResult
  Eigen::MatrixXcd eigenvectors;    // of A
  /// Singular values of the stacked matrix [X; Υ].
  Eigen::VectorXd singular_values;
  Eigen::Index rank = 0;
  /// Set when [X; Υ] is rank deficient, so (A, B) is not unique.
  bool ill_conditioned = false;
  std::vector<std::string> warnings;

  bool operator==(const DmdcResult&) const;
};

/// Least squares on the stacked matrix via its pseudo-inverse, optionally
/// truncated to `rank` singular values. Throws ParamError when the pair has
/// no inputs. Fewer than n + q snapshots only adds a warning.
DmdcResult dmdc(const SnapshotPair& pair, std::optional<Eigen::Index> rank = {});

/// x_k = Φ diag(Λ^k) Φ† x0 for k = 0..steps (real part), as columns.
Eigen::MatrixXd dmd_predict(const DmdResult& result, const Eigen::VectorXd& x0,
                            Eigen::Index steps);

/// Eigenvalues as [re, im] pairs and complex matrices as column-major
/// {rows, cols, real, imag} objects.
nlohmann::json dmd_to_json(const DmdResult& result);
DmdResult dmd_from_json(const nlohmann::json& doc);
nlohmann::json dmdc_to_json(const DmdcResult& result);
DmdcResult dmdc_from_json(const nlohmann::json& doc);

}  // namespace sindyc
