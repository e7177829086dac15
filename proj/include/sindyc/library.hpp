#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace sindyc {

/// Row-major so that each library term occupies a contiguous row.
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class TermKind { kConstant, kMonomial, kTrig };

/// One candidate function of the combined channels (x1..xn, u1..uq).
struct TermDescriptor {
  TermKind kind = TermKind::kConstant;
  /// Monomial exponents over the n+q channels.
  std::vector<int> exponents;
  /// Trig terms: channel index, integer frequency, sine or cosine.
  int channel = 0;
  int frequency = 0;
  bool is_sine = true;

  int degree() const;
  bool operator==(const TermDescriptor&) const = default;
};

/// Candidate-function library over states and (optionally) inputs.
///
/// Terms are ordered: constant, monomials of degree 1..poly_degree in graded
/// lexicographic order over (x1..xn, u1..uq), then sin/cos pairs by channel
/// and frequency.
struct LibrarySpec {
  int state_dim = 0;
  int input_dim = 0;
  bool include_constant = true;
  int poly_degree = 1;
  std::vector<int> trig_frequencies;
  std::vector<TermDescriptor> terms;

  int channels() const { return state_dim + input_dim; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(terms.size()); }

  bool operator==(const LibrarySpec&) const = default;
};

/// Throws ParamError for state_dim < 1, input_dim < 0, poly_degree < 1 or a
/// non-positive / repeated trig frequency.
LibrarySpec build_spec(int state_dim, int input_dim, int poly_degree,
                       std::vector<int> trig_frequencies = {},
                       bool include_constant = true);

/// Θᵀ evaluated on snapshot columns.
struct LibraryMatrix {
  RowMatrix values;  // p x m
  LibrarySpec spec;
};

/// Evaluates every term at every column of (states; inputs).
///
/// Throws ShapeError when channel counts or column counts disagree with the
/// spec, and ParamError when inputs are missing for q > 0 (or supplied for
/// q = 0).
LibraryMatrix evaluate(const LibrarySpec& spec, const Eigen::MatrixXd& states,
                       const std::optional<Eigen::MatrixXd>& inputs = {});

/// Evaluates the library at a single point; out must have spec.size()
/// entries. Inputs may be empty when spec.input_dim == 0.
void evaluate_point(const LibrarySpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& u,
                    Eigen::Ref<Eigen::VectorXd> out);

/// Human-readable term name such as "x1*x2", "u^2" or "sin(2*x1)".
std::string term_name(const TermDescriptor& term,
                      const std::vector<std::string>& channel_names);

/// The construction parameters plus term names, for model files.
nlohmann::json library_to_json(const LibrarySpec& spec);

/// Rebuilds the spec; throws SchemaError for missing fields or a term list
/// that disagrees with the rebuilt one.
LibrarySpec library_from_json(const nlohmann::json& doc);

}  // namespace sindyc
