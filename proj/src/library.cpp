#include "sindyc/library.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "sindyc/errors.hpp"
#include "sindyc/kernels.hpp"
#include "sindyc/timeseries.hpp"

namespace sindyc {

namespace {

// Appends all monomials of exactly `degree` as non-decreasing channel index
// sequences, which enumerates graded-lex order within the degree.
void enumerate_degree(int channels, int degree, int start,
                      std::vector<int>& exponents,
                      std::vector<TermDescriptor>& out) {
  if (degree == 0) {
    TermDescriptor t;
    t.kind = TermKind::kMonomial;
    t.exponents = exponents;
    out.push_back(std::move(t));
    return;
  }
  for (int c = start; c < channels; ++c) {
    ++exponents[static_cast<std::size_t>(c)];
    enumerate_degree(channels, degree - 1, c, exponents, out);
    --exponents[static_cast<std::size_t>(c)];
  }
}

std::vector<std::string> default_channel_names(const LibrarySpec& spec) {
  auto names = default_names("x", spec.state_dim);
  const auto u = spec.input_dim == 1 ? std::vector<std::string>{"u"}
                                     : default_names("u", spec.input_dim);
  names.insert(names.end(), u.begin(), u.end());
  return names;
}

}  // namespace

int TermDescriptor::degree() const {
  int d = 0;
  for (int e : exponents) d += e;
  return d;
}

LibrarySpec build_spec(int state_dim, int input_dim, int poly_degree,
                       std::vector<int> trig_frequencies,
                       bool include_constant) {
  if (state_dim < 1) throw ParamError("library needs at least one state");
  if (input_dim < 0) throw ParamError("input dimension must be >= 0");
  if (poly_degree < 1) throw ParamError("polynomial degree must be >= 1");
  std::set<int> seen;
  for (int f : trig_frequencies) {
    if (f < 1) throw ParamError("trig frequencies must be positive");
    if (!seen.insert(f).second) throw ParamError("repeated trig frequency");
  }

  LibrarySpec spec;
  spec.state_dim = state_dim;
  spec.input_dim = input_dim;
  spec.include_constant = include_constant;
  spec.poly_degree = poly_degree;
  spec.trig_frequencies = std::move(trig_frequencies);

  const int channels = spec.channels();
  if (include_constant) {
    TermDescriptor c;
    c.kind = TermKind::kConstant;
    c.exponents.assign(static_cast<std::size_t>(channels), 0);
    spec.terms.push_back(std::move(c));
  }
  std::vector<int> exponents(static_cast<std::size_t>(channels), 0);
  for (int d = 1; d <= poly_degree; ++d) {
    enumerate_degree(channels, d, 0, exponents, spec.terms);
  }
  for (int c = 0; c < channels; ++c) {
    for (int f : spec.trig_frequencies) {
      for (bool sine : {true, false}) {
        TermDescriptor t;
        t.kind = TermKind::kTrig;
        t.channel = c;
        t.frequency = f;
        t.is_sine = sine;
        spec.terms.push_back(std::move(t));
      }
    }
  }
  return spec;
}

LibraryMatrix evaluate(const LibrarySpec& spec, const Eigen::MatrixXd& states,
                       const std::optional<Eigen::MatrixXd>& inputs) {
  if (states.rows() != spec.state_dim) {
    throw ShapeError("library expects " + std::to_string(spec.state_dim) +
                     " state channels, got " + std::to_string(states.rows()));
  }
  if (spec.input_dim > 0 && !inputs) {
    throw ParamError("library has input terms but no inputs were given");
  }
  if (spec.input_dim == 0 && inputs && inputs->rows() > 0) {
    throw ParamError("inputs given to a state-only library");
  }
  if (inputs && spec.input_dim > 0) {
    if (inputs->rows() != spec.input_dim) {
      throw ShapeError("library expects " + std::to_string(spec.input_dim) +
                       " input channels, got " + std::to_string(inputs->rows()));
    }
    if (inputs->cols() != states.cols()) {
      throw ShapeError("state and input column counts differ");
    }
  }

  const Eigen::Index m = states.cols();
  const int channels = spec.channels();
  RowMatrix channel_rows(channels, m);
  channel_rows.topRows(spec.state_dim) = states;
  if (spec.input_dim > 0) channel_rows.bottomRows(spec.input_dim) = *inputs;

  LibraryMatrix result{RowMatrix(spec.size(), m), spec};
  RowMatrix& theta = result.values;
  const auto len = static_cast<std::size_t>(m);

  // Each monomial is its parent (one fewer power of its last channel) times
  // that channel; parents always precede children in graded order.
  std::map<std::vector<int>, Eigen::Index> row_of;
  for (Eigen::Index j = 0; j < spec.size(); ++j) {
    const TermDescriptor& term = spec.terms[static_cast<std::size_t>(j)];
    double* dst = theta.row(j).data();
    switch (term.kind) {
      case TermKind::kConstant:
        theta.row(j).setOnes();
        break;
      case TermKind::kMonomial: {
        int last = channels - 1;
        while (term.exponents[static_cast<std::size_t>(last)] == 0) --last;
        std::vector<int> parent = term.exponents;
        --parent[static_cast<std::size_t>(last)];
        const double* channel = channel_rows.row(last).data();
        if (term.degree() == 1) {
          std::copy(channel, channel + m, dst);
        } else {
          kernels::active().multiply(theta.row(row_of.at(parent)).data(),
                                     channel, dst, len);
        }
        row_of.emplace(term.exponents, j);
        break;
      }
      case TermKind::kTrig: {
        const double* channel = channel_rows.row(term.channel).data();
        const double f = term.frequency;
        for (Eigen::Index k = 0; k < m; ++k) {
          dst[k] = term.is_sine ? std::sin(f * channel[k]) : std::cos(f * channel[k]);
        }
        break;
      }
    }
  }
  return result;
}

void evaluate_point(const LibrarySpec& spec,
                    const Eigen::Ref<const Eigen::VectorXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& u,
                    Eigen::Ref<Eigen::VectorXd> out) {
  if (x.size() != spec.state_dim || u.size() != spec.input_dim ||
      out.size() != spec.size()) {
    throw ShapeError("evaluate_point: dimension mismatch");
  }
  auto channel = [&](int c) { return c < spec.state_dim ? x(c) : u(c - spec.state_dim); };
  for (Eigen::Index j = 0; j < spec.size(); ++j) {
    const TermDescriptor& term = spec.terms[static_cast<std::size_t>(j)];
    switch (term.kind) {
      case TermKind::kConstant:
        out(j) = 1.0;
        break;
      case TermKind::kMonomial: {
        // Same multiplication order as evaluate(): channel by channel,
        // ascending, one factor at a time.
        double v = 1.0;
        bool first = true;
        for (int c = 0; c < spec.channels(); ++c) {
          for (int e = 0; e < term.exponents[static_cast<std::size_t>(c)]; ++e) {
            v = first ? channel(c) : v * channel(c);
            first = false;
          }
        }
        out(j) = v;
        break;
      }
      case TermKind::kTrig: {
        const double arg = term.frequency * channel(term.channel);
        out(j) = term.is_sine ? std::sin(arg) : std::cos(arg);
        break;
      }
    }
  }
}

std::string term_name(const TermDescriptor& term,
                      const std::vector<std::string>& channel_names) {
  auto name_of = [&](int c) -> std::string {
    if (c < static_cast<int>(channel_names.size())) {
      return channel_names[static_cast<std::size_t>(c)];
    }
    return "c" + std::to_string(c + 1);
  };
  switch (term.kind) {
    case TermKind::kConstant:
      return "1";
    case TermKind::kMonomial: {
      std::string out;
      for (std::size_t c = 0; c < term.exponents.size(); ++c) {
        const int e = term.exponents[c];
        if (e == 0) continue;
        if (!out.empty()) out += '*';
        out += name_of(static_cast<int>(c));
        if (e > 1) out += "^" + std::to_string(e);
      }
      return out;
    }
    case TermKind::kTrig: {
      std::string arg = name_of(term.channel);
      if (term.frequency != 1) arg = std::to_string(term.frequency) + "*" + arg;
      return std::string(term.is_sine ? "sin(" : "cos(") + arg + ")";
    }
  }
  return {};
}

nlohmann::json library_to_json(const LibrarySpec& spec) {
  nlohmann::json names = nlohmann::json::array();
  const auto channels = default_channel_names(spec);
  for (const auto& t : spec.terms) names.push_back(term_name(t, channels));
  return {
      {"state_dim", spec.state_dim},
      {"input_dim", spec.input_dim},
      {"include_constant", spec.include_constant},
      {"poly_degree", spec.poly_degree},
      {"trig_frequencies", spec.trig_frequencies},
      {"terms", names},
  };
}

LibrarySpec library_from_json(const nlohmann::json& doc) {
  try {
    LibrarySpec spec = build_spec(
        doc.at("state_dim").get<int>(), doc.at("input_dim").get<int>(),
        doc.at("poly_degree").get<int>(),
        doc.at("trig_frequencies").get<std::vector<int>>(),
        doc.at("include_constant").get<bool>());
    if (doc.contains("terms")) {
      const auto expected = library_to_json(spec).at("terms");
      if (doc.at("terms") != expected) {
        throw SchemaError("library term list does not match its parameters");
      }
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed library: ") + e.what());
  } catch (const ParamError& e) {
    throw SchemaError(std::string("invalid library: ") + e.what());
  }
}

}  // namespace sindyc
