#include "sindyc/timeseries.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sindyc/errors.hpp"

namespace sindyc {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw DataError(std::string("non-finite entry in ") + what);
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    // Tolerate surrounding whitespace and CRLF line endings.
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string()
                                           : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row,
                  const std::string& column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    // from_chars does not accept inf/nan spellings in every form; route them
    // to DataError so callers see the finiteness violation, not a parse one.
    std::string lower(cell);
    std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
    if (lower.find("nan") != std::string::npos ||
        lower.find("inf") != std::string::npos) {
      throw DataError("non-finite value '" + cell + "' in column " + column);
    }
    throw SchemaError("cannot parse '" + cell + "' at data row " +
                      std::to_string(row + 1) + ", column " + column);
  }
  if (!std::isfinite(value)) {
    throw DataError("non-finite value '" + cell + "' in column " + column);
  }
  return value;
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::string> default_names(const std::string& prefix,
                                       Eigen::Index count) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) {
    names.push_back(prefix + std::to_string(i + 1));
  }
  return names;
}

TimeSeries TimeSeries::from_samples(Eigen::VectorXd times,
                                    Eigen::MatrixXd states,
                                    std::optional<Eigen::MatrixXd> inputs,
                                    std::vector<std::string> state_names,
                                    std::vector<std::string> input_names) {
  const Eigen::Index count = times.size();
  if (count < 2) {
    throw SizeError("time series needs at least 2 samples, got " +
                    std::to_string(count));
  }
  if (states.rows() < 1) throw ShapeError("time series has no state channel");
  if (states.cols() != count) {
    throw ShapeError("state column count " + std::to_string(states.cols()) +
                     " does not match " + std::to_string(count) + " samples");
  }
  if (inputs && inputs->cols() != count) {
    throw ShapeError("input column count " + std::to_string(inputs->cols()) +
                     " does not match " + std::to_string(count) + " samples");
  }
  if (inputs && inputs->rows() == 0) inputs.reset();
  require_finite(times, "times");
  require_finite(states, "states");
  if (inputs) require_finite(*inputs, "inputs");

  const double dt = (times(count - 1) - times(0)) / static_cast<double>(count - 1);
  if (!(dt > 0.0)) throw GridError("sample times are not increasing");
  double worst = 0.0;
  for (Eigen::Index k = 1; k < count; ++k) {
    worst = std::max(worst, std::abs((times(k) - times(k - 1)) - dt));
  }
  if (worst >= kGridTolerance * dt) {
    throw GridError("non-uniform time grid: step deviates by " +
                    std::to_string(worst) + " from dt=" + std::to_string(dt));
  }

  if (state_names.empty()) state_names = default_names("x", states.rows());
  if (static_cast<Eigen::Index>(state_names.size()) != states.rows()) {
    throw ShapeError("state name count does not match state channels");
  }
  const Eigen::Index q = inputs ? inputs->rows() : 0;
  if (input_names.empty()) input_names = default_names("u", q);
  if (static_cast<Eigen::Index>(input_names.size()) != q) {
    throw ShapeError("input name count does not match input channels");
  }

  TimeSeries ts;
  ts.times_ = std::move(times);
  ts.states_ = std::move(states);
  ts.inputs_ = std::move(inputs);
  ts.dt_ = dt;
  ts.state_names_ = std::move(state_names);
  ts.input_names_ = std::move(input_names);
  return ts;
}

TimeSeries TimeSeries::uniform(double t0, double dt, Eigen::MatrixXd states,
                               std::optional<Eigen::MatrixXd> inputs,
                               std::vector<std::string> state_names,
                               std::vector<std::string> input_names) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw ParamError("time step must be positive and finite");
  }
  Eigen::VectorXd times(states.cols());
  for (Eigen::Index k = 0; k < times.size(); ++k) {
    times(k) = t0 + static_cast<double>(k) * dt;
  }
  return from_samples(std::move(times), std::move(states), std::move(inputs),
                      std::move(state_names), std::move(input_names));
}

std::vector<std::string> TimeSeries::channel_names() const {
  std::vector<std::string> names = state_names_;
  names.insert(names.end(), input_names_.begin(), input_names_.end());
  return names;
}

TimeSeries TimeSeries::slice(Eigen::Index first, Eigen::Index count) const {
  if (first < 0 || count < 0 || first + count > samples()) {
    throw SizeError("slice out of range");
  }
  std::optional<Eigen::MatrixXd> in;
  if (inputs_) in = inputs_->middleCols(first, count);
  return from_samples(times_.segment(first, count),
                      states_.middleCols(first, count), std::move(in),
                      state_names_, input_names_);
}

TimeSeries TimeSeries::downsample(Eigen::Index stride) const {
  if (stride < 1) throw ParamError("stride must be at least 1");
  if (stride == 1) return *this;
  const Eigen::Index kept = (samples() - 1) / stride + 1;
  Eigen::VectorXd t(kept);
  Eigen::MatrixXd x(state_dim(), kept);
  std::optional<Eigen::MatrixXd> u;
  if (inputs_) u = Eigen::MatrixXd(input_dim(), kept);
  for (Eigen::Index k = 0; k < kept; ++k) {
    t(k) = times_(k * stride);
    x.col(k) = states_.col(k * stride);
    if (u) u->col(k) = inputs_->col(k * stride);
  }
  return from_samples(std::move(t), std::move(x), std::move(u), state_names_,
                      input_names_);
}

TimeSeries TimeSeries::without_inputs() const {
  TimeSeries ts = *this;
  ts.inputs_.reset();
  ts.input_names_.clear();
  return ts;
}

bool TimeSeries::operator==(const TimeSeries& other) const {
  if (has_inputs() != other.has_inputs()) return false;
  if (times_.size() != other.times_.size() ||
      states_.rows() != other.states_.rows()) {
    return false;
  }
  if (times_ != other.times_ || states_ != other.states_) return false;
  if (inputs_) {
    if (inputs_->rows() != other.inputs_->rows()) return false;
    if (*inputs_ != *other.inputs_) return false;
  }
  return state_names_ == other.state_names_ &&
         input_names_ == other.input_names_;
}

TimeSeries load_timeseries(const std::filesystem::path& path,
                           const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path.string() + " is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    line.erase(0, 3);
  }
  const std::vector<std::string> header = split_csv_line(line);

  auto find_column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw SchemaError("column '" + name + "' not found in " + path.string());
    }
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t time_col = find_column(schema.time_column);
  std::vector<std::string> state_cols = schema.state_columns;
  std::vector<std::string> input_cols = schema.input_columns;
  if (state_cols.empty()) {
    for (const auto& h : header) {
      if (h != schema.time_column && !(h.size() > 0 && h[0] == 'u')) {
        state_cols.push_back(h);
      }
    }
    if (input_cols.empty()) {
      for (const auto& h : header) {
        if (!h.empty() && h[0] == 'u') input_cols.push_back(h);
      }
    }
  }
  if (state_cols.empty()) {
    throw SchemaError("no state columns in " + path.string());
  }
  std::vector<std::size_t> state_idx, input_idx;
  for (const auto& c : state_cols) state_idx.push_back(find_column(c));
  for (const auto& c : input_cols) input_idx.push_back(find_column(c));

  std::vector<double> t;
  std::vector<std::vector<double>> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw SchemaError("row " + std::to_string(row + 1) + " has " +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(header.size()));
    }
    t.push_back(parse_cell(cells[time_col], row, schema.time_column));
    std::vector<double> values;
    values.reserve(state_idx.size() + input_idx.size());
    for (std::size_t j = 0; j < state_idx.size(); ++j) {
      values.push_back(parse_cell(cells[state_idx[j]], row, state_cols[j]));
    }
    for (std::size_t j = 0; j < input_idx.size(); ++j) {
      values.push_back(parse_cell(cells[input_idx[j]], row, input_cols[j]));
    }
    rows.push_back(std::move(values));
    ++row;
  }

  std::vector<std::size_t> order(t.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });

  const auto count = static_cast<Eigen::Index>(t.size());
  const auto n = static_cast<Eigen::Index>(state_idx.size());
  const auto q = static_cast<Eigen::Index>(input_idx.size());
  Eigen::VectorXd times(count);
  Eigen::MatrixXd states(n, count);
  Eigen::MatrixXd inputs(q, count);
  for (Eigen::Index k = 0; k < count; ++k) {
    const auto src = order[static_cast<std::size_t>(k)];
    times(k) = t[src];
    for (Eigen::Index i = 0; i < n; ++i) states(i, k) = rows[src][i];
    for (Eigen::Index i = 0; i < q; ++i) inputs(i, k) = rows[src][n + i];
  }
  std::optional<Eigen::MatrixXd> maybe_inputs;
  if (q > 0) maybe_inputs = std::move(inputs);
  TimeSeries series = TimeSeries::from_samples(
      std::move(times), std::move(states), std::move(maybe_inputs), state_cols,
      input_cols);
  return series.downsample(schema.stride);
}

void save_timeseries(const TimeSeries& series,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "t";
  for (const auto& name : series.channel_names()) out << ',' << name;
  out << '\n';
  const auto& x = series.states();
  for (Eigen::Index k = 0; k < series.samples(); ++k) {
    out << format_value(series.times()(k));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out << ',' << format_value(x(i, k));
    }
    if (series.inputs()) {
      const auto& u = *series.inputs();
      for (Eigen::Index i = 0; i < u.rows(); ++i) {
        out << ',' << format_value(u(i, k));
      }
    }
    out << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

SnapshotPair to_snapshot_pair(const TimeSeries& series) {
  const Eigen::Index count = series.samples();
  if (count < 2) {
    throw SizeError("snapshot pair needs at least 2 samples");
  }
  SnapshotPair pair;
  pair.current = series.states().leftCols(count - 1);
  pair.shifted = series.states().rightCols(count - 1);
  if (series.inputs()) pair.inputs_current = series.inputs()->leftCols(count - 1);
  return pair;
}

}  // namespace sindyc
