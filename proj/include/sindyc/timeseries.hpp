#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sindyc {

/// Uniformly sampled multichannel trajectory.
///
/// States are stored one row per channel and one column per sample; inputs,
/// when present, share the same column grid. Instances are validated at
/// construction and immutable afterwards.
class TimeSeries {
 public:
  /// Relative tolerance on successive time differences.
  static constexpr double kGridTolerance = 1e-9;

  /// Validates and builds a series from explicit sample times.
  ///
  /// Throws SizeError (< 2 samples), ShapeError (column counts disagree),
  /// GridError (non-uniform or non-increasing times) or DataError
  /// (non-finite entries).
  static TimeSeries from_samples(Eigen::VectorXd times, Eigen::MatrixXd states,
                                 std::optional<Eigen::MatrixXd> inputs = {},
                                 std::vector<std::string> state_names = {},
                                 std::vector<std::string> input_names = {});

  /// Builds a series on the grid t0 + k*dt.
  static TimeSeries uniform(double t0, double dt, Eigen::MatrixXd states,
                            std::optional<Eigen::MatrixXd> inputs = {},
                            std::vector<std::string> state_names = {},
                            std::vector<std::string> input_names = {});

  const Eigen::VectorXd& times() const noexcept { return times_; }
  const Eigen::MatrixXd& states() const noexcept { return states_; }
  const std::optional<Eigen::MatrixXd>& inputs() const noexcept {
    return inputs_;
  }
  double dt() const noexcept { return dt_; }

  Eigen::Index state_dim() const noexcept { return states_.rows(); }
  Eigen::Index input_dim() const noexcept {
    return inputs_ ? inputs_->rows() : 0;
  }
  Eigen::Index samples() const noexcept { return states_.cols(); }
  bool has_inputs() const noexcept { return inputs_.has_value(); }

  const std::vector<std::string>& state_names() const noexcept {
    return state_names_;
  }
  const std::vector<std::string>& input_names() const noexcept {
    return input_names_;
  }
  /// State names followed by input names.
  std::vector<std::string> channel_names() const;

  /// Columns [first, first + count).
  TimeSeries slice(Eigen::Index first, Eigen::Index count) const;

  /// Every stride-th sample starting at the first.
  TimeSeries downsample(Eigen::Index stride) const;

  /// Same grid and states with the input channels removed.
  TimeSeries without_inputs() const;

  bool operator==(const TimeSeries& other) const;

 private:
  TimeSeries() = default;

  Eigen::VectorXd times_;
  Eigen::MatrixXd states_;
  std::optional<Eigen::MatrixXd> inputs_;
  double dt_ = 0.0;
  std::vector<std::string> state_names_;
  std::vector<std::string> input_names_;
};

/// Consecutive snapshot matrices X (columns 1..m) and X' (columns 2..m+1).
struct SnapshotPair {
  Eigen::MatrixXd current;
  Eigen::MatrixXd shifted;
  std::optional<Eigen::MatrixXd> inputs_current;
};

/// Maps CSV header names onto roles. With state_columns empty, every column
/// whose name starts with 'u' is an input and every other non-time column is
/// a state. Once state_columns is given, only listed columns are read.
struct CsvSchema {
  std::string time_column = "t";
  std::vector<std::string> state_columns;
  std::vector<std::string> input_columns;
  /// Keep every stride-th row after sorting.
  Eigen::Index stride = 1;
};

/// Reads a comma-separated file with a header row.
///
/// Throws IoError (unreadable), SchemaError (missing/unknown columns, ragged
/// or unparsable cells), GridError and DataError as for from_samples.
TimeSeries load_timeseries(const std::filesystem::path& path,
                           const CsvSchema& schema = {});

/// Writes `t,<states>,<inputs>` with 17 significant digits per value.
void save_timeseries(const TimeSeries& series,
                     const std::filesystem::path& path);

/// Throws SizeError when the series has fewer than two samples.
SnapshotPair to_snapshot_pair(const TimeSeries& series);

/// Default channel names: prefix1..prefixN.
std::vector<std::string> default_names(const std::string& prefix,
                                       Eigen::Index count);

}  // namespace sindyc
