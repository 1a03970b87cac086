#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emowatch/ingestion.hpp"
#include "emowatch/types.hpp"

namespace emowatch {

struct HrReading {
  std::int64_t t_ms = 0;
  double bpm = 0.0;
};

struct HrvMetrics {
  double sdnn = 0.0;   // ms, population std of cleaned NN intervals
  double rmssd = 0.0;  // ms, over raw NN intervals
  std::size_t nn50 = 0;
  double pnn50 = 0.0;     // percent
  double hr_range = 0.0;  // bpm
  // Set when every NN interval fell outside the cleaning window; sdnn is 0.
  bool sdnn_from_empty = false;
};

struct ChannelStats {
  double mean = 0.0;
  double median = 0.0;
  double mode = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t peak_count = 0;
};

// Indices i with 0 < i < n-1 and x[i] strictly above both neighbours.
std::vector<std::size_t> detect_peaks(std::span<const double> x);

// 60000 / bpm per reading. Throws DomainError for bpm <= 0.
std::vector<double> nn_intervals(std::span<const HrReading> hr);

// Throws InsufficientDataError for fewer than two readings.
HrvMetrics compute_hrv(std::span<const HrReading> hr, NnWindow window = {});

// Population std; even-length median averages the middle pair; mode is the
// most frequent value after rounding to 2 decimals, ties to the smallest.
ChannelStats channel_stats(std::span<const double> x);

std::vector<HrReading> hr_readings(const SessionRecording& r);

// Row-major matrix of finite features with one mood label and one group id
// (session id) per row.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::vector<std::string> column_names);

  const std::vector<std::string>& column_names() const noexcept { return columns_; }
  std::size_t cols() const noexcept { return columns_.size(); }
  std::size_t rows() const noexcept { return labels_.size(); }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols(), cols()};
  }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<BinaryMood>& labels() const noexcept { return labels_; }
  const std::vector<std::string>& group_ids() const noexcept { return groups_; }

  // Throws ShapeError on width mismatch and DomainError on non-finite values.
  void append_row(std::span<const double> values, BinaryMood label, std::string group_id);
  void append(const FeatureMatrix& other);

  FeatureMatrix subset_rows(std::span<const std::size_t> indices) const;
  FeatureMatrix subset_columns(std::span<const std::size_t> indices) const;

  std::optional<std::size_t> column_index(std::string_view name) const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::vector<std::string> columns_;
  std::vector<double> values_;
  std::vector<BinaryMood> labels_;
  std::vector<std::string> groups_;
};

// CSV with a header row of column names plus trailing label,group_id columns.
std::string write_feature_csv(const FeatureMatrix& m);
FeatureMatrix parse_feature_csv(std::string_view text);

// 7 channels x 7 stats, 5 HRV metrics, age, two-column gender one-hot.
inline constexpr std::size_t kStatisticalColumns = 57;
// hr, acc xyz, gyro xyz, age, gender one-hot.
inline constexpr std::size_t kNonStatisticalColumns = 10;

const std::vector<std::string>& statistical_column_names();
const std::vector<std::string>& nonstatistical_column_names();

// Statistical feature vector without a label; used for prediction on
// sessions that have no assessment yet. Requires a cleaned recording with at
// least two HR readings.
std::vector<double> statistical_features(const SessionRecording& cleaned, NnWindow window = {});

struct StatisticalRow {
  std::vector<double> values;
  BinaryMood label = BinaryMood::pleasant;
};

StatisticalRow build_statistical_row(const SessionRecording& cleaned, NnWindow window = {});

// One row per sample; absent mid-stream HR carries the last observation.
// Without an assessment rows are labelled pleasant and the label is ignored.
FeatureMatrix build_nonstatistical_rows(const SessionRecording& cleaned);

enum class DatasetFlavor { statistical, nonstatistical };

std::string_view to_string(DatasetFlavor f) noexcept;
std::optional<DatasetFlavor> parse_flavor(std::string_view s) noexcept;

// Cleans and featurizes every recording in order. Sessions may be processed
// on `jobs` threads; the result does not depend on `jobs`.
FeatureMatrix build_dataset(std::span<const SessionRecording> corpus, DatasetFlavor flavor,
                            unsigned jobs = 1, NnWindow window = {});

enum class FeatureGroup : std::uint8_t { hr, hrv, acc, gyro, age, gender };

FeatureGroup column_group(std::string_view column_name);

struct FeatureSetSpec {
  bool hr = false;
  bool hrv = false;
  bool acc = false;
  bool gyro = false;
  bool without_age = false;
  bool without_gender = false;
  bool without_median_mode = false;
  std::optional<std::size_t> pca_components;

  // "Hrv, Hr, Acc, Gyro (without age & gender)", "PCA (3 components)".
  std::string name() const;

  friend bool operator==(const FeatureSetSpec&, const FeatureSetSpec&) = default;
};

// Parses names like "Hrv,Hr,Acc,Gyro", "Acc, Gyro (without age & gender)",
// "all", "PCA(3)". Throws SpecError on anything else.
FeatureSetSpec parse_feature_set(std::string_view text);

// Rows of the statistical-dataset ablation table (17 entries).
std::vector<FeatureSetSpec> statistical_feature_sets();
// Rows of the non-statistical ablation table (7 entries, last one is PCA).
std::vector<FeatureSetSpec> nonstatistical_feature_sets();

// Indices of the columns of `columns` selected by `spec`, ascending.
std::vector<std::size_t> resolve_feature_set(const std::vector<std::string>& columns,
                                             const FeatureSetSpec& spec);

// Column subset; PCA is not applied here. Throws SpecError on an empty result.
FeatureMatrix select_features(const FeatureMatrix& m, const FeatureSetSpec& spec);

struct PcaModel {
  std::vector<double> mean;
  std::vector<double> scale;  // per-column std; 0 for constant columns
  // k rows of length d, orthonormal, descending eigenvalue order.
  std::vector<std::vector<double>> components;
  std::vector<double> eigenvalues;
};

// Throws SpecError when k exceeds the column count or is zero, and
// InsufficientDataError for fewer than two rows.
PcaModel fit_pca(const FeatureMatrix& m, std::size_t k);
std::vector<double> apply_pca(const PcaModel& p, std::span<const double> row);
FeatureMatrix apply_pca(const PcaModel& p, const FeatureMatrix& m);

}  // namespace emowatch
