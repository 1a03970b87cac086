#include "emowatch/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "emowatch/errors.hpp"

namespace emowatch {

std::vector<std::size_t> detect_peaks(std::span<const double> x) {
  std::vector<std::size_t> peaks;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (x[i] > x[i - 1] && x[i] > x[i + 1]) peaks.push_back(i);
  }
  return peaks;
}

std::vector<double> nn_intervals(std::span<const HrReading> hr) {
  std::vector<double> nn;
  nn.reserve(hr.size());
  for (const auto& r : hr) {
    if (!(r.bpm > 0.0) || !std::isfinite(r.bpm)) {
      throw DomainError(fmt::format("heart rate must be > 0 bpm, got {} at t={}ms", r.bpm, r.t_ms));
    }
    nn.push_back(60000.0 / r.bpm);
  }
  return nn;
}

namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double population_std(std::span<const double> x) {
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

}  // namespace

HrvMetrics compute_hrv(std::span<const HrReading> hr, NnWindow window) {
  if (hr.size() < 2) {
    throw InsufficientDataError(
        fmt::format("HRV needs at least 2 heart-rate readings, got {}", hr.size()));
  }
  const auto raw = nn_intervals(hr);
  HrvMetrics out;

  const auto cleaned = clean_nn_intervals(raw, window);
  if (cleaned.empty()) {
    out.sdnn_from_empty = true;
  } else {
    out.sdnn = population_std(cleaned);
  }

  double ss = 0.0;
  for (std::size_t i = 1; i < raw.size(); ++i) {
    const double d = raw[i] - raw[i - 1];
    ss += d * d;
    if (std::abs(d) > 50.0) ++out.nn50;
  }
  const double pairs = static_cast<double>(raw.size() - 1);
  out.rmssd = std::sqrt(ss / pairs);
  out.pnn50 = 100.0 * static_cast<double>(out.nn50) / pairs;

  auto [lo, hi] = std::minmax_element(hr.begin(), hr.end(),
                                      [](const HrReading& a, const HrReading& b) { return a.bpm < b.bpm; });
  out.hr_range = hi->bpm - lo->bpm;
  return out;
}

ChannelStats channel_stats(std::span<const double> x) {
  if (x.empty()) throw InsufficientDataError("channel statistics need at least one value");
  ChannelStats s;
  s.mean = mean_of(x);
  s.std = population_std(x);

  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  s.min = sorted.front();
  s.max = sorted.back();
  s.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  // Rounding error in the running sum can push the mean a hair outside
  // [min, max] for near-constant input.
  s.mean = std::clamp(s.mean, s.min, s.max);
  if (s.min == s.max) s.std = 0.0;

  std::vector<double> rounded(n);
  std::transform(sorted.begin(), sorted.end(), rounded.begin(),
                 [](double v) { return std::round(v * 100.0) / 100.0; });
  std::sort(rounded.begin(), rounded.end());
  std::size_t best_count = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && rounded[j] == rounded[i]) ++j;
    if (j - i > best_count) {
      best_count = j - i;
      s.mode = rounded[i];
    }
    i = j;
  }

  s.peak_count = detect_peaks(x).size();
  return s;
}

std::vector<HrReading> hr_readings(const SessionRecording& r) {
  std::vector<HrReading> out;
  for (const auto& s : r.samples) {
    if (s.hr_bpm) out.push_back({s.t_ms, *s.hr_bpm});
  }
  return out;
}

FeatureMatrix::FeatureMatrix(std::vector<std::string> column_names)
    : columns_(std::move(column_names)) {}

void FeatureMatrix::append_row(std::span<const double> values, BinaryMood label,
                               std::string group_id) {
  if (values.size() != cols()) {
    throw ShapeError(fmt::format("row width {} does not match {} columns", values.size(), cols()));
  }
  for (std::size_t c = 0; c < values.size(); ++c) {
    if (!std::isfinite(values[c])) {
      throw DomainError(fmt::format("non-finite value in column {} of session {}", columns_[c], group_id));
    }
  }
  values_.insert(values_.end(), values.begin(), values.end());
  labels_.push_back(label);
  groups_.push_back(std::move(group_id));
}

void FeatureMatrix::append(const FeatureMatrix& other) {
  if (other.columns_ != columns_) throw ShapeError("cannot append matrices with different columns");
  values_.insert(values_.end(), other.values_.begin(), other.values_.end());
  labels_.insert(labels_.end(), other.labels_.begin(), other.labels_.end());
  groups_.insert(groups_.end(), other.groups_.begin(), other.groups_.end());
}

FeatureMatrix FeatureMatrix::subset_rows(std::span<const std::size_t> indices) const {
  FeatureMatrix out(columns_);
  out.values_.reserve(indices.size() * cols());
  for (std::size_t i : indices) {
    auto r = row(i);
    out.values_.insert(out.values_.end(), r.begin(), r.end());
    out.labels_.push_back(labels_[i]);
    out.groups_.push_back(groups_[i]);
  }
  return out;
}

FeatureMatrix FeatureMatrix::subset_columns(std::span<const std::size_t> indices) const {
  std::vector<std::string> names;
  for (std::size_t c : indices) names.push_back(columns_.at(c));
  FeatureMatrix out(std::move(names));
  out.values_.reserve(rows() * indices.size());
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c : indices) out.values_.push_back(at(r, c));
  }
  out.labels_ = labels_;
  out.groups_ = groups_;
  return out;
}

std::optional<std::size_t> FeatureMatrix::column_index(std::string_view name) const {
  auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - columns_.begin());
}

std::string write_feature_csv(const FeatureMatrix& m) {
  std::string out;
  for (const auto& c : m.column_names()) {
    out += c;
    out += ',';
  }
  out += "label,group_id\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (double v : m.row(r)) {
      out += fmt::format("{}", v);
      out += ',';
    }
    out += to_string(m.labels()[r]);
    out += ',';
    out += m.group_ids()[r];
    out += '\n';
  }
  return out;
}

FeatureMatrix parse_feature_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    if (end > pos) lines.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  if (lines.empty()) throw FormatError("empty feature CSV");

  auto split = [](std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        cells.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    return cells;
  };

  auto header = split(lines[0]);
  if (header.size() < 2 || header[header.size() - 2] != "label" || header.back() != "group_id") {
    throw FormatError("feature CSV header must end with label,group_id");
  }
  std::vector<std::string> names(header.begin(), header.end() - 2);
  FeatureMatrix m(names);
  std::vector<double> row(names.size());
  for (std::size_t l = 1; l < lines.size(); ++l) {
    auto cells = split(lines[l]);
    if (cells.size() != header.size()) throw ParseError(l + 1, "wrong number of cells");
    for (std::size_t c = 0; c < names.size(); ++c) {
      auto cell = cells[c];
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), row[c]);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError(l + 1, "bad number \"" + std::string(cell) + "\"");
      }
    }
    auto mood = parse_mood(cells[names.size()]);
    if (!mood) throw ParseError(l + 1, "bad label");
    m.append_row(row, *mood, std::string(cells.back()));
  }
  return m;
}

namespace {

constexpr std::array<const char*, 7> kChannels = {"hr",     "acc_x",  "acc_y", "acc_z",
                                                   "gyro_x", "gyro_y", "gyro_z"};
constexpr std::array<const char*, 7> kStats = {"mean", "median", "mode", "std",
                                                "min",  "max",    "peaks"};

void push_demographics(std::vector<double>& row, const ParticipantMeta& meta) {
  row.push_back(static_cast<double>(meta.age));
  row.push_back(meta.gender == Gender::male ? 1.0 : 0.0);
  row.push_back(meta.gender == Gender::female ? 1.0 : 0.0);
}

void push_stats(std::vector<double>& row, const ChannelStats& s) {
  row.push_back(s.mean);
  row.push_back(s.median);
  row.push_back(s.mode);
  row.push_back(s.std);
  row.push_back(s.min);
  row.push_back(s.max);
  row.push_back(static_cast<double>(s.peak_count));
}

}  // namespace

const std::vector<std::string>& statistical_column_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const char* ch : kChannels) {
      for (const char* st : kStats) n.push_back(fmt::format("{}_{}", ch, st));
    }
    for (const char* h : {"sdnn", "rmssd", "nn50", "pnn50", "hr_range"}) n.emplace_back(h);
    for (const char* d : {"age", "gender_male", "gender_female"}) n.emplace_back(d);
    return n;
  }();
  return names;
}

const std::vector<std::string>& nonstatistical_column_names() {
  static const std::vector<std::string> names = {"hr",     "acc_x",  "acc_y",  "acc_z",
                                                 "gyro_x", "gyro_y", "gyro_z", "age",
                                                 "gender_male", "gender_female"};
  return names;
}

std::vector<double> statistical_features(const SessionRecording& cleaned, NnWindow window) {
  const auto hr = hr_readings(cleaned);
  const HrvMetrics hrv = compute_hrv(hr, window);

  std::vector<double> row;
  row.reserve(kStatisticalColumns);
  std::vector<double> channel;
  channel.reserve(cleaned.samples.size());
  for (const auto& r : hr) channel.push_back(r.bpm);
  push_stats(row, channel_stats(channel));
  for (int sensor = 0; sensor < 2; ++sensor) {
    for (int axis = 0; axis < 3; ++axis) {
      channel.clear();
      for (const auto& s : cleaned.samples) channel.push_back(sensor == 0 ? s.acc[axis] : s.gyro[axis]);
      push_stats(row, channel_stats(channel));
    }
  }
  row.push_back(hrv.sdnn);
  row.push_back(hrv.rmssd);
  row.push_back(static_cast<double>(hrv.nn50));
  row.push_back(hrv.pnn50);
  row.push_back(hrv.hr_range);
  push_demographics(row, cleaned.meta);
  return row;
}

StatisticalRow build_statistical_row(const SessionRecording& cleaned, NnWindow window) {
  if (!cleaned.assessment) {
    throw DataError("session " + cleaned.meta.session_id + " has no self-assessment");
  }
  return {statistical_features(cleaned, window), map_emotion(cleaned.assessment->emotion)};
}

FeatureMatrix build_nonstatistical_rows(const SessionRecording& cleaned) {
  FeatureMatrix m(nonstatistical_column_names());
  const BinaryMood label =
      cleaned.assessment ? map_emotion(cleaned.assessment->emotion) : BinaryMood::pleasant;
  std::optional<double> last_hr;
  std::vector<double> row;
  for (const auto& s : cleaned.samples) {
    if (s.hr_bpm) last_hr = s.hr_bpm;
    // Cleaning strips the warm-up, so the first sample always carries HR.
    if (!last_hr) throw DataError("session " + cleaned.meta.session_id + " starts without heart rate");
    row.clear();
    row.push_back(*last_hr);
    row.insert(row.end(), s.acc.begin(), s.acc.end());
    row.insert(row.end(), s.gyro.begin(), s.gyro.end());
    push_demographics(row, cleaned.meta);
    m.append_row(row, label, cleaned.meta.session_id);
  }
  return m;
}

std::string_view to_string(DatasetFlavor f) noexcept {
  return f == DatasetFlavor::statistical ? "statistical" : "nonstatistical";
}

std::optional<DatasetFlavor> parse_flavor(std::string_view s) noexcept {
  if (s == "statistical") return DatasetFlavor::statistical;
  if (s == "nonstatistical" || s == "non-statistical") return DatasetFlavor::nonstatistical;
  return std::nullopt;
}

FeatureMatrix build_dataset(std::span<const SessionRecording> corpus, DatasetFlavor flavor,
                            unsigned jobs, NnWindow window) {
  std::vector<FeatureMatrix> parts(corpus.size());
  std::vector<std::exception_ptr> errors(corpus.size());

  auto work = [&](std::size_t i) {
    try {
      const auto& r = corpus[i];
      if (!r.assessment) throw DataError("session " + r.meta.session_id + " has no self-assessment");
      auto cleaned = clean_recording(r, window).first;
      if (flavor == DatasetFlavor::statistical) {
        FeatureMatrix m(statistical_column_names());
        auto row = build_statistical_row(cleaned, window);
        m.append_row(row.values, row.label, cleaned.meta.session_id);
        parts[i] = std::move(m);
      } else {
        parts[i] = build_nonstatistical_rows(cleaned);
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(corpus.size())));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < corpus.size(); ++i) work(i);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < corpus.size(); i += jobs) work(i);
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  FeatureMatrix out(flavor == DatasetFlavor::statistical ? statistical_column_names()
                                                         : nonstatistical_column_names());
  for (const auto& p : parts) out.append(p);
  return out;
}

}  // namespace emowatch
