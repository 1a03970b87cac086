#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emowatch/types.hpp"

namespace emowatch {

// Line-delimited session files: one JSON object per line with a "type"
// discriminator, meta first, samples next, optional assessment last.
//
//   {"type":"meta","session_id":S,"age":N,"gender":G,"target_emotion":E}
//   {"type":"sample","t_ms":N,"hr_bpm":F|null,"acc":[x,y,z],"gyro":[x,y,z]}
//   {"type":"assessment","valence":V,"arousal":A,"emotion":E}
//
// write_session produces the canonical form; parse_session of a canonical
// file followed by write_session reproduces it byte for byte.

SessionRecording parse_session_text(std::string_view text);
SessionRecording parse_session(const std::filesystem::path& file);

std::string write_session(const SessionRecording& r);

// Writes to a temporary sibling then renames over the target.
void write_session_file(const SessionRecording& r, const std::filesystem::path& file);

// Flat CSV export, one row per sample with meta/assessment columns repeated.
// Rows are grouped by session_id in order of first appearance. Read-only.
std::vector<SessionRecording> parse_session_csv_text(std::string_view text);
std::vector<SessionRecording> parse_session_csv(const std::filesystem::path& file);

// Every *.jsonl and *.csv file in `dir`, sorted by file name.
std::vector<SessionRecording> load_corpus(const std::filesystem::path& dir);

struct CleaningReport {
  std::size_t warmup_samples_dropped = 0;
  std::size_t invalid_samples_dropped = 0;
  // HR readings whose bpm-derived interval falls outside the NN window.
  std::size_t nn_intervals_removed = 0;

  friend bool operator==(const CleaningReport&, const CleaningReport&) = default;
};

// Physiological plausibility window for NN intervals, in ms (30-200 bpm).
struct NnWindow {
  double min_ms = 300.0;
  double max_ms = 2000.0;
};

// Drops leading samples whose heart rate is absent or zero (sensor warm-up,
// motion channels discarded with them), then any sample with a non-finite or
// non-positive reading or a non-increasing timestamp. Idempotent.
// Throws EmptySessionError when nothing survives.
std::pair<SessionRecording, CleaningReport> clean_recording(const SessionRecording& r,
                                                             NnWindow window = {});

// Keeps intervals inside the window, preserving order and values.
std::vector<double> clean_nn_intervals(std::span<const double> nn_ms, NnWindow window = {});

}  // namespace emowatch
