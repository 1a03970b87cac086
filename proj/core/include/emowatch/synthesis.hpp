#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "emowatch/types.hpp"

namespace emowatch {

struct SignalProfile {
  double hr_baseline = 75.0;   // bpm
  double hr_sd = 3.0;          // bpm, stationary sd of the AR(1) noise
  double motion_energy = 0.5;  // m/s^2, per-axis accelerometer noise sd
  double gyro_energy = 0.3;    // rad/s, per-axis gyroscope noise sd

  friend bool operator==(const SignalProfile&, const SignalProfile&) = default;
};

// One SignalProfile per emotion, indexed in kAllEmotions order. The
// effective profile of an emotion is neutral + effect_size * (own - neutral),
// where neutral is the mean of the eight, so effect_size 0 makes them equal.
struct MoodProfile {
  std::array<SignalProfile, 8> per_emotion{};
  double effect_size = 1.0;

  SignalProfile neutral() const;
  SignalProfile effective(EmotionLabel e) const;

  // Pleasant emotions run at higher HR, unpleasant ones move more.
  static MoodProfile defaults();
};

struct GeneratorConfig {
  std::size_t sessions_per_emotion = 10;
  double duration_s = 60.0;
  double sample_rate_hz = 1.0;
  double warmup_s = 15.0;
  std::uint64_t seed = 0;
  MoodProfile profile = MoodProfile::defaults();
};

// Throws SpecError describing the first broken invariant.
void validate_config(const GeneratorConfig& cfg);

std::size_t samples_per_session(const GeneratorConfig& cfg);

// Slots are emotion-major: slot = emotion_index * sessions_per_emotion + k.
std::uint64_t session_seed(const GeneratorConfig& cfg, std::size_t slot);
std::string session_id_for(std::size_t slot);

SessionRecording generate_session(const GeneratorConfig& cfg, EmotionLabel emotion, std::size_t slot);
std::vector<SessionRecording> generate_corpus(const GeneratorConfig& cfg, unsigned jobs = 1);

using SampleSink = std::function<void(const SensorSample&)>;

// Emits the samples generate_session would produce for the slot, one at a
// time. pacing 1 is real time, 0 is as fast as possible.
void stream_session(const GeneratorConfig& cfg, EmotionLabel emotion, std::size_t slot,
                    const SampleSink& sink, double pacing = 0.0);

// Tab-separated: session_id, slot, emotion, seed. A .tsv so load_corpus skips it.
std::string write_manifest(const GeneratorConfig& cfg);

// Writes <session_id>.jsonl per session plus manifest.tsv. Returns the corpus.
std::vector<SessionRecording> write_corpus(const GeneratorConfig& cfg, const std::filesystem::path& dir,
                                           unsigned jobs = 1);

}  // namespace emowatch
