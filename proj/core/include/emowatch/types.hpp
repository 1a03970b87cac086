#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace emowatch {

// Plutchik's eight basic emotions. There is deliberately no neutral value.
enum class EmotionLabel {
  joy,
  trust,
  fear,
  surprise,
  sadness,
  disgust,
  anger,
  anticipation,
};

inline constexpr std::array<EmotionLabel, 8> kAllEmotions = {
    EmotionLabel::joy,     EmotionLabel::trust,   EmotionLabel::fear,
    EmotionLabel::surprise, EmotionLabel::sadness, EmotionLabel::disgust,
    EmotionLabel::anger,   EmotionLabel::anticipation,
};

enum class BinaryMood { pleasant, unpleasant };

enum class Gender { male, female, other };

enum class AgeGroup { age_16_30, age_31_45, age_over_45 };

using Vec3 = std::array<double, 3>;

struct SensorSample {
  std::int64_t t_ms = 0;
  std::optional<double> hr_bpm;  // absent while the PPG sensor warms up
  Vec3 acc{};                    // m/s^2
  Vec3 gyro{};                   // rad/s

  friend bool operator==(const SensorSample&, const SensorSample&) = default;
};

struct ParticipantMeta {
  std::string session_id;
  int age = 0;
  Gender gender = Gender::other;
  // Operator-chosen stimulus emotion. Metadata only; never the training label.
  std::optional<EmotionLabel> target_emotion;

  // Throws DomainError when age is below the protocol range.
  AgeGroup age_group() const;

  friend bool operator==(const ParticipantMeta&, const ParticipantMeta&) = default;
};

struct SelfAssessment {
  int valence = 0;  // 0-10
  int arousal = 0;  // 0-10
  EmotionLabel emotion = EmotionLabel::joy;

  friend bool operator==(const SelfAssessment&, const SelfAssessment&) = default;
};

struct SessionRecording {
  ParticipantMeta meta;
  std::vector<SensorSample> samples;  // strictly increasing t_ms
  std::optional<SelfAssessment> assessment;

  friend bool operator==(const SessionRecording&, const SessionRecording&) = default;
};

struct Violation {
  std::string field;
  std::string rule;

  friend bool operator==(const Violation&, const Violation&) = default;
};

inline constexpr int kMinAge = 16;

BinaryMood map_emotion(EmotionLabel e) noexcept;

AgeGroup age_group(int age);

// Checks every SessionRecording invariant; never throws.
std::vector<Violation> validate_recording(const SessionRecording& r);

// Meta-only subset of validate_recording, used by the service on creation.
std::vector<Violation> validate_meta(const ParticipantMeta& m);
std::vector<Violation> validate_assessment(const SelfAssessment& a);
std::vector<Violation> validate_sample(const SensorSample& s, std::size_t index);

std::string_view to_string(EmotionLabel e) noexcept;
std::string_view to_string(BinaryMood m) noexcept;
std::string_view to_string(Gender g) noexcept;
std::string_view to_string(AgeGroup g) noexcept;

std::optional<EmotionLabel> parse_emotion(std::string_view s) noexcept;
std::optional<BinaryMood> parse_mood(std::string_view s) noexcept;
std::optional<Gender> parse_gender(std::string_view s) noexcept;

}  // namespace emowatch
