#include "emowatch/types.hpp"

#include <cmath>

#include "emowatch/errors.hpp"

namespace emowatch {

BinaryMood map_emotion(EmotionLabel e) noexcept {
  switch (e) {
    case EmotionLabel::anger:
    case EmotionLabel::sadness:
    case EmotionLabel::disgust:
    case EmotionLabel::fear:
      return BinaryMood::unpleasant;
    case EmotionLabel::joy:
    case EmotionLabel::surprise:
    case EmotionLabel::anticipation:
    case EmotionLabel::trust:
      break;
  }
  return BinaryMood::pleasant;
}

AgeGroup age_group(int age) {
  if (age < kMinAge) {
    throw DomainError("age " + std::to_string(age) + " is below " +
                      std::to_string(kMinAge) + " (outside collection protocol)");
  }
  if (age <= 30) return AgeGroup::age_16_30;
  if (age <= 45) return AgeGroup::age_31_45;
  return AgeGroup::age_over_45;
}

AgeGroup ParticipantMeta::age_group() const { return emowatch::age_group(age); }

namespace {

bool finite3(const Vec3& v) {
  return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]);
}

}  // namespace

std::vector<Violation> validate_meta(const ParticipantMeta& m) {
  std::vector<Violation> out;
  if (m.session_id.empty()) out.push_back({"meta.session_id", "must be non-empty"});
  if (m.age < kMinAge) out.push_back({"meta.age", "age out of range (must be >= 16)"});
  return out;
}

std::vector<Violation> validate_assessment(const SelfAssessment& a) {
  std::vector<Violation> out;
  if (a.valence < 0 || a.valence > 10)
    out.push_back({"assessment.valence", "valence out of range (0-10)"});
  if (a.arousal < 0 || a.arousal > 10)
    out.push_back({"assessment.arousal", "arousal out of range (0-10)"});
  return out;
}

std::vector<Violation> validate_sample(const SensorSample& s, std::size_t index) {
  std::vector<Violation> out;
  const std::string prefix = "samples[" + std::to_string(index) + "]";
  if (s.t_ms < 0) out.push_back({prefix + ".t_ms", "negative timestamp"});
  if (s.hr_bpm && !(std::isfinite(*s.hr_bpm) && *s.hr_bpm > 0))
    out.push_back({prefix + ".hr_bpm", "heart rate must be finite and > 0"});
  if (!finite3(s.acc)) out.push_back({prefix + ".acc", "non-finite component"});
  if (!finite3(s.gyro)) out.push_back({prefix + ".gyro", "non-finite component"});
  return out;
}

std::vector<Violation> validate_recording(const SessionRecording& r) {
  std::vector<Violation> out = validate_meta(r.meta);
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    auto v = validate_sample(r.samples[i], i);
    out.insert(out.end(), v.begin(), v.end());
    if (i > 0 && r.samples[i].t_ms <= r.samples[i - 1].t_ms) {
      out.push_back({"samples[" + std::to_string(i) + "].t_ms", "non-increasing timestamp"});
    }
  }
  if (r.assessment) {
    auto v = validate_assessment(*r.assessment);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

std::string_view to_string(EmotionLabel e) noexcept {
  switch (e) {
    case EmotionLabel::joy: return "joy";
    case EmotionLabel::trust: return "trust";
    case EmotionLabel::fear: return "fear";
    case EmotionLabel::surprise: return "surprise";
    case EmotionLabel::sadness: return "sadness";
    case EmotionLabel::disgust: return "disgust";
    case EmotionLabel::anger: return "anger";
    case EmotionLabel::anticipation: return "anticipation";
  }
  return "?";
}

std::string_view to_string(BinaryMood m) noexcept {
  return m == BinaryMood::pleasant ? "pleasant" : "unpleasant";
}

std::string_view to_string(Gender g) noexcept {
  switch (g) {
    case Gender::male: return "male";
    case Gender::female: return "female";
    case Gender::other: return "other";
  }
  return "?";
}

std::string_view to_string(AgeGroup g) noexcept {
  switch (g) {
    case AgeGroup::age_16_30: return "16-30";
    case AgeGroup::age_31_45: return "31-45";
    case AgeGroup::age_over_45: return "45+";
  }
  return "?";
}

std::optional<EmotionLabel> parse_emotion(std::string_view s) noexcept {
  for (auto e : kAllEmotions) {
    if (to_string(e) == s) return e;
  }
  return std::nullopt;
}

std::optional<BinaryMood> parse_mood(std::string_view s) noexcept {
  if (s == "pleasant") return BinaryMood::pleasant;
  if (s == "unpleasant") return BinaryMood::unpleasant;
  return std::nullopt;
}

std::optional<Gender> parse_gender(std::string_view s) noexcept {
  if (s == "male") return Gender::male;
  if (s == "female") return Gender::female;
  if (s == "other") return Gender::other;
  return std::nullopt;
}

}  // namespace emowatch
