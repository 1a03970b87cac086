#include "emowatch/synthesis.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <numbers>
#include <thread>

#include <fmt/format.h>

#include "emowatch/errors.hpp"
#include "emowatch/ingestion.hpp"
#include "emowatch/random.hpp"

namespace emowatch {

namespace {

std::size_t emotion_index(EmotionLabel e) {
  return static_cast<std::size_t>(std::find(kAllEmotions.begin(), kAllEmotions.end(), e) -
                                  kAllEmotions.begin());
}

// Box-Muller on uniform01 so the stream is the same with every standard library.
double normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

bool high_arousal(EmotionLabel e) {
  switch (e) {
    case EmotionLabel::joy:
    case EmotionLabel::surprise:
    case EmotionLabel::anticipation:
    case EmotionLabel::anger:
    case EmotionLabel::fear:
      return true;
    default:
      return false;
  }
}

constexpr double kPhi = 0.9;
constexpr double kGravity = 9.81;
constexpr double kMinBpm = 35.0;

class SampleGenerator {
 public:
  SampleGenerator(const GeneratorConfig& cfg, EmotionLabel emotion, std::uint64_t seed)
      : p_(cfg.profile.effective(emotion)),
        rng_(derive_seed(seed, 1)),
        rate_(cfg.sample_rate_hz),
        warmup_(static_cast<std::size_t>(std::ceil(cfg.warmup_s * cfg.sample_rate_hz - 1e-9))) {
    noise_ = p_.hr_sd * normal(rng_);
  }

  SensorSample next() {
    SensorSample s;
    s.t_ms = std::llround(static_cast<double>(i_) * 1000.0 / rate_);
    // Innovation sd keeps the stationary sd at hr_sd.
    if (i_ > 0) noise_ = kPhi * noise_ + p_.hr_sd * std::sqrt(1.0 - kPhi * kPhi) * normal(rng_);
    if (i_ >= warmup_) s.hr_bpm = std::max(kMinBpm, p_.hr_baseline + noise_);
    for (std::size_t a = 0; a < 3; ++a) s.acc[a] = p_.motion_energy * normal(rng_);
    s.acc[2] += kGravity;
    for (std::size_t a = 0; a < 3; ++a) s.gyro[a] = p_.gyro_energy * normal(rng_);
    ++i_;
    return s;
  }

 private:
  SignalProfile p_;
  Rng rng_;
  double rate_;
  std::size_t warmup_;
  std::size_t i_ = 0;
  double noise_ = 0.0;
};

}  // namespace

SignalProfile MoodProfile::neutral() const {
  SignalProfile n{0, 0, 0, 0};
  for (const auto& p : per_emotion) {
    n.hr_baseline += p.hr_baseline / 8.0;
    n.hr_sd += p.hr_sd / 8.0;
    n.motion_energy += p.motion_energy / 8.0;
    n.gyro_energy += p.gyro_energy / 8.0;
  }
  return n;
}

SignalProfile MoodProfile::effective(EmotionLabel e) const {
  const SignalProfile n = neutral();
  const SignalProfile& o = per_emotion[emotion_index(e)];
  auto mix = [&](double nv, double ov) { return std::max(0.0, nv + effect_size * (ov - nv)); };
  return {mix(n.hr_baseline, o.hr_baseline), mix(n.hr_sd, o.hr_sd), mix(n.motion_energy, o.motion_energy),
          mix(n.gyro_energy, o.gyro_energy)};
}

MoodProfile MoodProfile::defaults() {
  MoodProfile m;
  // kAllEmotions order: joy, trust, fear, surprise, sadness, disgust, anger, anticipation.
  m.per_emotion = {{
      {88.0, 3.0, 0.30, 0.20},
      {82.0, 3.0, 0.30, 0.12},
      {72.0, 3.0, 0.75, 0.35},
      {85.0, 3.0, 0.22, 0.25},
      {68.0, 3.0, 0.95, 0.32},
      {70.0, 3.0, 0.80, 0.30},
      {73.0, 3.0, 0.85, 0.40},
      {84.0, 3.0, 0.35, 0.45},
  }};
  return m;
}

void validate_config(const GeneratorConfig& cfg) {
  if (cfg.sessions_per_emotion == 0) throw SpecError("sessions_per_emotion must be at least 1");
  if (!(cfg.sample_rate_hz > 0.0) || !std::isfinite(cfg.sample_rate_hz)) {
    throw SpecError("sample_rate_hz must be positive");
  }
  if (!(cfg.warmup_s >= 0.0)) throw SpecError("warmup_s must be non-negative");
  if (!(cfg.duration_s > cfg.warmup_s) || !std::isfinite(cfg.duration_s)) {
    throw SpecError("duration_s must exceed warmup_s");
  }
  if (!std::isfinite(cfg.profile.effect_size) || cfg.profile.effect_size < 0.0) {
    throw SpecError("effect_size must be finite and non-negative");
  }
  for (const auto& p : cfg.profile.per_emotion) {
    for (double v : {p.hr_baseline, p.hr_sd, p.motion_energy, p.gyro_energy}) {
      if (!std::isfinite(v) || v < 0.0) throw SpecError("profile scales must be finite and >= 0");
    }
    if (p.hr_baseline <= 0.0) throw SpecError("hr_baseline must be positive");
  }
  const auto total = samples_per_session(cfg);
  const auto warm = static_cast<std::size_t>(std::ceil(cfg.warmup_s * cfg.sample_rate_hz - 1e-9));
  if (total < warm + 2) throw SpecError("sessions need at least two samples after warm-up");
}

std::size_t samples_per_session(const GeneratorConfig& cfg) {
  return static_cast<std::size_t>(std::floor(cfg.duration_s * cfg.sample_rate_hz + 1e-9));
}

std::uint64_t session_seed(const GeneratorConfig& cfg, std::size_t slot) {
  return derive_seed(cfg.seed, slot);
}

std::string session_id_for(std::size_t slot) { return fmt::format("syn-{:04}", slot); }

SessionRecording generate_session(const GeneratorConfig& cfg, EmotionLabel emotion, std::size_t slot) {
  validate_config(cfg);
  const std::uint64_t seed = session_seed(cfg, slot);
  Rng meta_rng(derive_seed(seed, 0));

  SessionRecording r;
  r.meta.session_id = session_id_for(slot);
  r.meta.age = uniform_int(meta_rng, 16, 60);
  r.meta.gender = slot % 2 == 0 ? Gender::male : Gender::female;
  r.meta.target_emotion = emotion;

  SelfAssessment a;
  a.emotion = emotion;
  const bool pleasant = map_emotion(emotion) == BinaryMood::pleasant;
  a.valence = std::clamp(uniform_int(meta_rng, pleasant ? 7 : 1, pleasant ? 9 : 3) + uniform_int(meta_rng, -1, 1),
                         0, 10);
  const bool high = high_arousal(emotion);
  a.arousal = std::clamp(uniform_int(meta_rng, high ? 6 : 2, high ? 8 : 4) + uniform_int(meta_rng, -1, 1), 0, 10);
  r.assessment = a;

  stream_session(cfg, emotion, slot, [&](const SensorSample& s) { r.samples.push_back(s); });
  return r;
}

std::vector<SessionRecording> generate_corpus(const GeneratorConfig& cfg, unsigned jobs) {
  validate_config(cfg);
  const std::size_t n = cfg.sessions_per_emotion * kAllEmotions.size();
  std::vector<SessionRecording> out(n);
  auto make = [&](std::size_t slot) {
    out[slot] = generate_session(cfg, kAllEmotions[slot / cfg.sessions_per_emotion], slot);
  };
  jobs = std::clamp<unsigned>(jobs, 1, static_cast<unsigned>(n));
  if (jobs == 1) {
    for (std::size_t s = 0; s < n; ++s) make(s);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < jobs; ++w) {
      pool.emplace_back([&] {
        for (std::size_t s = next++; s < n; s = next++) make(s);
      });
    }
  }
  return out;
}

void stream_session(const GeneratorConfig& cfg, EmotionLabel emotion, std::size_t slot,
                    const SampleSink& sink, double pacing) {
  validate_config(cfg);
  if (pacing < 0.0 || !std::isfinite(pacing)) throw SpecError("pacing must be finite and >= 0");
  SampleGenerator gen(cfg, emotion, session_seed(cfg, slot));
  const std::size_t n = samples_per_session(cfg);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < n; ++i) {
    const SensorSample s = gen.next();
    if (pacing > 0.0) {
      const auto due = start + std::chrono::duration<double, std::milli>(static_cast<double>(s.t_ms) * pacing);
      std::this_thread::sleep_until(due);
    }
    sink(s);
  }
}

std::string write_manifest(const GeneratorConfig& cfg) {
  validate_config(cfg);
  std::string out = fmt::format("# seed={} sessions_per_emotion={} effect_size={}\n", cfg.seed,
                                cfg.sessions_per_emotion, cfg.profile.effect_size);
  out += "session_id\tslot\temotion\tseed\n";
  const std::size_t n = cfg.sessions_per_emotion * kAllEmotions.size();
  for (std::size_t slot = 0; slot < n; ++slot) {
    out += fmt::format("{}\t{}\t{}\t{}\n", session_id_for(slot), slot,
                       to_string(kAllEmotions[slot / cfg.sessions_per_emotion]), session_seed(cfg, slot));
  }
  return out;
}

std::vector<SessionRecording> write_corpus(const GeneratorConfig& cfg, const std::filesystem::path& dir,
                                           unsigned jobs) {
  auto corpus = generate_corpus(cfg, jobs);
  std::filesystem::create_directories(dir);
  for (const auto& r : corpus) write_session_file(r, dir / (r.meta.session_id + ".jsonl"));
  const std::string manifest = write_manifest(cfg);
  std::FILE* f = std::fopen((dir / "manifest.tsv").c_str(), "wb");
  if (!f) throw Error("cannot write " + (dir / "manifest.tsv").string());
  const bool ok = std::fwrite(manifest.data(), 1, manifest.size(), f) == manifest.size();
  if (std::fclose(f) != 0 || !ok) throw Error("cannot write " + (dir / "manifest.tsv").string());
  return corpus;
}

}  // namespace emowatch
