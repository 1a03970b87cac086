#include "emowatch/ingestion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "emowatch/errors.hpp"

namespace emowatch {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class LineReader {
 public:
  LineReader(const json& obj, std::size_t line) : obj_(obj), line_(line) {}

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_, msg); }

  const json& field(const char* key) const {
    auto it = obj_.find(key);
    if (it == obj_.end()) fail(std::string("missing field \"") + key + "\"");
    return *it;
  }

  std::int64_t integer(const char* key) const {
    const json& v = field(key);
    if (!v.is_number_integer()) fail(std::string("field \"") + key + "\" must be an integer");
    return v.get<std::int64_t>();
  }

  double number(const json& v, const char* key) const {
    if (!v.is_number()) fail(std::string("field \"") + key + "\" must be a number");
    return v.get<double>();
  }

  std::string string(const char* key) const {
    const json& v = field(key);
    if (!v.is_string()) fail(std::string("field \"") + key + "\" must be a string");
    return v.get<std::string>();
  }

  Vec3 vec3(const char* key) const {
    const json& v = field(key);
    if (!v.is_array() || v.size() != 3) fail(std::string("field \"") + key + "\" must be a 3-array");
    return {number(v[0], key), number(v[1], key), number(v[2], key)};
  }

  EmotionLabel emotion(const json& v, const char* key) const {
    if (!v.is_string()) fail(std::string("field \"") + key + "\" must be a string");
    auto e = parse_emotion(v.get<std::string>());
    if (!e) fail("unknown emotion \"" + v.get<std::string>() + "\"");
    return *e;
  }

  void only(std::initializer_list<const char*> allowed) const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (std::none_of(allowed.begin(), allowed.end(),
                       [&](const char* a) { return it.key() == a; })) {
        fail("unexpected field \"" + it.key() + "\"");
      }
    }
  }

 private:
  const json& obj_;
  std::size_t line_;
};

ParticipantMeta read_meta(const LineReader& in, const json& obj) {
  in.only({"type", "session_id", "age", "gender", "target_emotion"});
  ParticipantMeta m;
  m.session_id = in.string("session_id");
  m.age = static_cast<int>(in.integer("age"));
  auto g = parse_gender(in.string("gender"));
  if (!g) in.fail("unknown gender");
  m.gender = *g;
  if (auto it = obj.find("target_emotion"); it != obj.end() && !it->is_null()) {
    m.target_emotion = in.emotion(*it, "target_emotion");
  }
  return m;
}

SensorSample read_sample(const LineReader& in) {
  in.only({"type", "t_ms", "hr_bpm", "acc", "gyro"});
  SensorSample s;
  s.t_ms = in.integer("t_ms");
  const json& hr = in.field("hr_bpm");
  if (!hr.is_null()) s.hr_bpm = in.number(hr, "hr_bpm");
  s.acc = in.vec3("acc");
  s.gyro = in.vec3("gyro");
  return s;
}

SelfAssessment read_assessment(const LineReader& in) {
  in.only({"type", "valence", "arousal", "emotion"});
  SelfAssessment a;
  a.valence = static_cast<int>(in.integer("valence"));
  a.arousal = static_cast<int>(in.integer("arousal"));
  a.emotion = in.emotion(in.field("emotion"), "emotion");
  return a;
}

ordered_json vec_json(const Vec3& v) { return ordered_json::array({v[0], v[1], v[2]}); }

}  // namespace

SessionRecording parse_session_text(std::string_view text) {
  SessionRecording r;
  bool have_meta = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(line_no, "record must be a JSON object");
    LineReader in(obj, line_no);
    const std::string type = in.string("type");

    if (type == "meta") {
      if (have_meta) throw FormatError("line " + std::to_string(line_no) + ": duplicate meta record");
      r.meta = read_meta(in, obj);
      have_meta = true;
      continue;
    }
    if (!have_meta) {
      throw FormatError("line " + std::to_string(line_no) + ": " + type +
                        " record before meta record");
    }
    if (r.assessment) {
      throw FormatError("line " + std::to_string(line_no) +
                        (type == "assessment" ? ": duplicate assessment record"
                                              : ": record after assessment"));
    }
    if (type == "sample") {
      r.samples.push_back(read_sample(in));
    } else if (type == "assessment") {
      r.assessment = read_assessment(in);
    } else {
      throw ParseError(line_no, "unknown record type \"" + type + "\"");
    }
  }
  if (!have_meta) throw FormatError("missing meta record");
  return r;
}

SessionRecording parse_session(const fs::path& file) { return parse_session_text(read_file(file)); }

std::string write_session(const SessionRecording& r) {
  std::string out;
  ordered_json meta;
  meta["type"] = "meta";
  meta["session_id"] = r.meta.session_id;
  meta["age"] = r.meta.age;
  meta["gender"] = std::string(to_string(r.meta.gender));
  if (r.meta.target_emotion) meta["target_emotion"] = std::string(to_string(*r.meta.target_emotion));
  out += meta.dump();
  out += '\n';
  for (const auto& s : r.samples) {
    ordered_json j;
    j["type"] = "sample";
    j["t_ms"] = s.t_ms;
    j["hr_bpm"] = s.hr_bpm ? ordered_json(*s.hr_bpm) : ordered_json(nullptr);
    j["acc"] = vec_json(s.acc);
    j["gyro"] = vec_json(s.gyro);
    out += j.dump();
    out += '\n';
  }
  if (r.assessment) {
    ordered_json j;
    j["type"] = "assessment";
    j["valence"] = r.assessment->valence;
    j["arousal"] = r.assessment->arousal;
    j["emotion"] = std::string(to_string(r.assessment->emotion));
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_session_file(const SessionRecording& r, const fs::path& file) {
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << write_session(r);
    if (!out.flush()) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, file);
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

template <class T>
T parse_num(std::string_view cell, std::size_t line, const char* what) {
  T v{};
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw ParseError(line, std::string("bad ") + what + " \"" + std::string(cell) + "\"");
  }
  return v;
}

}  // namespace

std::vector<SessionRecording> parse_session_csv_text(std::string_view text) {
  static constexpr std::array<const char*, 15> kColumns = {
      "session_id", "age",    "gender", "target_emotion", "t_ms",    "hr_bpm",  "acc_x", "acc_y",
      "acc_z",      "gyro_x", "gyro_y", "gyro_z",         "valence", "arousal", "emotion"};

  std::vector<SessionRecording> out;
  std::map<std::string, std::size_t> index;
  std::array<std::size_t, kColumns.size()> col{};
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto cells = split_csv(line);

    if (!have_header) {
      for (std::size_t c = 0; c < kColumns.size(); ++c) {
        auto it = std::find(cells.begin(), cells.end(), kColumns[c]);
        if (it == cells.end()) throw FormatError(std::string("CSV header lacks column ") + kColumns[c]);
        col[c] = static_cast<std::size_t>(it - cells.begin());
      }
      have_header = true;
      continue;
    }
    if (cells.size() < *std::max_element(col.begin(), col.end()) + 1) {
      throw ParseError(line_no, "too few columns");
    }
    auto cell = [&](std::size_t c) { return cells[col[c]]; };

    const std::string sid(cell(0));
    if (sid.empty()) throw ParseError(line_no, "empty session_id");
    auto [it, inserted] = index.try_emplace(sid, out.size());
    if (inserted) {
      SessionRecording r;
      r.meta.session_id = sid;
      r.meta.age = parse_num<int>(cell(1), line_no, "age");
      auto g = parse_gender(cell(2));
      if (!g) throw ParseError(line_no, "unknown gender");
      r.meta.gender = *g;
      if (!cell(3).empty()) {
        auto e = parse_emotion(cell(3));
        if (!e) throw ParseError(line_no, "unknown target_emotion");
        r.meta.target_emotion = *e;
      }
      if (!cell(14).empty()) {
        auto e = parse_emotion(cell(14));
        if (!e) throw ParseError(line_no, "unknown emotion");
        r.assessment = SelfAssessment{parse_num<int>(cell(12), line_no, "valence"),
                                      parse_num<int>(cell(13), line_no, "arousal"), *e};
      }
      out.push_back(std::move(r));
    }
    SensorSample s;
    s.t_ms = parse_num<std::int64_t>(cell(4), line_no, "t_ms");
    if (!cell(5).empty()) s.hr_bpm = parse_num<double>(cell(5), line_no, "hr_bpm");
    for (int k = 0; k < 3; ++k) {
      s.acc[k] = parse_num<double>(cell(6 + k), line_no, "acc");
      s.gyro[k] = parse_num<double>(cell(9 + k), line_no, "gyro");
    }
    out[it->second].samples.push_back(s);
  }
  if (!have_header) throw FormatError("empty CSV");
  return out;
}

std::vector<SessionRecording> parse_session_csv(const fs::path& file) {
  return parse_session_csv_text(read_file(file));
}

std::vector<SessionRecording> load_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".jsonl" || ext == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SessionRecording> out;
  for (const auto& f : files) {
    try {
      if (f.extension() == ".csv") {
        auto rs = parse_session_csv(f);
        std::move(rs.begin(), rs.end(), std::back_inserter(out));
      } else {
        out.push_back(parse_session(f));
      }
    } catch (const ParseError& e) {
      throw ParseError(e.line(), f.filename().string() + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(f.filename().string() + ": " + e.what());
    }
  }
  return out;
}

namespace {

bool sample_is_valid(const SensorSample& s) {
  auto finite3 = [](const Vec3& v) {
    return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]);
  };
  if (s.t_ms < 0 || !finite3(s.acc) || !finite3(s.gyro)) return false;
  if (s.hr_bpm && !(std::isfinite(*s.hr_bpm) && *s.hr_bpm > 0)) return false;
  return true;
}

bool hr_missing(const SensorSample& s) { return !s.hr_bpm || *s.hr_bpm == 0.0; }

}  // namespace

std::pair<SessionRecording, CleaningReport> clean_recording(const SessionRecording& r,
                                                             NnWindow window) {
  SessionRecording out;
  out.meta = r.meta;
  out.assessment = r.assessment;
  CleaningReport report;
  bool warming_up = true;
  for (const auto& s : r.samples) {
    if (warming_up && hr_missing(s)) {
      ++report.warmup_samples_dropped;
      continue;
    }
    if (!sample_is_valid(s) || (!out.samples.empty() && s.t_ms <= out.samples.back().t_ms)) {
      ++report.invalid_samples_dropped;
      continue;
    }
    warming_up = false;
    out.samples.push_back(s);
    if (s.hr_bpm) {
      const double nn = 60000.0 / *s.hr_bpm;
      if (nn < window.min_ms || nn > window.max_ms) ++report.nn_intervals_removed;
    }
  }
  if (out.samples.empty()) {
    throw EmptySessionError("session " + r.meta.session_id + " has no usable samples after cleaning");
  }
  return {std::move(out), report};
}

std::vector<double> clean_nn_intervals(std::span<const double> nn_ms, NnWindow window) {
  std::vector<double> out;
  out.reserve(nn_ms.size());
  for (double v : nn_ms) {
    if (v >= window.min_ms && v <= window.max_ms) out.push_back(v);
  }
  return out;
}

}  // namespace emowatch
