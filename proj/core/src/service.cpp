#include "emowatch/service.hpp"

#include <cstdlib>
#include <variant>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "emowatch/errors.hpp"
#include "emowatch/evaluation.hpp"
#include "emowatch/ingestion.hpp"

namespace emowatch {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(SessionState s) noexcept {
  switch (s) {
    case SessionState::created: return "created";
    case SessionState::warming_up: return "warming_up";
    case SessionState::recording: return "recording";
    case SessionState::awaiting_assessment: return "awaiting_assessment";
    case SessionState::finished: return "finished";
  }
  return "created";
}

namespace {

ServiceResponse reply(int status, const json& body) { return {status, body.dump()}; }

ServiceResponse error(int status, std::string message) {
  return reply(status, json{{"error", std::move(message)}});
}

ServiceResponse invalid(const std::vector<Violation>& violations) {
  json list = json::array();
  for (const auto& v : violations) list.push_back({{"field", v.field}, {"rule", v.rule}});
  std::string msg = violations.empty() ? "invalid request" : violations.front().rule;
  return reply(422, json{{"error", msg}, {"violations", list}});
}

ServiceResponse wrong_state(SessionState s) {
  return error(409, fmt::format("not allowed in state {}", to_string(s)));
}

std::optional<json> parse_body(std::string_view body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

bool is_int(const json& j) { return j.is_number_integer() || j.is_number_unsigned(); }

std::optional<Vec3> vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) return std::nullopt;
  Vec3 v{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!j[i].is_number()) return std::nullopt;
    v[i] = j[i].get<double>();
  }
  return v;
}

// Structural checks first, then the core-model sample rules.
std::variant<SensorSample, std::vector<Violation>> sample_from_json(const json& j, std::size_t index) {
  const std::string prefix = fmt::format("samples[{}]", index);
  std::vector<Violation> bad;
  if (!j.is_object()) return std::vector<Violation>{{prefix, "must be an object"}};
  for (const auto& [key, value] : j.items()) {
    if (key != "type" && key != "t_ms" && key != "hr_bpm" && key != "acc" && key != "gyro") {
      bad.push_back({prefix + "." + key, "unknown field"});
    }
  }
  if (j.contains("type") && j["type"] != "sample") bad.push_back({prefix + ".type", "must be \"sample\""});
  SensorSample s;
  if (!j.contains("t_ms") || !is_int(j["t_ms"])) {
    bad.push_back({prefix + ".t_ms", "required integer"});
  } else {
    s.t_ms = j["t_ms"].get<std::int64_t>();
  }
  if (j.contains("hr_bpm") && !j["hr_bpm"].is_null()) {
    if (!j["hr_bpm"].is_number()) {
      bad.push_back({prefix + ".hr_bpm", "must be a number or null"});
    } else {
      s.hr_bpm = j["hr_bpm"].get<double>();
    }
  }
  for (const char* key : {"acc", "gyro"}) {
    auto v = j.contains(key) ? vec3(j[key]) : std::nullopt;
    if (!v) {
      bad.push_back({prefix + "." + key, "required array of 3 numbers"});
    } else {
      (std::string_view(key) == "acc" ? s.acc : s.gyro) = *v;
    }
  }
  if (bad.empty()) bad = validate_sample(s, index);
  if (!bad.empty()) return bad;
  return s;
}

}  // namespace

SessionService::SessionService(fs::path corpus_dir, std::optional<TrainedModel> model)
    : corpus_dir_(std::move(corpus_dir)), model_(std::move(model)) {}

std::shared_ptr<SessionService::Live> SessionService::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::string SessionService::next_id() {
  for (;;) {
    std::string id = fmt::format("live-{:06}", ++counter_);
    std::error_code ec;
    if (!sessions_.contains(id) && !fs::exists(session_file(id), ec)) return id;
  }
}

fs::path SessionService::session_file(const std::string& id) const { return corpus_dir_ / (id + ".jsonl"); }

ServiceResponse SessionService::create(std::string_view body) {
  auto j = parse_body(body);
  if (!j) return error(400, "malformed JSON");
  if (!j->is_object()) return invalid({{"body", "must be an object"}});

  ParticipantMeta meta;
  std::vector<Violation> bad;
  for (const auto& [key, value] : j->items()) {
    if (key != "age" && key != "gender" && key != "target_emotion") bad.push_back({key, "unknown field"});
  }
  if (!j->contains("age") || !is_int((*j)["age"])) {
    bad.push_back({"age", "required integer"});
  } else {
    meta.age = (*j)["age"].get<int>();
  }
  const auto gender = j->contains("gender") && (*j)["gender"].is_string()
                          ? parse_gender((*j)["gender"].get<std::string>())
                          : std::nullopt;
  if (!gender) {
    bad.push_back({"gender", "must be one of male, female, other"});
  } else {
    meta.gender = *gender;
  }
  if (j->contains("target_emotion") && !(*j)["target_emotion"].is_null()) {
    const auto& t = (*j)["target_emotion"];
    auto e = t.is_string() ? parse_emotion(t.get<std::string>()) : std::nullopt;
    if (!e) {
      bad.push_back({"target_emotion", "unknown emotion"});
    } else {
      meta.target_emotion = *e;
    }
  }
  if (j->contains("age") && is_int((*j)["age"])) {
    for (auto& v : validate_meta(meta)) {
      if (v.field != "meta.session_id") bad.push_back(std::move(v));
    }
  }
  if (!bad.empty()) return invalid(bad);

  auto live = std::make_shared<Live>();
  std::string id;
  {
    std::lock_guard lock(mu_);
    id = next_id();
    meta.session_id = id;
    live->recording.meta = std::move(meta);
    sessions_.emplace(id, live);
  }
  return reply(201, json{{"session_id", id}, {"state", to_string(SessionState::created)}});
}

ServiceResponse SessionService::start(const std::string& id) {
  auto live = find(id);
  if (!live) return error(404, "unknown session " + id);
  std::lock_guard lock(live->mu);
  if (live->state != SessionState::created) return wrong_state(live->state);
  live->state = SessionState::warming_up;
  return reply(200, json{{"session_id", id}, {"state", to_string(live->state)}});
}

ServiceResponse SessionService::add_samples(const std::string& id, std::string_view body) {
  auto live = find(id);
  if (!live) return error(404, "unknown session " + id);
  std::lock_guard lock(live->mu);
  if (live->state != SessionState::warming_up && live->state != SessionState::recording) {
    return wrong_state(live->state);
  }
  auto j = parse_body(body);
  if (!j) return error(400, "malformed JSON");
  if (!j->is_array()) return invalid({{"body", "must be an array of samples"}});

  // Validate the whole batch before touching the session.
  std::vector<SensorSample> batch;
  std::vector<Violation> bad;
  for (std::size_t i = 0; i < j->size(); ++i) {
    auto parsed = sample_from_json((*j)[i], i);
    if (auto* v = std::get_if<std::vector<Violation>>(&parsed)) {
      bad.insert(bad.end(), v->begin(), v->end());
    } else {
      batch.push_back(std::get<SensorSample>(parsed));
    }
  }
  if (!bad.empty()) return invalid(bad);

  auto& samples = live->recording.samples;
  std::size_t accepted = 0, dropped = 0;
  for (const auto& s : batch) {
    if (!samples.empty() && s.t_ms <= samples.back().t_ms) {
      ++dropped;
      continue;
    }
    samples.push_back(s);
    ++accepted;
    if (live->state == SessionState::warming_up && s.hr_bpm && *s.hr_bpm > 0) {
      live->state = SessionState::recording;
    }
  }
  return reply(200, json{{"accepted", accepted}, {"dropped", dropped}, {"state", to_string(live->state)}});
}

ServiceResponse SessionService::stop(const std::string& id) {
  auto live = find(id);
  if (!live) return error(404, "unknown session " + id);
  std::lock_guard lock(live->mu);
  if (live->state != SessionState::recording) return wrong_state(live->state);
  live->state = SessionState::awaiting_assessment;
  return reply(200, json{{"session_id", id}, {"state", to_string(live->state)}});
}

ServiceResponse SessionService::submit_assessment(const std::string& id, std::string_view body) {
  auto live = find(id);
  if (!live) return error(404, "unknown session " + id);
  std::lock_guard lock(live->mu);
  if (live->state != SessionState::awaiting_assessment) return wrong_state(live->state);
  auto j = parse_body(body);
  if (!j) return error(400, "malformed JSON");
  if (!j->is_object()) return invalid({{"body", "must be an object"}});

  SelfAssessment a;
  std::vector<Violation> bad;
  for (const auto& [key, value] : j->items()) {
    if (key != "valence" && key != "arousal" && key != "emotion") bad.push_back({key, "unknown field"});
  }
  for (const char* key : {"valence", "arousal"}) {
    if (!j->contains(key) || !is_int((*j)[key])) {
      bad.push_back({key, "required integer"});
    } else {
      (std::string_view(key) == "valence" ? a.valence : a.arousal) = (*j)[key].get<int>();
    }
  }
  const auto emotion = j->contains("emotion") && (*j)["emotion"].is_string()
                           ? parse_emotion((*j)["emotion"].get<std::string>())
                           : std::nullopt;
  if (!emotion) {
    bad.push_back({"emotion", "unknown emotion"});
  } else {
    a.emotion = *emotion;
  }
  // Fields that failed to parse keep in-range defaults, so this only adds range errors.
  for (auto& v : validate_assessment(a)) bad.push_back(std::move(v));
  if (!bad.empty()) return invalid(bad);

  SessionRecording done = live->recording;
  done.assessment = a;
  try {
    fs::create_directories(corpus_dir_);
    write_session_file(done, session_file(id));
  } catch (const std::exception& e) {
    return error(500, std::string("could not persist session: ") + e.what());
  }
  live->recording = std::move(done);
  live->state = SessionState::finished;
  return {204, ""};
}

ServiceResponse SessionService::get(const std::string& id) const {
  auto live = find(id);
  if (!live) return error(404, "unknown session " + id);
  std::lock_guard lock(live->mu);
  const auto& r = live->recording;
  std::size_t hr = 0;
  for (const auto& s : r.samples) hr += s.hr_bpm.has_value();
  json out = {{"session_id", id},
              {"state", to_string(live->state)},
              {"age", r.meta.age},
              {"gender", to_string(r.meta.gender)},
              {"samples", r.samples.size()},
              {"hr_samples", hr}};
  if (live->state == SessionState::finished) {
    if (r.meta.target_emotion) out["target_emotion"] = to_string(*r.meta.target_emotion);
    if (r.assessment) {
      out["assessment"] = {{"valence", r.assessment->valence},
                           {"arousal", r.assessment->arousal},
                           {"emotion", to_string(r.assessment->emotion)}};
    }
  }
  return reply(200, out);
}

ServiceResponse SessionService::prediction(const std::string& id, std::string_view path) const {
  auto live = find(id);
  if (!live) return error(404, "unknown session " + id);
  const auto parsed = parse_flavor(path);
  if (!parsed) return invalid({{"path", "must be statistical or nonstatistical"}});
  const DatasetFlavor flavor = *parsed;
  if (!model_) return error(503, "no model loaded");

  SessionRecording snapshot;
  {
    std::lock_guard lock(live->mu);
    if (live->state != SessionState::finished && live->state != SessionState::recording) {
      return wrong_state(live->state);
    }
    snapshot = live->recording;
  }
  try {
    const auto p = predict_session(*model_, snapshot, flavor);
    return reply(200, json{{"mood", to_string(p.mood)},
                           {"probability", p.probability},
                           {"features_used", p.features_used},
                           {"path", to_string(flavor)}});
  } catch (const InsufficientDataError&) {
    return error(409, "insufficient data");
  } catch (const ShapeError& e) {
    return error(422, std::string("model does not fit this path: ") + e.what());
  }
}

ServiceResponse SessionService::health() const {
  std::size_t n;
  {
    std::lock_guard lock(mu_);
    n = sessions_.size();
  }
  json out = {{"status", "ok"}, {"sessions", n}, {"model_loaded", model_.has_value()}};
  if (model_) {
    out["model"] = {{"kind", to_string(model_->kind)}, {"feature_set", model_->feature_set},
                    {"flavor", to_string(model_->flavor)}};
  }
  return reply(200, out);
}

std::optional<SessionRecording> SessionService::recording(const std::string& id) const {
  auto live = find(id);
  if (!live) return std::nullopt;
  std::lock_guard lock(live->mu);
  return live->recording;
}

std::optional<SessionState> SessionService::state(const std::string& id) const {
  auto live = find(id);
  if (!live) return std::nullopt;
  std::lock_guard lock(live->mu);
  return live->state;
}

void apply_env_overrides(ServiceConfig& config) {
  if (const char* v = std::getenv("EMOWATCH_PORT"); v && *v) {
    char* end = nullptr;
    const long port = std::strtol(v, &end, 10);
    if (*end != '\0' || port < 0 || port > 65535) throw SpecError(fmt::format("bad EMOWATCH_PORT \"{}\"", v));
    config.port = static_cast<int>(port);
  }
  if (const char* v = std::getenv("EMOWATCH_HOST"); v && *v) config.host = v;
  if (const char* v = std::getenv("EMOWATCH_CORPUS_DIR"); v && *v) config.corpus_dir = v;
  if (const char* v = std::getenv("EMOWATCH_MODEL"); v && *v) config.model_file = fs::path(v);
}

struct HttpServer::Impl {
  httplib::Server server;
  SessionService& service;
  std::string origin;

  Impl(SessionService& s, std::string o) : service(s), origin(std::move(o)) {}

  void send(httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    if (!r.body.empty()) res.set_content(r.body, "application/json");
  }
};

HttpServer::HttpServer(SessionService& service, std::string cors_origin)
    : impl_(std::make_unique<Impl>(service, std::move(cors_origin))) {
  auto& srv = impl_->server;
  Impl* impl = impl_.get();

  srv.set_default_headers({{"Access-Control-Allow-Origin", impl->origin},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv.Get("/health", [impl](const httplib::Request&, httplib::Response& res) {
    impl->send(res, impl->service.health());
  });
  srv.Post("/sessions", [impl](const httplib::Request& req, httplib::Response& res) {
    impl->send(res, impl->service.create(req.body));
  });
  srv.Post(R"(/sessions/([^/]+)/start)", [impl](const httplib::Request& req, httplib::Response& res) {
    impl->send(res, impl->service.start(req.matches[1]));
  });
  srv.Post(R"(/sessions/([^/]+)/samples)", [impl](const httplib::Request& req, httplib::Response& res) {
    impl->send(res, impl->service.add_samples(req.matches[1], req.body));
  });
  srv.Post(R"(/sessions/([^/]+)/stop)", [impl](const httplib::Request& req, httplib::Response& res) {
    impl->send(res, impl->service.stop(req.matches[1]));
  });
  srv.Post(R"(/sessions/([^/]+)/assessment)", [impl](const httplib::Request& req, httplib::Response& res) {
    impl->send(res, impl->service.submit_assessment(req.matches[1], req.body));
  });
  srv.Get(R"(/sessions/([^/]+)/prediction)", [impl](const httplib::Request& req, httplib::Response& res) {
    const std::string path = req.has_param("path") ? req.get_param_value("path") : "statistical";
    impl->send(res, impl->service.prediction(req.matches[1], path));
  });
  srv.Get(R"(/sessions/([^/]+))", [impl](const httplib::Request& req, httplib::Response& res) {
    impl->send(res, impl->service.get(req.matches[1]));
  });
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(json{{"error", what}}.dump(), "application/json");
  });
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) res.set_content(json{{"error", fmt::format("HTTP {}", res.status)}}.dump(), "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(fmt::format("cannot bind {}:{}", host, port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace emowatch
