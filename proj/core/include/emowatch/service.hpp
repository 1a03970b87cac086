#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "emowatch/models.hpp"
#include "emowatch/types.hpp"

namespace emowatch {

enum class SessionState { created, warming_up, recording, awaiting_assessment, finished };

std::string_view to_string(SessionState s) noexcept;

struct ServiceResponse {
  int status = 200;
  std::string body;  // JSON, empty for 204
};

// Transport-free session lifecycle. Every method takes and returns JSON text
// so the HTTP layer is a thin router. Safe to call from many threads;
// requests against one session are serialized.
class SessionService {
 public:
  explicit SessionService(std::filesystem::path corpus_dir,
                          std::optional<TrainedModel> model = std::nullopt);

  ServiceResponse create(std::string_view body);
  ServiceResponse start(const std::string& id);
  ServiceResponse add_samples(const std::string& id, std::string_view body);
  ServiceResponse stop(const std::string& id);
  ServiceResponse submit_assessment(const std::string& id, std::string_view body);
  ServiceResponse get(const std::string& id) const;
  // path is "statistical" (default) or "nonstatistical".
  ServiceResponse prediction(const std::string& id, std::string_view path = "statistical") const;
  ServiceResponse health() const;

  // Snapshot of the in-memory recording, for tests and tooling.
  std::optional<SessionRecording> recording(const std::string& id) const;
  std::optional<SessionState> state(const std::string& id) const;
  std::filesystem::path session_file(const std::string& id) const;

 private:
  struct Live {
    mutable std::mutex mu;
    SessionState state = SessionState::created;
    SessionRecording recording;
  };

  std::shared_ptr<Live> find(const std::string& id) const;
  std::string next_id();

  std::filesystem::path corpus_dir_;
  std::optional<TrainedModel> model_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Live>> sessions_;
  std::uint64_t counter_ = 0;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path corpus_dir = "corpus";
  std::optional<std::filesystem::path> model_file;
  std::string cors_origin = "*";
};

// EMOWATCH_PORT, EMOWATCH_HOST, EMOWATCH_CORPUS_DIR and EMOWATCH_MODEL
// replace the matching fields when set.
void apply_env_overrides(ServiceConfig& config);

class HttpServer {
 public:
  HttpServer(SessionService& service, std::string cors_origin = "*");
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 binds an ephemeral port. Returns the bound port; throws Error on failure.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace emowatch
