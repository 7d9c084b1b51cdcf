#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "coach/server/frames.hpp"

namespace coach::server {

class ServerError : public Error {
 public:
  using Error::Error;
};

struct ServerConfig {
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 8080;               // 0 picks a free port
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path log_path = "logs/sessions.jsonl";
  std::filesystem::path replay_corpus;     // generic replay for adaptive sessions; optional
  std::filesystem::path script_path;       // empty: bundled script
  std::string backend = "stub";            // default when a request names none
  llm::RemoteConfig remote;
  std::string auth_token_env = "COACH_API_TOKEN";  // unset or empty: no auth
  std::string allow_origin = "*";
  dialogue::SessionConfig session;         // defaults for new sessions
  policy::OnlineConfig online;
  TextOnlyModel text_only;
  int io_threads = 2;
  std::uint64_t seed = 0;
};

enum class SessionState { Created, Running, Completed, Terminated };
std::string_view to_string(SessionState s);

struct SessionHandle {
  std::string session_id;
  std::string coachee_id;
  SessionState state = SessionState::Created;
  std::optional<dialogue::Termination> reason;  // set once terminated or completed
  double created_at = 0.0;                      // unix seconds
};

nlohmann::json to_json(const SessionHandle& h);

/// HTTP + WebSocket front end for live sessions.
///   POST /sessions              create (201), 400 malformed, 404 unknown checkpoint, 409 coachee busy
///   GET  /sessions/{id}         handle
///   GET  /sessions/{id}/log     stored JSONL (409 while not finished, 404 unknown)
///   GET  /healthz
///   WS   /sessions/{id}/stream  session frames
class Server {
 public:
  explicit Server(ServerConfig config);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts serving on background threads.
  void start();
  std::uint16_t port() const;
  /// Ends live sessions (client-disconnect), stops accepting and joins threads.
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

  std::optional<SessionHandle> handle(const std::string& id) const;

 struct Impl;  // defined in server.cpp

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace coach::server
