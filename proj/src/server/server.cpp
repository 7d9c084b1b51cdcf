#include "coach/server/server.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include <boost/asio/dispatch.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "coach/core/log.hpp"
#include "coach/store/checkpoint.hpp"
#include "coach/store/records.hpp"

namespace coach::server {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::Created: return "created";
    case SessionState::Running: return "running";
    case SessionState::Completed: return "completed";
    case SessionState::Terminated: return "terminated";
  }
  return "?";
}

json to_json(const SessionHandle& h) {
  json j = {{"session_id", h.session_id},
            {"coachee_id", h.coachee_id},
            {"state", to_string(h.state)},
            {"created_at", h.created_at},
            {"stream", "/sessions/" + h.session_id + "/stream"}};
  j["reason"] = h.reason ? json(dialogue::to_string(*h.reason)) : json(nullptr);
  return j;
}

namespace {

double unix_now() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

bool valid_id(std::string_view s) {
  if (s.empty() || s.size() > 64) return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  }
  return true;
}

struct HttpFailure {
  http::status status;
  std::string message;
};

struct SessionEntry {
  SessionHandle handle;  // guarded by the registry mutex
  dialogue::SessionConfig config;
  bool adaptive = false;
  std::string backend;
  policy::PolicyCheckpoint checkpoint;
  std::vector<std::string> log_lines;
  std::thread runner;
};

class WsSession;

}  // namespace

struct Server::Impl {
  ServerConfig config;
  dialogue::Script script;
  net::io_context ioc;
  std::optional<tcp::acceptor> acceptor;
  std::optional<net::executor_work_guard<net::io_context::executor_type>> work;
  std::vector<std::thread> io_threads;
  std::uint16_t bound_port = 0;

  mutable std::mutex mu;
  std::map<std::string, std::shared_ptr<SessionEntry>> sessions;
  std::set<std::string> busy_coachees;
  std::shared_ptr<const std::vector<Transition>> replay;
  std::mt19937_64 id_rng{std::random_device{}()};
  std::uint64_t counter = 0;
  std::mutex checkpoint_mu;

  std::atomic<bool> stopping{false};
  std::mutex stop_mu;
  std::condition_variable stop_cv;
  bool stopped = false;

  explicit Impl(ServerConfig c) : config(std::move(c)) {
    script = config.script_path.empty() ? dialogue::default_script() : dialogue::load_script(config.script_path);
    if (!config.replay_corpus.empty()) {
      replay = std::make_shared<const std::vector<Transition>>(store::read_transitions(config.replay_corpus));
    }
    config.session.validate();
  }

  std::optional<std::string> auth_token() const {
    if (config.auth_token_env.empty()) return std::nullopt;
    const char* v = std::getenv(config.auth_token_env.c_str());
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  }

  template <class Body>
  bool authorised(const http::request<Body>& req, std::string_view query) const {
    const auto token = auth_token();
    if (!token) return true;
    if (req[http::field::authorization] == "Bearer " + *token) return true;
    // browsers cannot set headers on WebSocket upgrades
    const std::string q = "token=" + *token;
    std::size_t pos = 0;
    while ((pos = query.find(q, pos)) != std::string_view::npos) {
      const bool start = pos == 0 || query[pos - 1] == '&';
      const bool end = pos + q.size() == query.size() || query[pos + q.size()] == '&';
      if (start && end) return true;
      ++pos;
    }
    return false;
  }

  std::string new_id() {
    std::lock_guard lock(mu);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%012llx%04llx", static_cast<unsigned long long>(id_rng() & 0xFFFFFFFFFFFFULL),
                  static_cast<unsigned long long>(++counter & 0xFFFF));
    return buf;
  }

  std::filesystem::path coachee_checkpoint(const std::string& coachee) const {
    return config.checkpoint_dir / "coachees" / (coachee + ".ckpt");
  }

  json create(const std::string& body) {
    json req;
    try {
      req = json::parse(body);
    } catch (const json::exception&) {
      throw HttpFailure{http::status::bad_request, "request body is not valid JSON"};
    }
    if (!req.is_object()) throw HttpFailure{http::status::bad_request, "request body must be a JSON object"};
    auto str = [&](const char* key, std::optional<std::string> def) -> std::string {
      const auto it = req.find(key);
      if (it == req.end() || it->is_null()) {
        if (def) return *def;
        throw HttpFailure{http::status::bad_request, std::string("missing field '") + key + "'"};
      }
      if (!it->is_string()) throw HttpFailure{http::status::bad_request, std::string("field '") + key + "' must be a string"};
      return it->get<std::string>();
    };

    auto entry = std::make_shared<SessionEntry>();
    entry->config = config.session;
    const auto coachee = str("coachee_id", std::nullopt);
    if (!valid_id(coachee)) {
      throw HttpFailure{http::status::bad_request, "coachee_id must be 1-64 letters, digits, '-' or '_'"};
    }
    try {
      entry->config.exercise = parse_exercise(str("exercise", std::nullopt));
    } catch (const InvalidArgument& e) {
      throw HttpFailure{http::status::bad_request, e.what()};
    }
    const auto mode = str("mode", std::string("adaptive"));
    if (mode != "adaptive" && mode != "generic") {
      throw HttpFailure{http::status::bad_request, "unknown mode '" + mode + "' (expected adaptive or generic)"};
    }
    entry->adaptive = mode == "adaptive";
    entry->backend = str("backend", config.backend);
    if (entry->backend != "stub" && entry->backend != "remote") {
      throw HttpFailure{http::status::bad_request, "unknown backend '" + entry->backend + "' (expected stub or remote)"};
    }
    try {
      if (auto it = req.find("session_index"); it != req.end()) entry->config.session_index = it->get<int>();
      if (auto it = req.find("turn_limit"); it != req.end()) entry->config.turn_limit = it->get<int>();
      if (auto it = req.find("seed"); it != req.end()) entry->config.seed = it->get<std::uint64_t>();
      if (auto it = req.find("debug"); it != req.end()) entry->config.decision_trace = it->get<bool>();
      entry->config.coachee_id = coachee;
      entry->config.validate();
    } catch (const json::exception& e) {
      throw HttpFailure{http::status::bad_request, std::string("invalid field: ") + e.what()};
    } catch (const dialogue::SessionError& e) {
      throw HttpFailure{http::status::bad_request, e.what()};
    }

    const auto ck_name = str("checkpoint", std::string("generic"));
    if (!valid_id(ck_name)) throw HttpFailure{http::status::bad_request, "invalid checkpoint name"};
    const auto ck_path = config.checkpoint_dir / (ck_name + ".ckpt");
    if (!std::filesystem::exists(ck_path)) {
      throw HttpFailure{http::status::not_found, "unknown checkpoint '" + ck_name + "'"};
    }
    try {
      std::lock_guard lock(checkpoint_mu);
      const auto personal = coachee_checkpoint(coachee);
      if (entry->adaptive && std::filesystem::exists(personal)) {
        entry->checkpoint = store::load_checkpoint(personal);
      } else {
        entry->checkpoint = store::load_checkpoint(ck_path);
        if (entry->adaptive) {
          if (entry->checkpoint.coachee_id) entry->checkpoint.coachee_id.reset();
          entry->checkpoint = policy::fork_for_coachee(entry->checkpoint, coachee);
        }
      }
    } catch (const StoreError& e) {
      throw HttpFailure{http::status::internal_server_error, std::string("checkpoint unreadable: ") + e.what()};
    }

    const auto id = new_id();
    entry->config.session_id = id;
    entry->handle = {id, coachee, SessionState::Created, std::nullopt, unix_now()};
    std::lock_guard lock(mu);
    if (entry->adaptive && busy_coachees.count(coachee)) {
      throw HttpFailure{http::status::conflict, "coachee '" + coachee + "' already has an adaptive session in progress"};
    }
    if (entry->adaptive) busy_coachees.insert(coachee);
    sessions[id] = entry;
    return to_json(entry->handle);
  }

  std::shared_ptr<SessionEntry> find(const std::string& id) const {
    std::lock_guard lock(mu);
    const auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  // Runs on the session's own thread.
  void run_entry(const std::shared_ptr<SessionEntry>& entry, const std::shared_ptr<WsSession>& ws);

  void finish(const std::shared_ptr<SessionEntry>& entry, const dialogue::SessionLog& log) {
    std::vector<std::string> lines = store::session_log_lines(log);
    try {
      store::append_session_log(config.log_path, log);
    } catch (const std::exception& e) {
      log_error(std::string("could not persist session log: ") + e.what());
    }
    std::lock_guard lock(mu);
    entry->log_lines = std::move(lines);
    entry->handle.reason = log.termination;
    entry->handle.state =
        log.termination == dialogue::Termination::Completed ? SessionState::Completed : SessionState::Terminated;
    if (entry->adaptive) busy_coachees.erase(entry->handle.coachee_id);
  }
};

namespace {

/// One WebSocket connection. Socket work happens on the strand; the session
/// runner thread talks to it through post() and the guarded inbox.
class WsSession : public std::enable_shared_from_this<WsSession>, public dialogue::CoacheeChannel {
 public:
  WsSession(tcp::socket&& socket, Server::Impl& server, std::shared_ptr<SessionEntry> entry)
      : ws_(std::move(socket)), server_(server), entry_(std::move(entry)) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

  // CoacheeChannel, called from the runner thread
  void send(const dialogue::SessionEvent& e) override {
    if (e.kind == dialogue::SessionEvent::Kind::AwaitingInput) {
      std::lock_guard lock(mu_);
      awaiting_ = true;
      await_started_ = std::chrono::steady_clock::now();
    }
    if (e.kind == dialogue::SessionEvent::Kind::SessionEnd) {
      std::lock_guard lock(mu_);
      awaiting_ = false;
      ended_ = true;
    }
    write(event_frame(e).dump());
  }

  std::optional<dialogue::CoacheeTurnInput> poll() override {
    std::lock_guard lock(mu_);
    if (inbox_.empty()) return std::nullopt;
    auto in = std::move(inbox_.front());
    inbox_.pop_front();
    return in;
  }

  bool connected() const override { return connected_ && !server_.stopping; }

  void write(std::string frame) {
    net::post(ws_.get_executor(), [self = shared_from_this(), f = std::move(frame)]() mutable {
      self->queue_.push_back(std::move(f));
      if (self->queue_.size() == 1) self->do_write();
    });
  }

  void close() {
    net::post(ws_.get_executor(), [self = shared_from_this()] {
      self->closing_ = true;
      if (self->queue_.empty()) self->do_close();
    });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) {
      connected_ = false;
      return;
    }
    bool start = false;
    {
      std::lock_guard lock(server_.mu);
      if (entry_->handle.state == SessionState::Created && !server_.stopping) {
        entry_->handle.state = SessionState::Running;
        start = true;
      }
    }
    do_read();
    if (!start) {
      write(error_frame("session " + entry_->handle.session_id + " is not open for streaming").dump());
      close();
      return;
    }
    auto self = shared_from_this();
    entry_->runner = std::thread([this, self] { server_.run_entry(entry_, self); });
  }

  void do_read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      connected_ = false;
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    try {
      const auto u = parse_client_frame(text);
      std::lock_guard lock(mu_);
      if (ended_) throw ProtocolError("session is not running");
      if (!awaiting_) throw ProtocolError("not awaiting input");
      const double latency =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - await_started_).count();
      inbox_.push_back(to_turn_input(u, server_.config.text_only, latency));
      awaiting_ = false;
    } catch (const ProtocolError& e) {
      queue_.push_back(error_frame(e.what()).dump());
      if (queue_.size() == 1) do_write();
    }
    do_read();
  }

  void do_write() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()), beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      connected_ = false;
      queue_.clear();
      return;
    }
    queue_.pop_front();
    if (!queue_.empty()) {
      do_write();
    } else if (closing_) {
      do_close();
    }
  }

  void do_close() {
    if (close_sent_) return;
    close_sent_ = true;
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {
      self->connected_ = false;
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;  // strand only
  bool closing_ = false;
  bool close_sent_ = false;
  Server::Impl& server_;
  std::shared_ptr<SessionEntry> entry_;

  std::mutex mu_;
  std::deque<dialogue::CoacheeTurnInput> inbox_;
  bool awaiting_ = false;
  bool ended_ = false;
  std::chrono::steady_clock::time_point await_started_;
  std::atomic<bool> connected_{true};
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, Server::Impl& server) : stream_(std::move(socket)), server_(server) {}

  void run() {
    net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::do_read, shared_from_this()));
  }

 private:
  using Response = http::response<http::string_body>;

  void do_read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;

    const std::string target(req_.target());
    const auto q = target.find('?');
    const std::string path = target.substr(0, q);
    const std::string query = q == std::string::npos ? "" : target.substr(q + 1);

    if (websocket::is_upgrade(req_)) {
      upgrade(path, query);
      return;
    }
    send(handle(path, query));
  }

  void upgrade(const std::string& path, const std::string& query) {
    const std::string prefix = "/sessions/", suffix = "/stream";
    std::shared_ptr<SessionEntry> entry;
    if (path.size() > prefix.size() + suffix.size() && path.rfind(prefix, 0) == 0 &&
        path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0) {
      entry = server_.find(path.substr(prefix.size(), path.size() - prefix.size() - suffix.size()));
    }
    if (!server_.authorised(req_, query)) {
      send(error(http::status::unauthorized, "missing or invalid token"));
      return;
    }
    if (!entry) {
      send(error(http::status::not_found, "unknown session"));
      return;
    }
    stream_.expires_never();
    std::make_shared<WsSession>(stream_.release_socket(), server_, entry)->run(std::move(req_));
  }

  Response json_response(http::status status, const json& body) {
    Response res{status, req_.version()};
    res.set(http::field::content_type, "application/json");
    res.body() = body.dump();
    return res;
  }

  Response error(http::status status, const std::string& message) {
    return json_response(status, {{"error", message}, {"status", static_cast<int>(status)}});
  }

  Response handle(const std::string& path, const std::string& query) {
    const auto method = req_.method();
    if (method == http::verb::options) {
      Response res{http::status::no_content, req_.version()};
      res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
      res.set(http::field::access_control_allow_headers, "Content-Type, Authorization");
      return res;
    }
    if (path == "/healthz" && method == http::verb::get) return json_response(http::status::ok, {{"status", "ok"}});
    if (!server_.authorised(req_, query)) return error(http::status::unauthorized, "missing or invalid token");

    if (path == "/sessions") {
      if (method != http::verb::post) return error(http::status::method_not_allowed, "use POST");
      try {
        return json_response(http::status::created, server_.create(req_.body()));
      } catch (const HttpFailure& f) {
        return error(f.status, f.message);
      }
    }
    const std::string prefix = "/sessions/";
    if (path.rfind(prefix, 0) == 0 && method == http::verb::get) {
      std::string rest = path.substr(prefix.size());
      const bool want_log = rest.size() > 4 && rest.compare(rest.size() - 4, 4, "/log") == 0;
      if (want_log) rest.resize(rest.size() - 4);
      const auto entry = server_.find(rest);
      if (!entry) return error(http::status::not_found, "unknown session '" + rest + "'");
      std::lock_guard lock(server_.mu);
      if (!want_log) return json_response(http::status::ok, to_json(entry->handle));
      if (entry->handle.state == SessionState::Created || entry->handle.state == SessionState::Running) {
        return error(http::status::conflict, "session is " + std::string(to_string(entry->handle.state)));
      }
      Response res{http::status::ok, req_.version()};
      res.set(http::field::content_type, "application/x-ndjson");
      for (const auto& l : entry->log_lines) res.body() += l + "\n";
      return res;
    }
    return error(http::status::not_found, "no route for " + path);
  }

  void send(Response res) {
    res.set(http::field::server, "coach");
    res.set(http::field::access_control_allow_origin, server_.config.allow_origin);
    res.keep_alive(req_.keep_alive());
    res.prepare_payload();
    auto sp = std::make_shared<Response>(std::move(res));
    http::async_write(stream_, *sp, [self = shared_from_this(), sp](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!sp->keep_alive()) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
      }
      self->do_read();
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  Server::Impl& server_;
};

void do_accept(Server::Impl& server) {
  server.acceptor->async_accept(net::make_strand(server.ioc), [&server](beast::error_code ec, tcp::socket socket) {
    if (ec) {
      if (ec != net::error::operation_aborted) log_warning("accept failed: " + ec.message());
      if (server.stopping) return;
    } else {
      std::make_shared<HttpSession>(std::move(socket), server)->run();
    }
    if (!server.stopping) do_accept(server);
  });
}

}  // namespace

void Server::Impl::run_entry(const std::shared_ptr<SessionEntry>& entry, const std::shared_ptr<WsSession>& ws) {
  dialogue::SessionLog log;
  try {
    auto llm = llm::make_backend(entry->backend, config.remote, entry->config.seed);
    dialogue::SteadyClock clock;
    const int index = entry->config.session_index;
    if (entry->adaptive) {
      policy::OnlineLearner learner(entry->checkpoint, replay, config.online, entry->config.seed);
      dialogue::AdaptivePolicy policy(learner, index);
      log = dialogue::run_session(entry->config, script, *ws, policy, *llm, clock);
      std::lock_guard lock(checkpoint_mu);
      store::save_checkpoint(coachee_checkpoint(entry->handle.coachee_id), learner.checkpoint());
    } else {
      dialogue::FrozenPolicy policy(entry->checkpoint, config.online.epsilon_for(index));
      log = dialogue::run_session(entry->config, script, *ws, policy, *llm, clock);
    }
  } catch (const std::exception& e) {
    log_error("session " + entry->handle.session_id + " failed: " + e.what());
    log.session_id = entry->handle.session_id;
    log.coachee_id = entry->handle.coachee_id;
    log.exercise = entry->config.exercise;
    log.session_index = entry->config.session_index;
    log.mode = entry->adaptive ? "adaptive" : "generic";
    log.seed = entry->config.seed;
    log.turn_limit = entry->config.turn_limit;
    log.termination = dialogue::Termination::Error;
    log.error = e.what();
    dialogue::SessionEvent end;
    end.kind = dialogue::SessionEvent::Kind::SessionEnd;
    end.reason = dialogue::Termination::Error;
    ws->send(end);
  }
  finish(entry, log);
  ws->close();
}

Server::Server(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Server::~Server() {
  try {
    stop();
  } catch (...) {
  }
}

void Server::start() {
  auto& s = *impl_;
  if (s.acceptor) throw ServerError("server already started");
  beast::error_code ec;
  const auto address = net::ip::make_address(s.config.bind_address, ec);
  if (ec) throw ServerError("invalid bind address '" + s.config.bind_address + "'");
  const tcp::endpoint endpoint{address, s.config.port};
  s.acceptor.emplace(s.ioc);
  s.acceptor->open(endpoint.protocol(), ec);
  if (!ec) s.acceptor->set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) s.acceptor->bind(endpoint, ec);
  if (!ec) s.acceptor->listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw ServerError("cannot listen on " + s.config.bind_address + ":" + std::to_string(s.config.port) + ": " + ec.message());
  s.bound_port = s.acceptor->local_endpoint().port();
  s.work.emplace(net::make_work_guard(s.ioc));
  do_accept(s);
  for (int i = 0; i < std::max(1, s.config.io_threads); ++i) s.io_threads.emplace_back([&s] { s.ioc.run(); });
  log_info("listening on " + s.config.bind_address + ":" + std::to_string(s.bound_port));
}

std::uint16_t Server::port() const { return impl_->bound_port; }

void Server::stop() {
  auto& s = *impl_;
  if (s.stopping.exchange(true)) return;
  if (s.acceptor) {
    net::post(s.ioc, [&s] {
      beast::error_code ec;
      s.acceptor->close(ec);
    });
  }
  // live sessions see a disconnect at their next tick
  std::vector<std::shared_ptr<SessionEntry>> entries;
  {
    std::lock_guard lock(s.mu);
    for (auto& [id, e] : s.sessions) entries.push_back(e);
  }
  for (auto& e : entries) {
    if (e->runner.joinable()) e->runner.join();
  }
  s.work.reset();
  s.ioc.stop();
  for (auto& t : s.io_threads) {
    if (t.joinable()) t.join();
  }
  {
    std::lock_guard lock(s.stop_mu);
    s.stopped = true;
  }
  s.stop_cv.notify_all();
}

void Server::wait() {
  std::unique_lock lock(impl_->stop_mu);
  impl_->stop_cv.wait(lock, [this] { return impl_->stopped; });
}

std::optional<SessionHandle> Server::handle(const std::string& id) const {
  std::lock_guard lock(impl_->mu);
  const auto it = impl_->sessions.find(id);
  if (it == impl_->sessions.end()) return std::nullopt;
  return it->second->handle;
}

}  // namespace coach::server
