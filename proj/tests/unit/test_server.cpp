#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>
#include <unistd.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "httplib.h"
#include "json.hpp"

#include "dialogue_fixtures.hpp"

#include "coach/server/server.hpp"
#include "coach/store/checkpoint.hpp"
#include "coach/store/records.hpp"

using namespace coach;
using namespace coach::server;
using nlohmann::json;
namespace fs = std::filesystem;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;

namespace {

class WsClient {
 public:
  WsClient(std::uint16_t port, const std::string& target) {
    net::ip::tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1:" + std::to_string(port), target);
  }

  json read() {
    beast::flat_buffer b;
    ws_.read(b);
    return json::parse(beast::buffers_to_string(b.data()));
  }

  void send(const std::string& text) { ws_.write(net::buffer(text)); }
  void answer(const std::string& text) { send(json{{"v", 1}, {"type", "coachee_utterance"}, {"text", text}}.dump()); }

  void close() {
    beast::error_code ec;
    ws_.next_layer().shutdown(net::ip::tcp::socket::shutdown_both, ec);
    ws_.next_layer().close(ec);
  }

 private:
  net::io_context ioc_;
  websocket::stream<net::ip::tcp::socket> ws_{ioc_};
};

struct Rig {
  fs::path dir;
  std::unique_ptr<Server> server;
  std::unique_ptr<httplib::Client> http;

  explicit Rig(std::function<void(ServerConfig&)> tweak = {}) {
    static int counter = 0;
    dir = fs::temp_directory_path() / ("coach_server_" + std::to_string(::getpid()) + "_" + std::to_string(++counter));
    fs::create_directories(dir / "ck");
    store::save_checkpoint(dir / "ck" / "generic.ckpt", testing::small_checkpoint(3));
    ServerConfig c;
    c.port = 0;
    c.checkpoint_dir = dir / "ck";
    c.log_path = dir / "logs" / "sessions.jsonl";
    c.auth_token_env = "COACH_TEST_TOKEN_UNSET";
    c.session.tick_rate_hz = 100.0;
    c.session.llm_backoff_s = 0.01;
    if (tweak) tweak(c);
    server = std::make_unique<Server>(c);
    server->start();
    http = std::make_unique<httplib::Client>("127.0.0.1", server->port());
  }

  ~Rig() {
    server->stop();
    fs::remove_all(dir);
  }

  std::string create(json body, int expect = 201) {
    const auto res = http->Post("/sessions", body.dump(), "application/json");
    REQUIRE(res);
    REQUIRE(res->status == expect);
    return json::parse(res->body).value("session_id", "");
  }

  std::unique_ptr<WsClient> connect(const std::string& id) {
    return std::make_unique<WsClient>(server->port(), "/sessions/" + id + "/stream");
  }

  SessionState wait_done(const std::string& id) {
    for (int i = 0; i < 500; ++i) {
      const auto h = server->handle(id);
      if (h && h->state != SessionState::Created && h->state != SessionState::Running) return h->state;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    FAIL("session did not finish");
    return SessionState::Running;
  }
};

/// Answers every awaiting_input with `text` until session_end; returns every frame.
std::vector<json> converse(WsClient& ws, const std::string& text) {
  std::vector<json> frames;
  for (;;) {
    frames.push_back(ws.read());
    const auto& f = frames.back();
    if (f["type"] == "awaiting_input") ws.answer(text + " " + std::to_string(frames.size()));
    if (f["type"] == "session_end") return frames;
  }
}

const json& frame_schema() {
  static const json schema = [] {
    std::ifstream in(fs::path(COACH_DATA_DIR) / "frames.schema.json");
    return json::parse(in);
  }();
  return schema;
}

// Enough of the contract to catch drift: known type, required keys present,
// no undeclared keys, const and enum values respected.
void check_conforms(const json& frame) {
  const auto& defs = frame_schema()["$defs"];
  const auto type = frame.value("type", "");
  INFO(frame.dump());
  REQUIRE(defs.contains(type));
  const auto& def = defs[type];
  for (const auto& key : def["required"]) CHECK(frame.contains(key.get<std::string>()));
  for (const auto& [key, value] : frame.items()) {
    REQUIRE(def["properties"].contains(key));
    auto prop = def["properties"][key];
    if (prop.contains("$ref")) prop = defs[prop["$ref"].get<std::string>().substr(std::string("#/$defs/").size())];
    if (prop.contains("const")) CHECK(value == prop["const"]);
    if (prop.contains("enum")) {
      CHECK(std::find(prop["enum"].begin(), prop["enum"].end(), value) != prop["enum"].end());
    }
  }
}

std::size_t count(const std::vector<json>& frames, const std::string& type) {
  return static_cast<std::size_t>(std::count_if(frames.begin(), frames.end(), [&](const json& f) { return f["type"] == type; }));
}

}  // namespace

TEST_CASE("health and session creation") {
  Rig rig;
  auto res = rig.http->Get("/healthz");
  REQUIRE(res);
  CHECK(res->status == 200);

  res = rig.http->Post("/sessions", R"({"coachee_id":"u1","exercise":"gratitude"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  const auto h = json::parse(res->body);
  CHECK(h["state"] == "created");
  CHECK(h["coachee_id"] == "u1");
  CHECK(h["stream"] == "/sessions/" + h["session_id"].get<std::string>() + "/stream");
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");

  const auto other = rig.create({{"coachee_id", "u2"}, {"exercise", "savouring"}, {"mode", "generic"}});
  CHECK(other != h["session_id"]);

  res = rig.http->Post("/sessions", R"({"coachee_id":"u3","exercise":"juggling"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  const auto msg = json::parse(res->body)["error"].get<std::string>();
  for (const char* name : {"savouring", "gratitude", "accomplishment", "one_door_closes_one_door_opens"}) {
    CHECK(msg.find(name) != std::string::npos);
  }
  rig.create(json::parse("{\"coachee_id\":\"u3\"}"), 400);
  CHECK(rig.http->Post("/sessions", "not json", "application/json")->status == 400);
  rig.create({{"coachee_id", "u3"}, {"exercise", "gratitude"}, {"mode", "sometimes"}}, 400);
  rig.create({{"coachee_id", "u3"}, {"exercise", "gratitude"}, {"checkpoint", "missing"}}, 404);
  // one adaptive session per coachee at a time
  rig.create({{"coachee_id", "u1"}, {"exercise", "gratitude"}}, 409);
  rig.create({{"coachee_id", "u1"}, {"exercise", "gratitude"}, {"mode", "generic"}});

  CHECK(rig.http->Get("/sessions/nope")->status == 404);
  CHECK(rig.http->Get("/sessions/nope/log")->status == 404);
  CHECK(rig.http->Get("/sessions/" + other + "/log")->status == 409);
  CHECK(rig.http->Get("/sessions/" + other)->status == 200);
  CHECK_THROWS(WsClient(rig.server->port(), "/sessions/nope/stream"));
}

TEST_CASE("a full session over the socket") {
  Rig rig;
  const auto id = rig.create({{"coachee_id", "anna"}, {"exercise", "accomplishment"}});
  auto ws = rig.connect(id);
  const auto frames = converse(*ws, "I finished my thesis chapter and felt proud");
  CHECK(count(frames, "awaiting_input") == 10);
  CHECK(std::count_if(frames.begin(), frames.end(), [](const json& f) {
          return f["type"] == "awaiting_input" && f["phase"] == "turn";
        }) == 8);
  CHECK(count(frames, "decision_trace") == 0);
  CHECK(frames.back()["reason"] == "completed");
  for (const auto& f : frames) check_conforms(f);
  CHECK(frame_schema()["version"] == kFrameVersion);
  CHECK(frames.front()["type"] == "coach_utterance");

  CHECK(rig.wait_done(id) == SessionState::Completed);
  const auto handle = json::parse(rig.http->Get("/sessions/" + id)->body);
  CHECK(handle["state"] == "completed");
  CHECK(handle["reason"] == "completed");

  const auto res = rig.http->Get("/sessions/" + id + "/log");
  REQUIRE(res->status == 200);
  std::ifstream in(rig.dir / "logs" / "sessions.jsonl");
  const std::string stored((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(res->body == stored);
  CHECK(std::count(stored.begin(), stored.end(), '\n') == 9);
  const auto logs = store::parse_session_logs(stored, "log");
  REQUIRE(logs.size() == 1);
  CHECK(logs[0].turns.size() == 8);
  CHECK(logs[0].mode == "adaptive");
  CHECK(logs[0].turns[0].speech_duration_s == doctest::Approx(9.0 / 2.5));
  // the client saw exactly the logged coach lines, in order
  std::vector<std::string> seen, logged;
  for (const auto& f : frames) {
    if (f["type"] == "coach_utterance") seen.push_back(f["text"]);
  }
  for (const auto& e : logs[0].transcript) {
    if (e.speaker == dialogue::TranscriptEntry::Speaker::Coach) logged.push_back(e.text);
  }
  CHECK(seen == logged);

  // the personalised checkpoint outlives the session
  const auto personal = rig.dir / "ck" / "coachees" / "anna.ckpt";
  REQUIRE(fs::exists(personal));
  CHECK(store::load_checkpoint(personal).coachee_id == "anna");
  CHECK(store::load_checkpoint(personal).params != testing::small_checkpoint(3).params);
  rig.create({{"coachee_id", "anna"}, {"exercise", "gratitude"}});
}

TEST_CASE("malformed frames get an error frame and the session carries on") {
  Rig rig;
  const auto id = rig.create({{"coachee_id", "u"}, {"exercise", "gratitude"}, {"mode", "generic"}});
  auto ws = rig.connect(id);
  CHECK(ws->read()["type"] == "coach_utterance");
  CHECK(ws->read()["type"] == "awaiting_input");
  ws->send("{not json");
  auto f = ws->read();
  CHECK(f["type"] == "error");
  check_conforms(f);
  check_conforms(json{{"v", 1}, {"type", "coachee_utterance"}, {"text", "hi"}, {"valence", {0.1}}});
  ws->send(R"({"v":1,"type":"coachee_utterance","text":"hi","valence":[3]})");
  CHECK(ws->read()["type"] == "error");
  ws->send(R"({"v":9,"type":"coachee_utterance","text":"hi"})");
  CHECK(ws->read()["type"] == "error");
  ws->answer("Hi I am Kim");
  const auto rest = converse(*ws, "I am grateful for my sister");
  CHECK(rest.back()["reason"] == "completed");
  CHECK_FALSE(fs::exists(rig.dir / "ck" / "coachees" / "u.ckpt"));
}

TEST_CASE("silence gets a reprompt") {
  Rig rig([](ServerConfig& c) { c.session.listen_timeout_s = 0.3; });
  const auto id = rig.create({{"coachee_id", "u"}, {"exercise", "gratitude"}, {"turn_limit", 1}});
  auto ws = rig.connect(id);
  std::vector<json> frames;
  int awaits = 0;
  for (;;) {
    frames.push_back(ws->read());
    const auto& f = frames.back();
    if (f["type"] == "session_end") break;
    if (f["type"] == "awaiting_input" && ++awaits <= 2) ws->answer("I went for a long walk by the river");
    if (f["type"] == "coach_utterance" && f["source"] == "reprompt") ws->answer("Sorry, it was lovely");
  }
  CHECK(frames.back()["reason"] == "completed");
  CHECK(std::count_if(frames.begin(), frames.end(), [](const json& f) { return f.value("source", "") == "reprompt"; }) == 1);
}

TEST_CASE("flagged input ends the session with the refusal") {
  Rig rig;
  const auto id = rig.create({{"coachee_id", "u"}, {"exercise", "gratitude"}});
  auto ws = rig.connect(id);
  std::vector<json> frames;
  int awaits = 0;
  for (;;) {
    frames.push_back(ws->read());
    const auto& f = frames.back();
    if (f["type"] == "session_end") break;
    if (f["type"] == "awaiting_input") ws->answer(++awaits < 3 ? "I had a good day" : "I wanted to punch him");
  }
  CHECK(frames.back()["reason"] == "moderation-stop");
  const auto& refusal = frames[frames.size() - 2];
  CHECK(refusal["text"] == llm::kRefusalUtterance);
  CHECK(refusal["source"] == "refusal");
  for (const auto& f : frames) check_conforms(f);
  CHECK(rig.wait_done(id) == SessionState::Terminated);
  CHECK(rig.server->handle(id)->reason == dialogue::Termination::ModerationStop);
}

TEST_CASE("dropping the socket ends the session") {
  Rig rig;
  const auto id = rig.create({{"coachee_id", "u"}, {"exercise", "gratitude"}});
  auto ws = rig.connect(id);
  CHECK(ws->read()["type"] == "coach_utterance");
  ws->close();
  CHECK(rig.wait_done(id) == SessionState::Terminated);
  CHECK(rig.server->handle(id)->reason == dialogue::Termination::ClientDisconnect);
  const auto res = rig.http->Get("/sessions/" + id + "/log");
  REQUIRE(res->status == 200);
  CHECK(res->body.find("client-disconnect") != std::string::npos);
  // a finished session cannot be streamed again
  auto again = rig.connect(id);
  CHECK(again->read()["type"] == "error");
}

TEST_CASE("decision traces only in debug sessions") {
  Rig rig;
  const auto id = rig.create({{"coachee_id", "u"}, {"exercise", "savouring"}, {"debug", true}, {"mode", "generic"}});
  auto ws = rig.connect(id);
  const auto frames = converse(*ws, "I enjoyed the sunset");
  CHECK(count(frames, "decision_trace") == 8);
  for (const auto& f : frames) {
    check_conforms(f);
    if (f["type"] == "decision_trace") CHECK(f["q_values"].size() == kNumActions);
  }
}

TEST_CASE("concurrent sessions stay isolated") {
  Rig rig;
  const auto a = rig.create({{"coachee_id", "ada"}, {"exercise", "gratitude"}});
  const auto b = rig.create({{"coachee_id", "bob"}, {"exercise", "savouring"}});
  std::vector<json> fa, fb;
  std::thread ta([&] {
    auto ws = rig.connect(a);
    fa = converse(*ws, "alpha");
  });
  std::thread tb([&] {
    auto ws = rig.connect(b);
    fb = converse(*ws, "bravo");
  });
  ta.join();
  tb.join();
  CHECK(fa.back()["reason"] == "completed");
  CHECK(fb.back()["reason"] == "completed");
  rig.wait_done(a);
  rig.wait_done(b);
  const auto la = rig.http->Get("/sessions/" + a + "/log")->body;
  const auto lb = rig.http->Get("/sessions/" + b + "/log")->body;
  CHECK(la.find("alpha") != std::string::npos);
  CHECK(la.find("bravo") == std::string::npos);
  CHECK(lb.find("bravo") != std::string::npos);
  CHECK(lb.find("alpha") == std::string::npos);
  std::ifstream in(rig.dir / "logs" / "sessions.jsonl");
  const std::string stored((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(store::parse_session_logs(stored, "log").size() == 2);
}

TEST_CASE("bearer token") {
  ::setenv("COACH_TEST_TOKEN", "s3cret", 1);
  Rig rig([](ServerConfig& c) { c.auth_token_env = "COACH_TEST_TOKEN"; });
  CHECK(rig.http->Get("/healthz")->status == 200);
  CHECK(rig.http->Post("/sessions", R"({"coachee_id":"u","exercise":"gratitude"})", "application/json")->status == 401);
  httplib::Headers auth{{"Authorization", "Bearer s3cret"}};
  const auto res = rig.http->Post("/sessions", auth, R"({"coachee_id":"u","exercise":"gratitude"})", "application/json");
  REQUIRE(res->status == 201);
  const auto id = json::parse(res->body)["session_id"].get<std::string>();
  CHECK_THROWS(WsClient(rig.server->port(), "/sessions/" + id + "/stream"));
  WsClient ok(rig.server->port(), "/sessions/" + id + "/stream?token=s3cret");
  CHECK(ok.read()["type"] == "coach_utterance");
  ::unsetenv("COACH_TEST_TOKEN");
}

TEST_CASE("stop ends live sessions") {
  Rig rig;
  const auto id = rig.create({{"coachee_id", "u"}, {"exercise", "gratitude"}});
  auto ws = rig.connect(id);
  CHECK(ws->read()["type"] == "coach_utterance");
  rig.server->stop();
  CHECK(rig.server->handle(id)->reason == dialogue::Termination::ClientDisconnect);
}
