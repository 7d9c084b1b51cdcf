#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "json.hpp"

#include "coach/cli/cli.hpp"
#include "coach/cli/config.hpp"
#include "coach/store/checkpoint.hpp"

using namespace coach;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
  std::vector<json> lines() const {
    std::vector<json> v;
    std::istringstream in(out);
    std::string l;
    while (std::getline(in, l)) {
      if (!l.empty() && l.front() == '{') v.push_back(json::parse(l));
    }
    return v;
  }
};

Result coach_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "coach");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) { return store::read_file(p); }

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

struct TempDir {
  fs::path path;
  TempDir() {
    static int n = 0;
    path = fs::temp_directory_path() / ("coach_cli_" + std::to_string(::getpid()) + "_" + std::to_string(++n));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& s) const { return (path / s).string(); }
};

}  // namespace

TEST_CASE("corpus and batch training are reproducible") {
  TempDir t;
  auto r = coach_cli({"gen-corpus", "--out", t / "c", "--seed", "4", "--sessions", "4"});
  REQUIRE(r.code == 0);
  const auto lines = r.lines();
  REQUIRE(lines.size() == 2);
  CHECK(lines[0]["command"] == "gen-corpus");
  CHECK(lines[0]["config"]["seed"] == 4);
  CHECK(lines[1]["transitions"] == 5 * 4 * 8);

  r = coach_cli({"train-batch", "--algo", "dqn", "--corpus", t / "c/corpus.jsonl", "--out", t / "ck", "--epochs", "5",
                 "--seed", "4"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(t / "ck/generic.ckpt"));
  const auto loss = slurp(t / "ck/loss_curve.csv");
  CHECK(line_count(loss) == 1 + 5);
  const auto ck = store::load_checkpoint(t / "ck/generic.ckpt");
  CHECK(ck.metadata.corpus_id == "corpus.jsonl");
  CHECK(ck.normalizer.speech.source == DurationSource::ReferenceCorpus);

  REQUIRE(coach_cli({"gen-corpus", "--out", t / "c2", "--seed", "4", "--sessions", "4"}).code == 0);
  REQUIRE(coach_cli({"train-batch", "--algo", "dqn", "--corpus", t / "c2/corpus.jsonl", "--out", t / "ck2", "--epochs",
                     "5", "--seed", "4"})
              .code == 0);
  CHECK(slurp(t / "c/corpus.jsonl") == slurp(t / "c2/corpus.jsonl"));
  CHECK(slurp(t / "ck/loss_curve.csv") == slurp(t / "ck2/loss_curve.csv"));
  CHECK(store::load_checkpoint(t / "ck2/generic.ckpt").params == ck.params);
}

TEST_CASE("rupture evaluation writes one row per fold") {
  TempDir t;
  REQUIRE(coach_cli({"gen-corpus", "--kind", "rupture", "--subjects", "10", "--out", t / "d"}).code == 0);
  const auto r = coach_cli({"eval-rupture", "--model", "bilstm", "--fusion", "late", "--data", t / "d", "--out",
                            t / "e", "--epochs", "2"});
  REQUIRE(r.code == 0);
  CHECK(line_count(slurp(t / "e/folds_bilstm_late.csv")) == 1 + 50);
  const auto summary = slurp(t / "e/summary.txt");
  CHECK(summary.find("bilstm") != std::string::npos);
  CHECK(summary.find("selected") != std::string::npos);
  CHECK(r.lines().back()["folds"] == 50);
}

TEST_CASE("simulated study artifacts are byte-identical across reruns") {
  TempDir t;
  REQUIRE(coach_cli({"gen-corpus", "--out", t / "c", "--sessions", "4"}).code == 0);
  REQUIRE(coach_cli({"train-batch", "--corpus", t / "c/corpus.jsonl", "--out", t / "ck", "--epochs", "5"}).code == 0);
  for (const char* out : {"s1", "s2"}) {
    const auto r = coach_cli({"simulate-study", "--arms", "adaptive,generic", "--seeds", "2", "--coachees", "3",
                              "--generic", t / "ck/generic.ckpt", "--corpus", t / "c/corpus.jsonl", "--out", t / out});
    REQUIRE(r.code == 0);
    CHECK(r.lines().back()["replications"] == 2);
  }
  for (const char* f : {"study.json", "sessions.csv", "coachee_sessions.csv", "reward.svg"}) {
    CHECK(slurp(t / (std::string("s1/") + f)) == slurp(t / (std::string("s2/") + f)));
  }
  CHECK(line_count(slurp(t / "s1/coachee_sessions.csv")) == 1 + 2 * 2 * 3 * 4);

  const auto single = coach_cli({"simulate-study", "--arms", "generic", "--seeds", "1", "--coachees", "2", "--generic",
                                 t / "ck/generic.ckpt", "--corpus", t / "c/corpus.jsonl", "--out", t / "s3"});
  REQUIRE(single.code == 0);
  CHECK(fs::exists(t / "s3/reward.svg"));
  const auto bad = coach_cli({"simulate-study", "--arms", "generic", "--seeds", "2", "--coachees", "2", "--generic",
                              t / "ck/generic.ckpt", "--corpus", t / "c/corpus.jsonl", "--out", t / "s4"});
  CHECK(bad.code == 1);
}

TEST_CASE("session replay and report export") {
  TempDir t;
  REQUIRE(coach_cli({"gen-corpus", "--out", t / "c", "--sessions", "2"}).code == 0);
  REQUIRE(coach_cli({"train-batch", "--corpus", t / "c/corpus.jsonl", "--out", t / "ck", "--epochs", "2"}).code == 0);
  auto r = coach_cli({"session-replay", "--checkpoint", t / "ck/generic.ckpt", "--mode", "adaptive", "--out", t / "rp"});
  REQUIRE(r.code == 0);
  CHECK(r.lines().back()["replayable"] == 1);
  r = coach_cli({"session-replay", "--log", t / "rp/sessions.jsonl", "--out", t / "rp2"});
  REQUIRE(r.code == 0);
  const auto replay = json::parse(slurp(t / "rp2/replay.json"));
  REQUIRE(replay.size() == 1);
  CHECK(replay[0]["turns"] == 8);
  CHECK(replay[0]["actions_reproduced"] == 8);

  // a tampered action no longer follows from its q-values
  std::istringstream in(slurp(t / "rp/sessions.jsonl"));
  std::string line, log;
  bool first = true;
  while (std::getline(in, line)) {
    auto j = json::parse(line);
    if (first && j["record"] == "turn") {
      const int a = (j["action"].get<int>() + 1) % 3;
      j["action"] = a;
      j["action_name"] = to_string(decode_action(a));
      first = false;
    }
    log += j.dump() + "\n";
  }
  std::ofstream(t / "tampered.jsonl") << log;
  r = coach_cli({"session-replay", "--log", t / "tampered.jsonl", "--out", t / "rp3"});
  CHECK(r.code == 1);
  CHECK(json::parse(r.err)["message"].get<std::string>().find("not reproducible") != std::string::npos);

  r = coach_cli({"export-report", "--logs", t / "rp/sessions.jsonl", "--out", t / "x"});
  REQUIRE(r.code == 0);
  CHECK(line_count(slurp(t / "x/turns.csv")) == 1 + 8);
  CHECK(fs::exists(t / "x/reward.svg"));
}

TEST_CASE("errors are one machine-readable line") {
  TempDir t;
  auto r = coach_cli({"gen-corpus", "--out", t / "c", "--bogus"});
  CHECK(r.code == 2);
  CHECK(line_count(r.err) == 1);
  CHECK(json::parse(r.err)["error"] == "usage");

  CHECK(coach_cli({}).code == 2);
  CHECK(coach_cli({"fly"}).code == 2);

  std::ofstream(t / "bad.json") << R"({"study":{"coachees":3,"typo":1}})";
  r = coach_cli({"gen-corpus", "--config", t / "bad.json", "--out", t / "c"});
  CHECK(r.code == 1);
  const auto e = json::parse(r.err);
  CHECK(e["error"] == "config");
  CHECK(e["message"].get<std::string>().find("study.typo") != std::string::npos);

  r = coach_cli({"train-batch", "--corpus", t / "bad.json", "--out", t / "ck"});
  CHECK(r.code == 1);
  CHECK(line_count(r.err) == 1);

  CHECK(coach_cli({"--help"}).code == 0);
}

TEST_CASE("config file is overlaid by flags") {
  TempDir t;
  std::ofstream(t / "cfg.json") << R"({"seed":9,"corpus":{"profiles":2,"sessions_per_profile":3},"batch":{"train":{"epochs":3}}})";
  auto r = coach_cli({"gen-corpus", "--config", t / "cfg.json", "--out", t / "c", "--sessions", "1"});
  REQUIRE(r.code == 0);
  const auto cfg = r.lines()[0]["config"];
  CHECK(cfg["seed"] == 9);
  CHECK(cfg["corpus"]["profiles"] == 2);
  CHECK(cfg["corpus"]["sessions_per_profile"] == 1);
  CHECK(r.lines()[1]["transitions"] == 2 * 1 * 8);
  CHECK(json::parse(slurp(t / "c/resolved_config.json")) == cfg);

  const auto shipped = cli::load_config(fs::path(COACH_DATA_DIR) / "config.json");
  CHECK(cli::to_json(shipped) == cli::to_json(cli::AppConfig{}));
}
