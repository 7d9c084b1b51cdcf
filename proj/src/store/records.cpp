#include "coach/store/records.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>

#include "coach/store/checkpoint.hpp"

using nlohmann::json;

namespace coach::store {

namespace {

std::string where(const std::string& source, std::size_t line) { return source + ":" + std::to_string(line); }

void check_version(const json& j, const std::string& at) {
  const auto it = j.find("v");
  if (it == j.end()) throw StoreError(at + ": record has no format version");
  const int v = it->get<int>();
  if (v != kRecordVersion) {
    throw StoreError(at + ": record format version " + std::to_string(v) + " is not supported (this build reads version " +
                     std::to_string(kRecordVersion) + ")");
  }
}

template <class F>
void for_each_line(std::string_view text, const std::string& source, F&& f) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const auto at = where(source, line_no);
    try {
      f(json::parse(line), at);
    } catch (const StoreError&) {
      throw;
    } catch (const std::exception& e) {
      throw StoreError(at + ": " + e.what());
    }
  }
}

// Serialises appends from this process; O_APPEND keeps single-write lines
// whole across processes.
std::mutex g_append_mu;

void append_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::lock_guard lock(g_append_mu);
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw StoreError("cannot open " + path.string() + ": " + std::strerror(errno));
  for (const auto& l : lines) {
    const std::string rec = l + "\n";
    const auto n = ::write(fd, rec.data(), rec.size());
    if (n != static_cast<ssize_t>(rec.size())) {
      ::close(fd);
      throw StoreError("short write to " + path.string());
    }
  }
  ::close(fd);
}

}  // namespace

void write_transitions(const std::filesystem::path& path, std::span<const Transition> corpus) {
  std::string out;
  for (const auto& t : corpus) {
    json j = t;
    j["v"] = kRecordVersion;
    out += j.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<Transition> read_transitions(const std::filesystem::path& path) {
  std::vector<Transition> out;
  for_each_line(read_file(path), path.string(), [&](const json& j, const std::string& at) {
    check_version(j, at);
    out.push_back(j.get<Transition>());
  });
  return out;
}

std::vector<std::string> session_log_lines(const dialogue::SessionLog& log) {
  std::vector<std::string> lines;
  for (const auto& t : log.turns) {
    json j = t;
    j["v"] = kRecordVersion;
    j["record"] = "turn";
    j["session_id"] = log.session_id;
    lines.push_back(j.dump());
  }
  json s = {{"v", kRecordVersion},
            {"record", "summary"},
            {"session_id", log.session_id},
            {"coachee_id", log.coachee_id},
            {"exercise", to_string(log.exercise)},
            {"session_index", log.session_index},
            {"mode", log.mode},
            {"seed", log.seed},
            {"turn_limit", log.turn_limit},
            {"turn_count", log.turns.size()},
            {"baseline", log.baseline},
            {"opening", log.opening},
            {"transcript", log.transcript},
            {"moderation", log.moderation},
            {"termination", to_string(log.termination)},
            {"error", log.error},
            {"mean_reward", log.mean_reward()},
            {"started_at", log.started_at},
            {"ended_at", log.ended_at}};
  lines.push_back(s.dump());
  return lines;
}

void append_session_log(const std::filesystem::path& path, const dialogue::SessionLog& log) {
  append_lines(path, session_log_lines(log));
}

std::vector<dialogue::SessionLog> parse_session_logs(std::string_view jsonl, const std::string& source) {
  std::map<std::string, std::vector<dialogue::TurnRecord>> pending;
  std::vector<dialogue::SessionLog> out;
  for_each_line(jsonl, source, [&](const json& j, const std::string& at) {
    check_version(j, at);
    const auto kind = j.at("record").get<std::string>();
    const auto id = j.at("session_id").get<std::string>();
    if (kind == "turn") {
      pending[id].push_back(j.get<dialogue::TurnRecord>());
      return;
    }
    if (kind != "summary") throw StoreError(at + ": unknown record type '" + kind + "'");
    dialogue::SessionLog log;
    log.session_id = id;
    log.coachee_id = j.at("coachee_id").get<std::string>();
    log.exercise = parse_exercise(j.at("exercise").get<std::string>());
    log.session_index = j.at("session_index").get<int>();
    log.mode = j.at("mode").get<std::string>();
    log.seed = j.at("seed").get<std::uint64_t>();
    log.turn_limit = j.at("turn_limit").get<int>();
    log.baseline = j.at("baseline").get<BaselineValence>();
    log.opening = j.at("opening").get<std::vector<dialogue::TranscriptEntry>>();
    log.transcript = j.at("transcript").get<std::vector<dialogue::TranscriptEntry>>();
    log.moderation = j.at("moderation").get<std::vector<dialogue::ModerationRecord>>();
    log.termination = dialogue::parse_termination(j.at("termination").get<std::string>());
    log.error = j.at("error").get<std::string>();
    log.started_at = j.at("started_at").get<double>();
    log.ended_at = j.at("ended_at").get<double>();
    log.turns = std::move(pending[id]);
    pending.erase(id);
    std::stable_sort(log.turns.begin(), log.turns.end(),
                     [](const auto& a, const auto& b) { return a.turn_index < b.turn_index; });
    const auto expected = j.at("turn_count").get<std::size_t>();
    if (log.turns.size() != expected) {
      throw StoreError(at + ": session '" + id + "' summary expects " + std::to_string(expected) + " turns, found " +
                       std::to_string(log.turns.size()));
    }
    out.push_back(std::move(log));
  });
  return out;
}

std::vector<dialogue::SessionLog> read_session_logs(const std::filesystem::path& path) {
  return parse_session_logs(read_file(path), path.string());
}

}  // namespace coach::store
