#include "coach/llm/chat.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>

#include "httplib.h"
#include "json.hpp"

namespace coach::llm {

std::string_view build_prompt(DialogueAction action) {
  switch (action) {
    case DialogueAction::Summarise:
      return "Can you please summarise what the Human has just shared?";
    case DialogueAction::FollowUpQuestion:
      return "Can you please ask me a follow-up question about the exercise episode I have just "
             "shared?";
    case DialogueAction::NewEpisode:
      return "Can you please ask me about a new episode to share?";
  }
  throw LlmError("invalid dialogue action");
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::Human: return "human";
    case Role::Ai: return "ai";
  }
  return "?";
}

Role parse_role(std::string_view name) {
  for (Role r : {Role::System, Role::Human, Role::Ai}) {
    if (to_string(r) == name) return r;
  }
  throw LlmError("unknown chat role '" + std::string(name) + "'");
}

ChatHistory::ChatHistory(std::string system_context) {
  if (system_context.empty()) throw LlmError("system context must not be empty");
  messages_.push_back({Role::System, std::move(system_context)});
}

void ChatHistory::add_human(const std::string& text) {
  if (messages_.back().role == Role::Human) {
    messages_.back().text += "\n" + text;
  } else {
    messages_.push_back({Role::Human, text});
  }
}

void ChatHistory::add_ai(const std::string& text) {
  if (messages_.back().role != Role::Human) {
    throw LlmError("an ai message must follow a human message");
  }
  messages_.push_back({Role::Ai, text});
}

std::string complete(LlmBackend& backend, ChatHistory& history, const std::string& prompt) {
  if (prompt.empty()) throw LlmError("prompt must not be empty");
  std::string reply = backend.generate(history, prompt);
  history.add_human(prompt);
  history.add_ai(reply);
  return reply;
}

ModerationVerdict moderate(LlmBackend& backend, const std::string& text) {
  if (text.empty()) throw LlmError("cannot moderate empty text");
  ModerationVerdict v = backend.moderate(text);
  v.flagged = !v.categories.empty();
  return v;
}

// --- stub ---------------------------------------------------------------------

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string normalize(std::string_view text) {
  std::string out = " ";
  for (unsigned char c : text) out += std::isalnum(c) ? static_cast<char>(std::tolower(c)) : ' ';
  out += ' ';
  return out;
}

struct TermList {
  const char* category;
  std::vector<std::string> terms;  // matched at the start of a word
};

const std::vector<TermList>& flag_terms() {
  static const std::vector<TermList> lists = {
      {"violence",
       {"kill", "punch", "stab", "murder", "strangle", "beat up", "beat him", "beat her",
        "hit someone", "hit him", "hit her", "gun", "weapon", "torture", "smash his", "smash her"}},
      {"self-harm",
       {"suicid", "kill myself", "hurt myself", "harm myself", "self harm", "cut myself",
        "end my life", "want to die"}},
      {"sexual", {"sex", "porn", "nude", "naked", "genital"}},
  };
  return lists;
}

bool has_term(const std::string& normalized, const std::string& term) {
  return normalized.find(" " + term) != std::string::npos;
}

std::string pick(const std::vector<std::string>& options, std::uint64_t h) {
  return options[h % options.size()];
}

std::string last_human_topic(const ChatHistory& history) {
  for (auto it = history.messages().rbegin(); it != history.messages().rend(); ++it) {
    if (it->role != Role::Human) continue;
    std::string words;
    int n = 0;
    std::string norm = normalize(it->text);
    std::size_t pos = 0;
    // a few content words from the latest coachee answer
    while (n < 4 && pos < norm.size()) {
      const auto start = norm.find_first_not_of(' ', pos);
      if (start == std::string::npos) break;
      const auto end = norm.find(' ', start);
      std::string w = norm.substr(start, end - start);
      pos = end;
      if (w.size() > 3) {
        words += (words.empty() ? "" : " ") + w;
        ++n;
      }
    }
    if (!words.empty()) return words;
  }
  return "that";
}

}  // namespace

StubBackend::StubBackend(StubConfig config) : config_(std::move(config)) {}

std::string StubBackend::generate(const ChatHistory& history, const std::string& prompt) {
  ++generate_calls_;
  if (config_.fail_completions > 0) {
    --config_.fail_completions;
    throw TransportError("stub completion failure (injected)");
  }
  std::uint64_t h = fnv1a(prompt, config_.seed * 0x9E3779B97F4A7C15ULL + history.size());
  for (const auto& m : history.messages()) h = fnv1a(m.text, h);
  const std::string topic = last_human_topic(history);
  const std::vector<std::string> openers = {"Thank you for sharing.", "That sounds meaningful.",
                                            "I appreciate you telling me that.", "That's lovely to hear."};
  const std::string opener = pick(openers, h);
  h = fnv1a("slot", h);
  if (prompt == build_prompt(DialogueAction::Summarise)) {
    return opener + " So you told me about " + topic + ", and it clearly mattered to you.";
  }
  if (prompt == build_prompt(DialogueAction::FollowUpQuestion)) {
    const std::vector<std::string> qs = {"How did that make you feel?",
                                         "What do you think made that moment special?",
                                         "Who else was part of that experience?",
                                         "What did you notice in yourself afterwards?"};
    return opener + " You mentioned " + topic + ". " + pick(qs, h);
  }
  if (prompt == build_prompt(DialogueAction::NewEpisode)) {
    const std::vector<std::string> qs = {"Can you tell me about another episode you would like to share?",
                                         "Is there another moment from the past week you could tell me about?",
                                         "Could you share one more example with me?"};
    return opener + " " + pick(qs, h);
  }
  return opener + " Please tell me more.";
}

ModerationVerdict StubBackend::moderate(const std::string& text) {
  ++moderate_calls_;
  if (config_.moderation_down) throw TransportError("stub moderation service unavailable (injected)");
  ModerationVerdict v;
  const std::string norm = normalize(text);
  for (const auto& list : flag_terms()) {
    for (const auto& term : list.terms) {
      if (has_term(norm, term)) v.categories.insert(list.category);
    }
  }
  for (const auto& term : config_.extra_flag_terms) {
    std::string t = normalize(term);
    t = t.substr(1, t.size() - 2);
    if (!t.empty() && has_term(norm, t)) v.categories.insert("custom");
  }
  v.flagged = !v.categories.empty();
  return v;
}

// --- remote -------------------------------------------------------------------

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw LlmError("remote backend needs a base URL");
  if (!(config_.timeout_s > 0.0)) throw LlmError("remote timeout must be positive");
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  }
}

std::string RemoteBackend::post(const std::string& path, const std::string& body) {
  httplib::Client client(config_.base_url);
  const auto secs = static_cast<time_t>(config_.timeout_s);
  const auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(path, headers, body, "application/json");
  if (!res) {
    throw TransportError("request to " + config_.base_url + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("request to " + config_.base_url + path + " returned HTTP " +
                         std::to_string(res->status));
  }
  return res->body;
}

std::string RemoteBackend::generate(const ChatHistory& history, const std::string& prompt) {
  using nlohmann::json;
  json messages = json::array();
  for (const auto& m : history.messages()) {
    const char* role = m.role == Role::System ? "system" : m.role == Role::Human ? "user" : "assistant";
    messages.push_back({{"role", role}, {"content", m.text}});
  }
  if (!messages.empty() && messages.back()["role"] == "user") {
    messages.back()["content"] = messages.back()["content"].get<std::string>() + "\n" + prompt;
  } else {
    messages.push_back({{"role", "user"}, {"content", prompt}});
  }
  const json req = {{"model", config_.model}, {"messages", messages}};
  try {
    const json res = json::parse(post("/v1/chat/completions", req.dump()));
    return res.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat-completion response: ") + e.what());
  }
}

ModerationVerdict RemoteBackend::moderate(const std::string& text) {
  using nlohmann::json;
  const json req = {{"model", config_.moderation_model}, {"input", text}};
  try {
    const json res = json::parse(post("/v1/moderations", req.dump()));
    const auto& r = res.at("results").at(0);
    ModerationVerdict v;
    if (r.contains("categories")) {
      for (const auto& [name, on] : r.at("categories").items()) {
        if (on.is_boolean() && on.get<bool>()) v.categories.insert(name);
      }
    }
    if (r.value("flagged", false) && v.categories.empty()) v.categories.insert("unspecified");
    v.flagged = !v.categories.empty();
    return v;
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed moderation response: ") + e.what());
  }
}

std::unique_ptr<LlmBackend> make_backend(std::string_view kind, const RemoteConfig& remote,
                                         std::uint64_t seed) {
  if (kind == "stub") return std::make_unique<StubBackend>(StubConfig{seed});
  if (kind == "remote") return std::make_unique<RemoteBackend>(remote);
  throw LlmError("unknown LLM backend '" + std::string(kind) + "' (expected stub or remote)");
}

// --- adversarial ---------------------------------------------------------------

std::vector<AdversarialCase> load_adversarial(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LlmError("cannot open adversarial corpus " + path.string());
  std::vector<AdversarialCase> cases;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw LlmError(path.string() + ":" + std::to_string(line_no) + ": expected '<flag|ok>\\t<text>'");
    }
    const std::string label = line.substr(0, tab);
    if (label != "flag" && label != "ok") {
      throw LlmError(path.string() + ":" + std::to_string(line_no) + ": label must be 'flag' or 'ok'");
    }
    cases.push_back({label == "flag", line.substr(tab + 1)});
  }
  return cases;
}

std::size_t AdversarialReport::true_positives() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) {
    return r.input.expect_flag && r.refusal_fired;
  }));
}

std::size_t AdversarialReport::false_negatives() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) {
    return r.input.expect_flag && !r.refusal_fired;
  }));
}

std::size_t AdversarialReport::false_positives() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) {
    return !r.input.expect_flag && r.refusal_fired;
  }));
}

AdversarialReport adversarial_suite(LlmBackend& backend, const std::vector<AdversarialCase>& cases,
                                    const std::string& system_context) {
  AdversarialReport report;
  for (const auto& c : cases) {
    AdversarialRow row;
    row.input = c;
    try {
      row.verdict = moderate(backend, c.text);
      if (!row.verdict.flagged) {
        ChatHistory history(system_context);
        history.add_human(c.text);
        row.reply = complete(backend, history, std::string(build_prompt(DialogueAction::FollowUpQuestion)));
        row.refusal_fired = moderate(backend, row.reply).flagged;
      } else {
        row.refusal_fired = true;
      }
    } catch (const TransportError&) {
      row.moderation_error = true;
      row.refusal_fired = true;
    }
    if (row.refusal_fired) row.reply = std::string(kRefusalUtterance);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace coach::llm
