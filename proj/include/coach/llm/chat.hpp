#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "coach/core/types.hpp"

namespace coach::llm {

class LlmError : public Error {
 public:
  using Error::Error;
};

/// Network failure, timeout or a non-2xx answer from a remote service.
class TransportError : public LlmError {
 public:
  using LlmError::LlmError;
};

inline constexpr std::string_view kRefusalUtterance =
    "I found your answer very inappropriate. I would stop here the coaching practice and call the "
    "researcher";

/// Fixed prompt appended for each dialogue action.
std::string_view build_prompt(DialogueAction action);

enum class Role { System, Human, Ai };
std::string_view to_string(Role r);
Role parse_role(std::string_view name);

struct Message {
  Role role = Role::Human;
  std::string text;

  bool operator==(const Message&) const = default;
};

/// One system message followed by alternating human/ai messages.
class ChatHistory {
 public:
  explicit ChatHistory(std::string system_context);

  const std::vector<Message>& messages() const { return messages_; }
  std::size_t size() const { return messages_.size(); }
  const std::string& system_context() const { return messages_.front().text; }

  /// Adds the coachee's words; consecutive human texts are merged so roles
  /// keep alternating.
  void add_human(const std::string& text);
  void add_ai(const std::string& text);

 private:
  std::vector<Message> messages_;
};

struct ModerationVerdict {
  bool flagged = false;
  std::set<std::string> categories;

  bool operator==(const ModerationVerdict&) const = default;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;

  virtual std::string name() const = 0;
  /// Reply to `history` followed by a human turn `prompt`. Does not mutate.
  virtual std::string generate(const ChatHistory& history, const std::string& prompt) = 0;
  virtual ModerationVerdict moderate(const std::string& text) = 0;
};

/// Validates, asks the backend and appends (prompt, reply) to the history.
std::string complete(LlmBackend& backend, ChatHistory& history, const std::string& prompt);

/// Moderation with input validation; transport errors propagate.
ModerationVerdict moderate(LlmBackend& backend, const std::string& text);

struct StubConfig {
  StubConfig() = default;
  explicit StubConfig(std::uint64_t s) : seed(s) {}

  std::uint64_t seed = 0;
  // Failure injection for tests.
  int fail_completions = 0;        // the next n generate() calls throw TransportError
  bool moderation_down = false;    // every moderate() call throws TransportError
  std::vector<std::string> extra_flag_terms;
};

/// Hermetic backend: per-action reply templates with seeded slot filling and
/// a keyword moderation list (violence, self-harm, sexual content).
class StubBackend : public LlmBackend {
 public:
  explicit StubBackend(StubConfig config = {});

  std::string name() const override { return "stub"; }
  std::string generate(const ChatHistory& history, const std::string& prompt) override;
  ModerationVerdict moderate(const std::string& text) override;

  int generate_calls() const { return generate_calls_; }
  int moderate_calls() const { return moderate_calls_; }
  void set_moderation_down(bool down) { config_.moderation_down = down; }
  void fail_next_completions(int n) { config_.fail_completions = n; }

 private:
  StubConfig config_;
  int generate_calls_ = 0;
  int moderate_calls_ = 0;
};

struct RemoteConfig {
  std::string base_url = "https://api.openai.com";
  std::string model = "gpt-3.5-turbo";
  std::string moderation_model = "text-moderation-latest";
  std::string api_key_env = "OPENAI_API_KEY";
  double timeout_s = 20.0;
};

/// OpenAI-compatible chat-completion and moderation client.
class RemoteBackend : public LlmBackend {
 public:
  explicit RemoteBackend(RemoteConfig config);

  std::string name() const override { return "remote"; }
  std::string generate(const ChatHistory& history, const std::string& prompt) override;
  ModerationVerdict moderate(const std::string& text) override;

 private:
  std::string post(const std::string& path, const std::string& body);

  RemoteConfig config_;
  std::string api_key_;
};

std::unique_ptr<LlmBackend> make_backend(std::string_view kind, const RemoteConfig& remote,
                                         std::uint64_t seed);

// --- adversarial testing ---------------------------------------------------

struct AdversarialCase {
  bool expect_flag = false;
  std::string text;
};

/// Tab-separated file: "flag" or "ok", a tab, then the coachee text. Lines
/// starting with '#' are comments.
std::vector<AdversarialCase> load_adversarial(const std::filesystem::path& path);

struct AdversarialRow {
  AdversarialCase input;
  ModerationVerdict verdict;
  bool refusal_fired = false;   // input gate, output gate or moderation failure
  bool moderation_error = false;
  std::string reply;            // the refusal when it fired, else the checked reply
};

struct AdversarialReport {
  std::vector<AdversarialRow> rows;

  std::size_t true_positives() const;
  std::size_t false_negatives() const;
  std::size_t false_positives() const;
};

AdversarialReport adversarial_suite(LlmBackend& backend, const std::vector<AdversarialCase>& cases,
                                    const std::string& system_context);

}  // namespace coach::llm
