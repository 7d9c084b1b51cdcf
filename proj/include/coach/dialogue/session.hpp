#pragma once

#include <cstdint>
#include <future>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "coach/dialogue/behavior_tree.hpp"
#include "coach/dialogue/clock.hpp"
#include "coach/dialogue/script.hpp"
#include "coach/llm/chat.hpp"
#include "coach/policy/policy.hpp"
#include "coach/rupture/model.hpp"

namespace coach::dialogue {

class SessionError : public Error {
 public:
  using Error::Error;
};

enum class Termination { Completed, ModerationStop, Timeout, ClientDisconnect, Error };

std::string_view to_string(Termination t);
Termination parse_termination(std::string_view name);

/// What the coachee produced while answering one coach utterance.
struct CoacheeTurnInput {
  std::string transcript;
  double speech_duration_s = 0.0;
  double silence_duration_s = 0.0;
  std::vector<double> valence;  // facial valence samples in [-1, 1]
  std::optional<bool> rupture;  // precomputed IR flag, skips the detector
  std::optional<rupture::FeatureWindow> facial_window;
  std::optional<rupture::FeatureWindow> audio_window;

  void validate() const;
};

enum class UtteranceSource { Scripted, Llm, Fallback, Refusal, Reprompt };
std::string_view to_string(UtteranceSource s);
UtteranceSource parse_utterance_source(std::string_view name);

/// Phase of the exchange a coachee answer belongs to.
enum class AnswerPhase { Intro, FirstQuestion, Turn };
std::string_view to_string(AnswerPhase p);
AnswerPhase parse_answer_phase(std::string_view name);

/// Message from the session to whoever plays the coachee.
struct SessionEvent {
  enum class Kind { CoachUtterance, AwaitingInput, SessionEnd, DecisionTrace };
  Kind kind = Kind::CoachUtterance;
  std::string text;
  UtteranceSource source = UtteranceSource::Scripted;
  int turn_index = -1;  // decision turn, -1 outside the decision loop
  AnswerPhase phase = AnswerPhase::Turn;
  std::optional<DialogueAction> action;
  policy::QValues q_values{};
  Termination reason = Termination::Completed;
};

/// Transport between a session and its coachee (simulator, socket, test).
class CoacheeChannel {
 public:
  virtual ~CoacheeChannel() = default;
  virtual void send(const SessionEvent& event) = 0;
  /// Non-blocking; the session polls once per tick.
  virtual std::optional<CoacheeTurnInput> poll() = 0;
  virtual bool connected() const { return true; }
};

/// Decision-making side of a session: frozen generic or adaptive.
class SessionPolicy {
 public:
  virtual ~SessionPolicy() = default;
  virtual policy::QValues q_values(const StateVector& s) const = 0;
  virtual double epsilon() const = 0;
  virtual const StateNormalizer& normalizer() const = 0;
  virtual const RewardConfig& reward_config() const = 0;
  virtual std::string mode() const = 0;
  /// Online update; frozen policies ignore the transition.
  virtual std::optional<policy::OnlineUpdateReport> observe(const Transition& t) = 0;
};

class FrozenPolicy : public SessionPolicy {
 public:
  explicit FrozenPolicy(policy::PolicyCheckpoint checkpoint, double epsilon = 0.0);
  policy::QValues q_values(const StateVector& s) const override;
  double epsilon() const override { return epsilon_; }
  const StateNormalizer& normalizer() const override { return checkpoint_.normalizer; }
  const RewardConfig& reward_config() const override { return checkpoint_.reward; }
  std::string mode() const override { return "generic"; }
  std::optional<policy::OnlineUpdateReport> observe(const Transition&) override { return std::nullopt; }

 private:
  policy::PolicyCheckpoint checkpoint_;
  policy::QNetwork network_;
  double epsilon_;
};

/// Drives a per-coachee OnlineLearner; epsilon follows the session schedule.
class AdaptivePolicy : public SessionPolicy {
 public:
  AdaptivePolicy(policy::OnlineLearner& learner, int session_index);
  policy::QValues q_values(const StateVector& s) const override { return learner_.q_values(s); }
  double epsilon() const override;
  const StateNormalizer& normalizer() const override { return normalizer_; }
  const RewardConfig& reward_config() const override { return reward_; }
  std::string mode() const override { return "adaptive"; }
  std::optional<policy::OnlineUpdateReport> observe(const Transition& t) override;

 private:
  policy::OnlineLearner& learner_;
  int session_index_;
  StateNormalizer normalizer_;
  RewardConfig reward_;
};

/// IR probability for an answer, or nothing when it cannot tell.
class RuptureDetector {
 public:
  virtual ~RuptureDetector() = default;
  virtual std::optional<double> p_rupture(const CoacheeTurnInput& input) = 0;
};

/// Late fusion of the two uni-modal classifiers over the answer's windows.
class LateFusionDetector : public RuptureDetector {
 public:
  LateFusionDetector(rupture::Classifier facial, rupture::Classifier audio,
                     rupture::TieBreak tie = rupture::TieBreak::Audio);
  std::optional<double> p_rupture(const CoacheeTurnInput& input) override;

 private:
  rupture::Classifier facial_, audio_;
  rupture::TieBreak tie_;
};

struct SessionConfig {
  std::string session_id;
  std::string coachee_id = "coachee";
  ExerciseKind exercise = ExerciseKind::Gratitude;
  int session_index = 1;
  int turn_limit = 8;
  double tick_rate_hz = 10.0;
  double listen_timeout_s = 60.0;
  int max_silent_turns = 2;          // consecutive unanswered turns before a timeout stop
  double rupture_threshold = 0.5;
  int llm_retries = 2;
  double llm_backoff_s = 0.5;        // doubled after each failed attempt
  bool async_llm = true;             // false: completions run inline on the tick thread
  bool decision_trace = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TranscriptEntry {
  enum class Speaker { Coach, Coachee };
  Speaker speaker = Speaker::Coach;
  std::string text;
  UtteranceSource source = UtteranceSource::Scripted;  // coach lines only
  int turn_index = -1;
  double t = 0.0;

  bool operator==(const TranscriptEntry&) const = default;
};

struct ModerationRecord {
  enum class Direction { Input, Output };
  Direction direction = Direction::Input;
  std::string text;
  bool flagged = false;
  std::vector<std::string> categories;
  bool service_error = false;
  int turn_index = -1;

  bool operator==(const ModerationRecord&) const = default;
};

/// One decision turn: the coach's utterance and the answer it got.
struct TurnRecord {
  int turn_index = 0;
  TurnObservation observation;       // s_t as observed before deciding
  StateVector state;
  policy::QValues q_values{};
  double epsilon = 0.0;
  DialogueAction action = DialogueAction::Summarise;
  std::string prompt;
  std::string coach_utterance;
  UtteranceSource utterance_source = UtteranceSource::Llm;
  int llm_attempts = 0;
  std::string coachee_transcript;
  double speech_duration_s = 0.0;
  double silence_duration_s = 0.0;
  std::vector<double> valence;
  bool answered = true;               // false when the listen timeout expired twice
  RewardComponents reward;
  std::optional<double> rupture_probability;  // for the answer
  bool rupture_flag = false;
  StateVector next_state;
  bool done = false;
  std::size_t update_steps = 0;
  double update_loss = 0.0;
  std::optional<std::string> update_diagnostic;
  double t_start = 0.0;
  double t_end = 0.0;

  bool operator==(const TurnRecord&) const = default;
};

struct SessionLog {
  std::string session_id;
  std::string coachee_id;
  ExerciseKind exercise = ExerciseKind::Gratitude;
  int session_index = 1;
  std::string mode;
  std::uint64_t seed = 0;
  int turn_limit = 8;
  BaselineValence baseline;
  std::vector<TranscriptEntry> opening;     // scripted lines and answers before turn 0
  std::vector<TranscriptEntry> transcript;  // everything, in order
  std::vector<ModerationRecord> moderation;
  std::vector<TurnRecord> turns;
  Termination termination = Termination::Completed;
  std::string error;
  double started_at = 0.0;
  double ended_at = 0.0;

  double mean_reward() const;
  bool operator==(const SessionLog&) const = default;
};

/// Re-derives every logged action from the logged q-values, epsilons and the
/// session seed.
std::vector<DialogueAction> replay_actions(const SessionLog& log);

/// Behavior-tree orchestrator for one coaching session.
class SessionRunner {
 public:
  SessionRunner(SessionConfig config, const Script& script, CoacheeChannel& channel,
                SessionPolicy& policy, llm::LlmBackend& llm, Clock& clock,
                RuptureDetector* detector = nullptr);
  ~SessionRunner();

  SessionRunner(const SessionRunner&) = delete;
  SessionRunner& operator=(const SessionRunner&) = delete;

  /// One evaluation of the tree.
  bt::Status tick();
  /// Ticks at tick_rate_hz until the tree finishes (or max_ticks, when
  /// non-zero, have run); returns the log.
  const SessionLog& run(std::uint64_t max_ticks = 0);

  bool finished() const { return finished_; }
  const SessionLog& log() const { return log_; }
  std::uint64_t ticks() const { return ticks_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  SessionLog log_;
  bool finished_ = false;
  std::uint64_t ticks_ = 0;
};

SessionLog run_session(const SessionConfig& config, const Script& script, CoacheeChannel& channel,
                       SessionPolicy& policy, llm::LlmBackend& llm, Clock& clock,
                       RuptureDetector* detector = nullptr);

}  // namespace coach::dialogue
