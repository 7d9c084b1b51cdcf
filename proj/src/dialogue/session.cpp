#include "coach/dialogue/session.hpp"

#include <cmath>
#include <numeric>

#include "coach/core/log.hpp"
#include "coach/core/state.hpp"

namespace coach::dialogue {

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::ModerationStop: return "moderation-stop";
    case Termination::Timeout: return "timeout";
    case Termination::ClientDisconnect: return "client-disconnect";
    case Termination::Error: return "error";
  }
  return "?";
}

Termination parse_termination(std::string_view name) {
  for (auto t : {Termination::Completed, Termination::ModerationStop, Termination::Timeout,
                 Termination::ClientDisconnect, Termination::Error}) {
    if (to_string(t) == name) return t;
  }
  throw SessionError("unknown termination reason '" + std::string(name) + "'");
}

std::string_view to_string(UtteranceSource s) {
  switch (s) {
    case UtteranceSource::Scripted: return "scripted";
    case UtteranceSource::Llm: return "llm";
    case UtteranceSource::Fallback: return "fallback";
    case UtteranceSource::Refusal: return "refusal";
    case UtteranceSource::Reprompt: return "reprompt";
  }
  return "?";
}

UtteranceSource parse_utterance_source(std::string_view name) {
  for (auto s : {UtteranceSource::Scripted, UtteranceSource::Llm, UtteranceSource::Fallback,
                 UtteranceSource::Refusal, UtteranceSource::Reprompt}) {
    if (to_string(s) == name) return s;
  }
  throw SessionError("unknown utterance source '" + std::string(name) + "'");
}

std::string_view to_string(AnswerPhase p) {
  switch (p) {
    case AnswerPhase::Intro: return "intro";
    case AnswerPhase::FirstQuestion: return "first-question";
    case AnswerPhase::Turn: return "turn";
  }
  return "?";
}

AnswerPhase parse_answer_phase(std::string_view name) {
  for (auto p : {AnswerPhase::Intro, AnswerPhase::FirstQuestion, AnswerPhase::Turn}) {
    if (to_string(p) == name) return p;
  }
  throw SessionError("unknown answer phase '" + std::string(name) + "'");
}

void CoacheeTurnInput::validate() const {
  auto ok = [](double d) { return std::isfinite(d) && d >= 0.0; };
  if (!ok(speech_duration_s) || !ok(silence_duration_s)) {
    throw SessionError("coachee durations must be finite and non-negative");
  }
  for (double v : valence) {
    if (!std::isfinite(v) || v < -1.0 || v > 1.0) throw SessionError("valence samples must lie in [-1, 1]");
  }
}

void SessionConfig::validate() const {
  if (turn_limit < 1) throw SessionError("turn_limit must be at least 1");
  if (!(tick_rate_hz > 0.0)) throw SessionError("tick_rate_hz must be positive");
  if (!(listen_timeout_s > 0.0)) throw SessionError("listen timeout must be positive");
  if (max_silent_turns < 1) throw SessionError("max_silent_turns must be at least 1");
  if (llm_retries < 0 || llm_backoff_s < 0.0) throw SessionError("invalid LLM retry policy");
  if (session_index < 1) throw SessionError("session_index starts at 1");
  if (coachee_id.empty()) throw SessionError("coachee_id must not be empty");
}

// --- policies -------------------------------------------------------------------

FrozenPolicy::FrozenPolicy(policy::PolicyCheckpoint checkpoint, double epsilon)
    : checkpoint_(std::move(checkpoint)), network_(checkpoint_.network()), epsilon_(epsilon) {}

policy::QValues FrozenPolicy::q_values(const StateVector& s) const { return policy::q_values(network_, s); }

AdaptivePolicy::AdaptivePolicy(policy::OnlineLearner& learner, int session_index)
    : learner_(learner), session_index_(session_index) {
  const auto ck = learner.checkpoint();
  normalizer_ = ck.normalizer;
  reward_ = ck.reward;
}

double AdaptivePolicy::epsilon() const { return learner_.config().epsilon_for(session_index_); }

std::optional<policy::OnlineUpdateReport> AdaptivePolicy::observe(const Transition& t) {
  Transition tagged = t;
  tagged.session_index = session_index_;
  return learner_.update_online(tagged);
}

LateFusionDetector::LateFusionDetector(rupture::Classifier facial, rupture::Classifier audio,
                                       rupture::TieBreak tie)
    : facial_(std::move(facial)), audio_(std::move(audio)), tie_(tie) {}

std::optional<double> LateFusionDetector::p_rupture(const CoacheeTurnInput& input) {
  if (!input.facial_window || !input.audio_window) return std::nullopt;
  return rupture::late_fusion_predict(facial_, audio_, *input.facial_window, *input.audio_window, tie_)
      .p_rupture;
}

double SessionLog::mean_reward() const {
  if (turns.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : turns) s += t.reward.total;
  return s / static_cast<double>(turns.size());
}

std::vector<DialogueAction> replay_actions(const SessionLog& log) {
  std::mt19937_64 rng(log.seed);
  std::vector<DialogueAction> out;
  for (const auto& t : log.turns) out.push_back(policy::select_action(t.q_values, t.epsilon, rng));
  return out;
}

// --- runner ---------------------------------------------------------------------

using bt::Status;

struct SessionRunner::Impl {
  SessionConfig config;
  const Script& script;
  CoacheeChannel& channel;
  SessionPolicy& policy;
  llm::LlmBackend& llm;
  Clock& clock;
  RuptureDetector* detector;
  SessionLog& log;

  std::mt19937_64 rng;
  std::optional<llm::ChatHistory> history;
  std::unique_ptr<bt::Node> root;

  // answer currently being processed
  std::optional<CoacheeTurnInput> pending;
  bool pending_answered = true;
  std::optional<double> pending_p;
  bool pending_flag = false;

  struct Await {
    bool active = false;
    double first_t0 = 0.0;
    double t0 = 0.0;
    bool reprompted = false;
  } await;
  int silent_streak = 0;

  TurnObservation obs;
  StateVector state;
  TurnRecord rec;
  std::vector<double> speech_history;  // for per-coachee-running duration stats

  // LLM call in flight
  std::optional<std::future<std::string>> call;
  double retry_at = -1.0;
  std::string reply;
  std::optional<Termination> termination;

  Impl(SessionConfig c, const Script& s, CoacheeChannel& ch, SessionPolicy& p, llm::LlmBackend& l,
       Clock& clk, RuptureDetector* d, SessionLog& lg)
      : config(std::move(c)), script(s), channel(ch), policy(p), llm(l), clock(clk), detector(d),
        log(lg), rng(config.seed) {}

  bool in_loop = false;

  int turn() const { return static_cast<int>(log.turns.size()); }
  int current_turn() const { return in_loop ? turn() : -1; }

  void say(const std::string& text, UtteranceSource source, int turn_index,
           std::optional<DialogueAction> action = std::nullopt) {
    SessionEvent e;
    e.kind = SessionEvent::Kind::CoachUtterance;
    e.text = text;
    e.source = source;
    e.turn_index = turn_index;
    e.action = action;
    channel.send(e);
    TranscriptEntry entry{TranscriptEntry::Speaker::Coach, text, source, turn_index, clock.now()};
    log.transcript.push_back(entry);
    if (!in_loop && source != UtteranceSource::Refusal) log.opening.push_back(entry);
  }

  Status refuse() {
    say(std::string(llm::kRefusalUtterance), UtteranceSource::Refusal, current_turn());
    termination = Termination::ModerationStop;
    return Status::Failure;
  }

  // AwaitCoachee
  Status await_answer(AnswerPhase phase) {
    const double now = clock.now();
    if (!await.active) {
      await = {true, now, now, false};
      SessionEvent e;
      e.kind = SessionEvent::Kind::AwaitingInput;
      e.phase = phase;
      e.turn_index = phase == AnswerPhase::Turn ? turn() : -1;
      channel.send(e);
    }
    if (!channel.connected()) {
      termination = Termination::ClientDisconnect;
      return Status::Failure;
    }
    if (auto in = channel.poll()) {
      in->validate();
      pending = std::move(*in);
      pending_answered = true;
      silent_streak = 0;
      await.active = false;
      if (!pending->transcript.empty()) {
        TranscriptEntry entry{TranscriptEntry::Speaker::Coachee, pending->transcript,
                              UtteranceSource::Scripted, phase == AnswerPhase::Turn ? turn() : -1, now};
        log.transcript.push_back(entry);
        if (phase != AnswerPhase::Turn) log.opening.push_back(entry);
      }
      return Status::Success;
    }
    if (now - await.t0 < config.listen_timeout_s) return Status::Running;
    if (!await.reprompted) {
      say(script.reprompt, UtteranceSource::Reprompt, phase == AnswerPhase::Turn ? turn() : -1);
      await.reprompted = true;
      await.t0 = now;
      return Status::Running;
    }
    await.active = false;
    if (++silent_streak >= config.max_silent_turns) {
      termination = Termination::Timeout;
      return Status::Failure;
    }
    CoacheeTurnInput silent;
    silent.silence_duration_s = now - await.first_t0;
    pending = silent;
    pending_answered = false;
    return Status::Success;
  }

  // Moderate (coachee -> coach)
  Status moderate_input() {
    if (!pending || pending->transcript.empty()) return Status::Success;
    return moderate_text(pending->transcript, ModerationRecord::Direction::Input);
  }

  // Moderate (LLM -> coachee)
  Status moderate_output() {
    if (rec.utterance_source != UtteranceSource::Llm) return Status::Success;
    return moderate_text(reply, ModerationRecord::Direction::Output);
  }

  Status moderate_text(const std::string& text, ModerationRecord::Direction dir) {
    ModerationRecord r;
    r.direction = dir;
    r.text = text;
    r.turn_index = current_turn();
    try {
      const auto v = llm::moderate(llm, text);
      r.flagged = v.flagged;
      r.categories.assign(v.categories.begin(), v.categories.end());
    } catch (const llm::TransportError& e) {
      // fail closed
      r.flagged = true;
      r.service_error = true;
      log_warning(std::string("moderation unavailable, treating text as flagged: ") + e.what());
    }
    log.moderation.push_back(r);
    return r.flagged ? refuse() : Status::Success;
  }

  // Detect
  Status detect() {
    pending_p.reset();
    if (pending->rupture) {
      pending_p = *pending->rupture ? 1.0 : 0.0;
    } else if (detector) {
      pending_p = detector->p_rupture(*pending);
    }
    pending_flag = pending_p && *pending_p >= config.rupture_threshold;
    return Status::Success;
  }

  Status calibrate() {
    if (pending && !pending->valence.empty()) {
      log.baseline = calibrate_baseline(pending->valence);
    } else {
      log_warning("no valence samples during the introduction; using a neutral baseline");
      log.baseline = BaselineValence{0.0, 0};
    }
    history.emplace(script.at(config.exercise).system_context + "\nThe coach opened the exercise by asking: \"" +
                    script.at(config.exercise).first_question + "\"");
    return Status::Success;
  }

  TurnObservation observe_answer(std::optional<DialogueAction> previous, int turn_index) const {
    TurnObservation o;
    o.rupture = pending_flag;
    o.exercise = config.exercise;
    o.speech_duration_s = pending->speech_duration_s;
    o.silence_duration_s = pending->silence_duration_s;
    o.previous_action = previous;
    o.turn_index = turn_index;
    return o;
  }

  Status observe_first() {
    obs = observe_answer(std::nullopt, 0);
    state = encode_state(obs, policy.normalizer());
    if (!pending->transcript.empty()) history->add_human(pending->transcript);
    speech_history.push_back(pending->speech_duration_s);
    in_loop = true;
    return Status::Success;
  }

  // Decide
  Status decide() {
    rec = TurnRecord{};
    rec.turn_index = turn();
    rec.observation = obs;
    rec.state = state;
    rec.q_values = policy.q_values(state);
    rec.epsilon = policy.epsilon();
    rec.action = policy::select_action(rec.q_values, rec.epsilon, rng);
    rec.prompt = std::string(llm::build_prompt(rec.action));
    rec.t_start = clock.now();
    if (config.decision_trace) {
      SessionEvent e;
      e.kind = SessionEvent::Kind::DecisionTrace;
      e.turn_index = rec.turn_index;
      e.action = rec.action;
      e.q_values = rec.q_values;
      channel.send(e);
    }
    return Status::Success;
  }

  void launch() {
    ++rec.llm_attempts;
    auto* backend = &llm;
    auto snapshot = *history;
    auto prompt = rec.prompt;
    call = std::async(config.async_llm ? std::launch::async : std::launch::deferred,
                      [backend, snapshot = std::move(snapshot), prompt = std::move(prompt)] {
                        return backend->generate(snapshot, prompt);
                      });
  }

  // Prompt: LLM completion with retries, then the scripted fallback
  Status prompt() {
    if (!call) {
      if (retry_at >= 0.0 && clock.now() < retry_at) return Status::Running;
      retry_at = -1.0;
      launch();
    }
    if (call->wait_for(std::chrono::seconds(0)) == std::future_status::timeout) return Status::Running;
    try {
      reply = call->get();
      call.reset();
      if (reply.empty()) throw llm::TransportError("empty completion");
      rec.utterance_source = UtteranceSource::Llm;
    } catch (const llm::LlmError& e) {
      call.reset();
      if (rec.llm_attempts <= config.llm_retries) {
        retry_at = clock.now() + config.llm_backoff_s * std::pow(2.0, rec.llm_attempts - 1);
        return Status::Running;
      }
      log_warning(std::string("LLM unavailable after retries, using scripted fallback: ") + e.what());
      reply = script.at(config.exercise).fallback[static_cast<std::size_t>(action_code(rec.action))];
      rec.utterance_source = UtteranceSource::Fallback;
    }
    history->add_human(rec.prompt);
    history->add_ai(reply);
    return Status::Success;
  }

  // Speak
  Status speak_reply() {
    rec.coach_utterance = reply;
    say(reply, rec.utterance_source, rec.turn_index, rec.action);
    return Status::Success;
  }

  DurationStats reward_stats() const {
    const auto& ref = policy.normalizer().speech;
    if (policy.reward_config().stats_source != DurationSource::PerCoacheeRunning || speech_history.size() < 2) {
      return ref;
    }
    const double n = static_cast<double>(speech_history.size());
    const double mean = std::accumulate(speech_history.begin(), speech_history.end(), 0.0) / n;
    double var = 0.0;
    for (double d : speech_history) var += (d - mean) * (d - mean);
    const double sd = std::sqrt(var / (n - 1.0));
    if (!(sd > 0.0)) return ref;
    return DurationStats{mean, sd, DurationSource::PerCoacheeRunning};
  }

  // Reward, transition and online update for the answered turn
  Status learn() {
    const auto& rc = policy.reward_config();
    const double fv = pending->valence.empty() ? 0.0 : valence_deviation(pending->valence, log.baseline, rc.scale_fv);
    const double sd = normalized_speech_duration(pending->speech_duration_s, reward_stats(), rc.scale_sd, rc.clip);
    speech_history.push_back(pending->speech_duration_s);
    rec.reward = compute_reward(fv, sd);

    const int t = rec.turn_index;
    const TurnObservation next = observe_answer(rec.action, t + 1);
    rec.next_state = encode_state(next, policy.normalizer());
    rec.done = t + 1 >= config.turn_limit;
    rec.coachee_transcript = pending->transcript;
    rec.speech_duration_s = pending->speech_duration_s;
    rec.silence_duration_s = pending->silence_duration_s;
    rec.valence = pending->valence;
    rec.answered = pending_answered;
    rec.rupture_probability = pending_p;
    rec.rupture_flag = pending_flag;

    Transition tr{rec.state, rec.action, rec.reward.total, rec.next_state, rec.done,
                  config.coachee_id, config.session_index, t};
    if (auto report = policy.observe(tr)) {
      rec.update_steps = report->gradient_steps;
      rec.update_loss = report->mean_loss;
      rec.update_diagnostic = report->diagnostic;
    }
    rec.t_end = clock.now();
    log.turns.push_back(rec);
    if (!pending->transcript.empty()) history->add_human(pending->transcript);
    obs = next;
    state = rec.next_state;
    rec = TurnRecord{};
    return Status::Success;
  }

  void build_tree() {
    using namespace bt;
    auto act = [](std::string name, std::function<Status()> fn, std::function<void()> reset = {}) {
      return std::make_unique<Action>(std::move(name), std::move(fn), std::move(reset));
    };
    auto await_node = [&](AnswerPhase phase) {
      return act("AwaitCoachee", [this, phase] { return await_answer(phase); });
    };
    const auto& ex = script.at(config.exercise);

    std::vector<NodePtr> body;
    body.push_back(act("Decide", [this] { return decide(); }));
    body.push_back(act("Prompt", [this] { return prompt(); }));
    body.push_back(act("Moderate", [this] { return moderate_output(); }));
    body.push_back(act("Speak", [this] { return speak_reply(); }));
    body.push_back(await_node(AnswerPhase::Turn));
    body.push_back(act("Moderate", [this] { return moderate_input(); }));
    body.push_back(act("Detect", [this] { return detect(); }));
    body.push_back(act("Learn", [this] { return learn(); }));

    std::vector<NodePtr> main;
    main.push_back(act("Speak", [this, &ex] {
      say(ex.intro, UtteranceSource::Scripted, -1);
      return Status::Success;
    }));
    main.push_back(await_node(AnswerPhase::Intro));
    main.push_back(act("Moderate", [this] { return moderate_input(); }));
    main.push_back(act("Calibrate", [this] { return calibrate(); }));
    main.push_back(act("Speak", [this, &ex] {
      say(ex.first_question, UtteranceSource::Scripted, -1);
      return Status::Success;
    }));
    main.push_back(await_node(AnswerPhase::FirstQuestion));
    main.push_back(act("Moderate", [this] { return moderate_input(); }));
    main.push_back(act("Detect", [this] { return detect(); }));
    main.push_back(act("Observe", [this] { return observe_first(); }));
    main.push_back(std::make_unique<While>(
        "Turns",
        std::make_unique<Condition>("CheckTurnLimit", [this] { return turn() < config.turn_limit; }),
        std::make_unique<Sequence>("Turn", std::move(body))));
    main.push_back(act("Speak", [this, &ex] {
      say(ex.outro, UtteranceSource::Scripted, -1);
      termination = Termination::Completed;
      return Status::Success;
    }));
    root = std::make_unique<Sequence>("Session", std::move(main));
  }
};

SessionRunner::SessionRunner(SessionConfig config, const Script& script, CoacheeChannel& channel,
                             SessionPolicy& policy, llm::LlmBackend& llm, Clock& clock,
                             RuptureDetector* detector) {
  config.validate();
  if (config.session_id.empty()) config.session_id = config.coachee_id + "-s" + std::to_string(config.session_index);
  log_.session_id = config.session_id;
  log_.coachee_id = config.coachee_id;
  log_.exercise = config.exercise;
  log_.session_index = config.session_index;
  log_.mode = policy.mode();
  log_.seed = config.seed;
  log_.turn_limit = config.turn_limit;
  log_.started_at = clock.now();
  impl_ = std::make_unique<Impl>(std::move(config), script, channel, policy, llm, clock, detector, log_);
  impl_->build_tree();
}

SessionRunner::~SessionRunner() {
  // an in-flight async completion must not outlive the backend reference
  if (impl_ && impl_->call && impl_->call->valid()) impl_->call->wait();
}

bt::Status SessionRunner::tick() {
  if (finished_) throw SessionError("session already finished");
  ++ticks_;
  Status s;
  try {
    s = impl_->root->tick();
  } catch (const std::exception& e) {
    log_.error = e.what();
    impl_->termination = Termination::Error;
    s = Status::Failure;
  }
  if (s == Status::Running) return s;
  log_.termination = impl_->termination.value_or(Termination::Error);
  if (s == Status::Failure && !impl_->termination && log_.error.empty()) log_.error = "behavior tree failed";
  log_.ended_at = impl_->clock.now();
  finished_ = true;
  SessionEvent end;
  end.kind = SessionEvent::Kind::SessionEnd;
  end.reason = log_.termination;
  try {
    impl_->channel.send(end);
  } catch (const std::exception& e) {
    log_warning(std::string("could not deliver session end: ") + e.what());
  }
  return s;
}

const SessionLog& SessionRunner::run(std::uint64_t max_ticks) {
  const double period = 1.0 / impl_->config.tick_rate_hz;
  double next = impl_->clock.now();
  const std::uint64_t start = ticks_;
  while (!finished_) {
    tick();
    if (finished_ || (max_ticks > 0 && ticks_ - start >= max_ticks)) break;
    next += period;
    impl_->clock.sleep_until(next);
  }
  return log_;
}

SessionLog run_session(const SessionConfig& config, const Script& script, CoacheeChannel& channel,
                       SessionPolicy& policy, llm::LlmBackend& llm, Clock& clock,
                       RuptureDetector* detector) {
  SessionRunner runner(config, script, channel, policy, llm, clock, detector);
  return runner.run();
}

}  // namespace coach::dialogue
