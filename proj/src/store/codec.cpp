#include "coach/store/codec.hpp"

#include <cmath>
#include <limits>

using nlohmann::json;

namespace coach {

namespace {

// JSON has no NaN; non-finite reals travel as null.
json real(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double get_real(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

template <class T>
void get_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace

void to_json(json& j, const StateVector& s) { j = s.values; }

void from_json(const json& j, StateVector& s) {
  if (!j.is_array() || j.size() != kStateSize) {
    throw StoreError("state must be an array of " + std::to_string(kStateSize) + " numbers");
  }
  for (std::size_t i = 0; i < kStateSize; ++i) s.values[i] = j[i].get<double>();
}

void to_json(json& j, const DurationStats& d) {
  j = {{"mean_s", d.mean_s}, {"std_s", d.std_s}, {"source", to_string(d.source)}};
}

void from_json(const json& j, DurationStats& d) {
  d.mean_s = j.at("mean_s").get<double>();
  d.std_s = j.at("std_s").get<double>();
  d.source = parse_duration_source(j.at("source").get<std::string>());
}

void to_json(json& j, const StateNormalizer& n) {
  j = {{"speech", n.speech}, {"silence", n.silence}, {"clip", n.clip}};
}

void from_json(const json& j, StateNormalizer& n) {
  n.speech = j.at("speech").get<DurationStats>();
  n.silence = j.at("silence").get<DurationStats>();
  n.clip = j.at("clip").get<double>();
}

void to_json(json& j, const RewardConfig& r) {
  j = {{"scale_fv", r.scale_fv}, {"scale_sd", r.scale_sd}, {"clip", r.clip},
       {"stats_source", to_string(r.stats_source)}};
}

void from_json(const json& j, RewardConfig& r) {
  get_opt(j, "scale_fv", r.scale_fv);
  get_opt(j, "scale_sd", r.scale_sd);
  get_opt(j, "clip", r.clip);
  if (j.contains("stats_source")) r.stats_source = parse_duration_source(j.at("stats_source").get<std::string>());
}

void to_json(json& j, const RewardComponents& r) {
  j = {{"fv", real(r.fv)}, {"sd", real(r.sd)}, {"total", real(r.total)}};
}

void from_json(const json& j, RewardComponents& r) {
  r.fv = get_real(j.at("fv"));
  r.sd = get_real(j.at("sd"));
  r.total = get_real(j.at("total"));
}

void to_json(json& j, const BaselineValence& b) { j = {{"value", b.value}, {"sample_count", b.sample_count}}; }

void from_json(const json& j, BaselineValence& b) {
  b.value = j.at("value").get<double>();
  b.sample_count = j.at("sample_count").get<int>();
}

void to_json(json& j, const TurnObservation& o) {
  j = {{"rupture", o.rupture},
       {"exercise", to_string(o.exercise)},
       {"speech_duration_s", o.speech_duration_s},
       {"silence_duration_s", o.silence_duration_s},
       {"previous_action", o.previous_action ? json(to_string(*o.previous_action)) : json(nullptr)},
       {"turn_index", o.turn_index}};
}

void from_json(const json& j, TurnObservation& o) {
  o.rupture = j.at("rupture").get<bool>();
  o.exercise = parse_exercise(j.at("exercise").get<std::string>());
  o.speech_duration_s = j.at("speech_duration_s").get<double>();
  o.silence_duration_s = j.at("silence_duration_s").get<double>();
  const auto& p = j.at("previous_action");
  o.previous_action = p.is_null() ? std::nullopt : std::optional(parse_action(p.get<std::string>()));
  o.turn_index = j.at("turn_index").get<int>();
}

void to_json(json& j, const Transition& t) {
  j = {{"coachee_id", t.coachee_id}, {"session_index", t.session_index}, {"turn_index", t.turn_index},
       {"state", t.state},           {"action", action_code(t.action)},   {"reward", t.reward},
       {"next_state", t.next_state}, {"done", t.done}};
}

void from_json(const json& j, Transition& t) {
  t.coachee_id = j.at("coachee_id").get<std::string>();
  t.session_index = j.at("session_index").get<int>();
  t.turn_index = j.at("turn_index").get<int>();
  t.state = j.at("state").get<StateVector>();
  t.action = decode_action(j.at("action").get<int>());
  t.reward = j.at("reward").get<double>();
  t.next_state = j.at("next_state").get<StateVector>();
  t.done = j.at("done").get<bool>();
}

namespace nn {

void to_json(json& j, const LayerSpec& l) {
  j = {{"kind", to_string(l.kind)}, {"in", l.in}, {"out", l.out},
       {"activation", to_string(l.activation)}, {"split", l.split}};
}

void from_json(const json& j, LayerSpec& l) {
  l.kind = parse_layer_kind(j.at("kind").get<std::string>());
  l.in = j.at("in").get<std::size_t>();
  l.out = j.at("out").get<std::size_t>();
  l.activation = parse_activation(j.at("activation").get<std::string>());
  l.split = j.at("split").get<std::size_t>();
}

void to_json(json& j, const NetworkSpec& s) {
  j = {{"layers", s.layers}, {"loss", to_string(s.loss)}, {"seed", s.seed}};
}

void from_json(const json& j, NetworkSpec& s) {
  s.layers = j.at("layers").get<std::vector<LayerSpec>>();
  s.loss = parse_loss(j.at("loss").get<std::string>());
  s.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace nn

namespace policy {

void to_json(json& j, const TrainingMetadata& m) {
  json curve = json::array();
  for (double v : m.loss_curve) curve.push_back(real(v));
  j = {{"corpus_id", m.corpus_id}, {"seed", m.seed}, {"epochs", m.epochs},
       {"gradient_steps", m.gradient_steps}, {"loss_curve", curve}};
}

void from_json(const json& j, TrainingMetadata& m) {
  m.corpus_id = j.at("corpus_id").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.epochs = j.at("epochs").get<std::size_t>();
  m.gradient_steps = j.at("gradient_steps").get<std::size_t>();
  m.loss_curve.clear();
  for (const auto& v : j.at("loss_curve")) m.loss_curve.push_back(get_real(v));
}

}  // namespace policy

namespace rupture {

void to_json(json& j, const NormStats& n) { j = {{"mean", n.mean}, {"std", n.std}}; }

void from_json(const json& j, NormStats& n) {
  n.mean = j.at("mean").get<std::vector<double>>();
  n.std = j.at("std").get<std::vector<double>>();
}

}  // namespace rupture

namespace dialogue {

void to_json(json& j, const TranscriptEntry& e) {
  j = {{"speaker", e.speaker == TranscriptEntry::Speaker::Coach ? "coach" : "coachee"},
       {"text", e.text},
       {"source", to_string(e.source)},
       {"turn_index", e.turn_index},
       {"t", e.t}};
}

void from_json(const json& j, TranscriptEntry& e) {
  const auto sp = j.at("speaker").get<std::string>();
  if (sp != "coach" && sp != "coachee") throw StoreError("unknown speaker '" + sp + "'");
  e.speaker = sp == "coach" ? TranscriptEntry::Speaker::Coach : TranscriptEntry::Speaker::Coachee;
  e.text = j.at("text").get<std::string>();
  e.source = parse_utterance_source(j.at("source").get<std::string>());
  e.turn_index = j.at("turn_index").get<int>();
  e.t = j.at("t").get<double>();
}

void to_json(json& j, const ModerationRecord& m) {
  j = {{"direction", m.direction == ModerationRecord::Direction::Input ? "input" : "output"},
       {"text", m.text},
       {"flagged", m.flagged},
       {"categories", m.categories},
       {"service_error", m.service_error},
       {"turn_index", m.turn_index}};
}

void from_json(const json& j, ModerationRecord& m) {
  const auto d = j.at("direction").get<std::string>();
  if (d != "input" && d != "output") throw StoreError("unknown moderation direction '" + d + "'");
  m.direction = d == "input" ? ModerationRecord::Direction::Input : ModerationRecord::Direction::Output;
  m.text = j.at("text").get<std::string>();
  m.flagged = j.at("flagged").get<bool>();
  m.categories = j.at("categories").get<std::vector<std::string>>();
  m.service_error = j.at("service_error").get<bool>();
  m.turn_index = j.at("turn_index").get<int>();
}

void to_json(json& j, const TurnRecord& t) {
  j = {{"turn_index", t.turn_index},
       {"observation", t.observation},
       {"state", t.state},
       {"q_values", t.q_values},
       {"epsilon", t.epsilon},
       {"action", action_code(t.action)},
       {"action_name", to_string(t.action)},
       {"prompt", t.prompt},
       {"coach_utterance", t.coach_utterance},
       {"utterance_source", to_string(t.utterance_source)},
       {"llm_attempts", t.llm_attempts},
       {"coachee_transcript", t.coachee_transcript},
       {"speech_duration_s", t.speech_duration_s},
       {"silence_duration_s", t.silence_duration_s},
       {"valence", t.valence},
       {"answered", t.answered},
       {"reward", t.reward},
       {"rupture_probability", t.rupture_probability ? json(*t.rupture_probability) : json(nullptr)},
       {"rupture_flag", t.rupture_flag},
       {"next_state", t.next_state},
       {"done", t.done},
       {"update_steps", t.update_steps},
       {"update_loss", real(t.update_loss)},
       {"update_diagnostic", t.update_diagnostic ? json(*t.update_diagnostic) : json(nullptr)},
       {"t_start", t.t_start},
       {"t_end", t.t_end}};
}

void from_json(const json& j, TurnRecord& t) {
  t.turn_index = j.at("turn_index").get<int>();
  t.observation = j.at("observation").get<TurnObservation>();
  t.state = j.at("state").get<StateVector>();
  const auto q = j.at("q_values").get<std::vector<double>>();
  if (q.size() != kNumActions) throw StoreError("q_values must have one entry per action");
  std::copy(q.begin(), q.end(), t.q_values.begin());
  t.epsilon = j.at("epsilon").get<double>();
  t.action = decode_action(j.at("action").get<int>());
  t.prompt = j.at("prompt").get<std::string>();
  t.coach_utterance = j.at("coach_utterance").get<std::string>();
  t.utterance_source = parse_utterance_source(j.at("utterance_source").get<std::string>());
  t.llm_attempts = j.at("llm_attempts").get<int>();
  t.coachee_transcript = j.at("coachee_transcript").get<std::string>();
  t.speech_duration_s = j.at("speech_duration_s").get<double>();
  t.silence_duration_s = j.at("silence_duration_s").get<double>();
  t.valence = j.at("valence").get<std::vector<double>>();
  t.answered = j.at("answered").get<bool>();
  t.reward = j.at("reward").get<RewardComponents>();
  const auto& p = j.at("rupture_probability");
  t.rupture_probability = p.is_null() ? std::nullopt : std::optional(p.get<double>());
  t.rupture_flag = j.at("rupture_flag").get<bool>();
  t.next_state = j.at("next_state").get<StateVector>();
  t.done = j.at("done").get<bool>();
  t.update_steps = j.at("update_steps").get<std::size_t>();
  t.update_loss = get_real(j.at("update_loss"));
  const auto& d = j.at("update_diagnostic");
  t.update_diagnostic = d.is_null() ? std::nullopt : std::optional(d.get<std::string>());
  t.t_start = j.at("t_start").get<double>();
  t.t_end = j.at("t_end").get<double>();
}

void to_json(json& j, const SessionConfig& c) {
  j = {{"session_id", c.session_id},
       {"coachee_id", c.coachee_id},
       {"exercise", to_string(c.exercise)},
       {"session_index", c.session_index},
       {"turn_limit", c.turn_limit},
       {"tick_rate_hz", c.tick_rate_hz},
       {"listen_timeout_s", c.listen_timeout_s},
       {"max_silent_turns", c.max_silent_turns},
       {"rupture_threshold", c.rupture_threshold},
       {"llm_retries", c.llm_retries},
       {"llm_backoff_s", c.llm_backoff_s},
       {"async_llm", c.async_llm},
       {"decision_trace", c.decision_trace},
       {"seed", c.seed}};
}

void from_json(const json& j, SessionConfig& c) {
  if (!j.is_object()) throw StoreError("session config must be a JSON object");
  get_opt(j, "session_id", c.session_id);
  get_opt(j, "coachee_id", c.coachee_id);
  if (j.contains("exercise")) c.exercise = parse_exercise(j.at("exercise").get<std::string>());
  get_opt(j, "session_index", c.session_index);
  get_opt(j, "turn_limit", c.turn_limit);
  get_opt(j, "tick_rate_hz", c.tick_rate_hz);
  get_opt(j, "listen_timeout_s", c.listen_timeout_s);
  get_opt(j, "max_silent_turns", c.max_silent_turns);
  get_opt(j, "rupture_threshold", c.rupture_threshold);
  get_opt(j, "llm_retries", c.llm_retries);
  get_opt(j, "llm_backoff_s", c.llm_backoff_s);
  get_opt(j, "async_llm", c.async_llm);
  get_opt(j, "decision_trace", c.decision_trace);
  get_opt(j, "seed", c.seed);
}

}  // namespace dialogue

}  // namespace coach
