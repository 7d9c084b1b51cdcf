#include "coach/server/frames.hpp"

#include <cctype>
#include <cmath>

using nlohmann::json;

namespace coach::server {

json event_frame(const dialogue::SessionEvent& e) {
  using Kind = dialogue::SessionEvent::Kind;
  json j = {{"v", kFrameVersion}};
  switch (e.kind) {
    case Kind::CoachUtterance:
      j["type"] = "coach_utterance";
      j["text"] = e.text;
      j["source"] = dialogue::to_string(e.source);
      j["turn_index"] = e.turn_index;
      break;
    case Kind::AwaitingInput:
      j["type"] = "awaiting_input";
      j["turn_index"] = e.turn_index;
      j["phase"] = dialogue::to_string(e.phase);
      break;
    case Kind::SessionEnd:
      j["type"] = "session_end";
      j["reason"] = dialogue::to_string(e.reason);
      break;
    case Kind::DecisionTrace:
      j["type"] = "decision_trace";
      j["turn_index"] = e.turn_index;
      j["action"] = e.action ? json(to_string(*e.action)) : json(nullptr);
      j["q_values"] = e.q_values;
      break;
  }
  return j;
}

json error_frame(std::string_view message) {
  return {{"v", kFrameVersion}, {"type", "error"}, {"code", "protocol"}, {"message", message}};
}

ClientUtterance parse_client_frame(std::string_view frame) {
  json j;
  try {
    j = json::parse(frame);
  } catch (const json::exception&) {
    throw ProtocolError("frame is not valid JSON");
  }
  if (!j.is_object()) throw ProtocolError("frame must be a JSON object");
  if (auto v = j.find("v"); v != j.end() && (!v->is_number_integer() || v->get<int>() != kFrameVersion)) {
    throw ProtocolError("unsupported frame version (server speaks " + std::to_string(kFrameVersion) + ")");
  }
  const auto type = j.find("type");
  if (type == j.end() || !type->is_string()) throw ProtocolError("frame has no type");
  if (*type != "coachee_utterance") throw ProtocolError("unknown frame type '" + type->get<std::string>() + "'");
  const auto text = j.find("text");
  if (text == j.end() || !text->is_string()) throw ProtocolError("coachee_utterance needs a text string");

  ClientUtterance u;
  u.text = text->get<std::string>();
  auto number = [&](const char* key) -> std::optional<double> {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) throw ProtocolError(std::string(key) + " must be a number");
    const double v = it->get<double>();
    if (!std::isfinite(v) || v < 0.0) throw ProtocolError(std::string(key) + " must be finite and non-negative");
    return v;
  };
  u.speech_duration_s = number("speech_duration_s");
  u.silence_duration_s = number("silence_duration_s");
  if (const auto it = j.find("valence"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw ProtocolError("valence must be an array of numbers");
    std::vector<double> v;
    for (const auto& x : *it) {
      if (!x.is_number()) throw ProtocolError("valence must be an array of numbers");
      const double d = x.get<double>();
      if (!std::isfinite(d) || d < -1.0 || d > 1.0) throw ProtocolError("valence samples must lie in [-1, 1]");
      v.push_back(d);
    }
    u.valence = std::move(v);
  }
  return u;
}

std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

dialogue::CoacheeTurnInput to_turn_input(const ClientUtterance& u, const TextOnlyModel& model,
                                         double measured_silence_s) {
  dialogue::CoacheeTurnInput in;
  in.transcript = u.text;
  in.speech_duration_s = u.speech_duration_s.value_or(static_cast<double>(word_count(u.text)) / model.words_per_second);
  in.silence_duration_s = u.silence_duration_s.value_or(std::max(0.0, measured_silence_s));
  in.valence = u.valence.value_or(std::vector<double>(static_cast<std::size_t>(model.valence_samples), model.neutral_valence));
  return in;
}

}  // namespace coach::server
