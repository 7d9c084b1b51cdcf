#pragma once

// WebSocket frame schema shared with the browser client. Every frame is a
// JSON object with "v" (schema version) and "type".

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "coach/dialogue/session.hpp"

namespace coach::server {

inline constexpr int kFrameVersion = 1;

class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// coach_utterance | awaiting_input | session_end | decision_trace
nlohmann::json event_frame(const dialogue::SessionEvent& event);
nlohmann::json error_frame(std::string_view message);

/// Client -> server: {"v":1,"type":"coachee_utterance","text":...} with
/// optional speech_duration_s, silence_duration_s and valence samples.
struct ClientUtterance {
  std::string text;
  std::optional<double> speech_duration_s;
  std::optional<double> silence_duration_s;
  std::optional<std::vector<double>> valence;
};

ClientUtterance parse_client_frame(std::string_view frame);

struct TextOnlyModel {
  double words_per_second = 2.5;
  double neutral_valence = 0.0;
  int valence_samples = 10;
};

std::size_t word_count(std::string_view text);

/// Fills whatever the client did not measure: speech from the word count,
/// valence from a neutral constant stream, silence from `measured_silence_s`.
dialogue::CoacheeTurnInput to_turn_input(const ClientUtterance& u, const TextOnlyModel& model,
                                         double measured_silence_s);

}  // namespace coach::server
