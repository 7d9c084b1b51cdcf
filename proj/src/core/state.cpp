#include "coach/core/state.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace coach {

namespace {

double zscore(double value, const DurationStats& stats, double clip, const char* what) {
  if (!std::isfinite(value)) {
    throw EncodingError(std::string("non-finite ") + what + " duration");
  }
  if (value < 0.0) {
    throw EncodingError(std::string("negative ") + what + " duration: " + std::to_string(value));
  }
  if (!(stats.std_s > 0.0) || !std::isfinite(stats.mean_s)) {
    throw EncodingError(std::string("invalid ") + what + " normalizer");
  }
  return std::clamp((value - stats.mean_s) / stats.std_s, -clip, clip);
}

}  // namespace

StateVector encode_state(const TurnObservation& obs, const StateNormalizer& normalizer) {
  using namespace state_layout;
  StateVector s;
  s[kRupture + (obs.rupture ? 1 : 0)] = 1.0;
  s[kExercise + exercise_code(obs.exercise)] = 1.0;
  s[kSpeech] = zscore(obs.speech_duration_s, normalizer.speech, normalizer.clip, "speech");
  s[kSilence] = zscore(obs.silence_duration_s, normalizer.silence, normalizer.clip, "silence");
  if (obs.previous_action) s[kPrevious + action_code(*obs.previous_action)] = 1.0;
  return s;
}

StateVector encode_state(const TurnObservation& obs, const DurationStats& normalizer) {
  return encode_state(obs, StateNormalizer{normalizer, normalizer, 5.0});
}

}  // namespace coach
