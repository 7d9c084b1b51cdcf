#pragma once

#include "coach/core/types.hpp"

namespace coach {

class EncodingError : public Error {
 public:
  using Error::Error;
};

/// Duration normalization used for the two duration slots of the state.
/// Speech and silence have very different scales, so each has its own stats.
struct StateNormalizer {
  DurationStats speech{20.0, 10.0, DurationSource::ReferenceCorpus};
  DurationStats silence{2.0, 1.0, DurationSource::ReferenceCorpus};
  double clip = 5.0;

  bool operator==(const StateNormalizer&) const = default;
};

namespace state_layout {
inline constexpr std::size_t kRupture = 0;    // [0]=absent, [1]=present
inline constexpr std::size_t kExercise = 2;   // 4 slots
inline constexpr std::size_t kSpeech = 6;
inline constexpr std::size_t kSilence = 7;
inline constexpr std::size_t kPrevious = 8;   // 3 slots, all zero on the first turn
}  // namespace state_layout

StateVector encode_state(const TurnObservation& obs, const StateNormalizer& normalizer);

// Same encoding with one stats block shared by both duration slots.
StateVector encode_state(const TurnObservation& obs, const DurationStats& normalizer);

}  // namespace coach
