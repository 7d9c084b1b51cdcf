#include "doctest.h"

#include <cmath>
#include <limits>

#include "coach/core/state.hpp"

using namespace coach;

namespace {

const DurationStats kStats{20.0, 10.0, DurationSource::ReferenceCorpus};

StateVector expect(std::initializer_list<double> v) {
  StateVector s;
  std::copy(v.begin(), v.end(), s.values.begin());
  return s;
}

}  // namespace

TEST_CASE("encode_state examples") {
  TurnObservation a{false, ExerciseKind::Gratitude, 20.0, 20.0, DialogueAction::Summarise, 1};
  CHECK(encode_state(a, kStats) == expect({1, 0, 0, 1, 0, 0, 0.0, 0.0, 1, 0, 0}));

  TurnObservation b{true, ExerciseKind::Savouring, 30.0, 20.0, DialogueAction::NewEpisode, 2};
  CHECK(encode_state(b, kStats) == expect({0, 1, 1, 0, 0, 0, 1.0, 0.0, 0, 0, 1}));
}

TEST_CASE("first turn leaves the previous-action block empty") {
  TurnObservation obs{false, ExerciseKind::Accomplishment, 12.0, 1.0, std::nullopt, 0};
  const auto s = encode_state(obs, StateNormalizer{});
  CHECK(s[8] == 0.0);
  CHECK(s[9] == 0.0);
  CHECK(s[10] == 0.0);
}

TEST_CASE("exhaustive one-hot structure and determinism") {
  const StateNormalizer norm;
  for (bool ir : {false, true}) {
    for (auto ex : kAllExercises) {
      for (int prev = -1; prev < 3; ++prev) {
        TurnObservation obs{ir, ex, 17.5, 2.5,
                            prev < 0 ? std::nullopt : std::optional(decode_action(prev)), 3};
        const auto s = encode_state(obs, norm);
        CHECK(s.values.size() == kStateSize);
        CHECK(s[0] + s[1] == 1.0);
        CHECK(s[2] + s[3] + s[4] + s[5] == 1.0);
        CHECK(s[8] + s[9] + s[10] == (prev < 0 ? 0.0 : 1.0));
        CHECK(encode_state(obs, norm) == s);
      }
    }
  }
}

TEST_CASE("durations are clipped to the normalizer bound") {
  TurnObservation obs{false, ExerciseKind::Gratitude, 500.0, 0.0, std::nullopt, 0};
  const auto s = encode_state(obs, kStats);
  CHECK(s[6] == 5.0);
  CHECK(s[7] == -2.0);
}

TEST_CASE("encoding errors") {
  TurnObservation obs{false, ExerciseKind::Gratitude, std::numeric_limits<double>::quiet_NaN(), 1.0,
                      std::nullopt, 0};
  CHECK_THROWS_AS(encode_state(obs, kStats), EncodingError);
  obs.speech_duration_s = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(encode_state(obs, kStats), EncodingError);
  obs.speech_duration_s = -1.0;
  CHECK_THROWS_AS(encode_state(obs, kStats), EncodingError);
}

TEST_CASE("decode_action code table") {
  CHECK(decode_action(0) == DialogueAction::Summarise);
  CHECK(decode_action(1) == DialogueAction::FollowUpQuestion);
  CHECK(decode_action(2) == DialogueAction::NewEpisode);
  CHECK_THROWS_AS(decode_action(3), InvalidArgument);
  CHECK_THROWS_AS(decode_action(-1), InvalidArgument);
  for (auto a : kAllActions) {
    CHECK(decode_action(action_code(a)) == a);
    CHECK(parse_action(to_string(a)) == a);
  }
}

TEST_CASE("exercise names") {
  for (auto e : kAllExercises) CHECK(parse_exercise(to_string(e)) == e);
  try {
    parse_exercise("mindfulness");
    FAIL("expected throw");
  } catch (const InvalidArgument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("savouring") != std::string::npos);
    CHECK(msg.find("one_door_closes_one_door_opens") != std::string::npos);
  }
}
