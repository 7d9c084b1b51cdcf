#include "coach/core/types.hpp"

#include <string>

namespace coach {

namespace {

constexpr std::array<std::string_view, kNumActions> kActionNames = {
    "summarise", "follow_up_question", "new_episode"};
constexpr std::array<std::string_view, kNumExercises> kExerciseNames = {
    "savouring", "gratitude", "accomplishment", "one_door_closes_one_door_opens"};

}  // namespace

DialogueAction decode_action(int index) {
  if (index < 0 || index >= static_cast<int>(kNumActions)) {
    throw InvalidArgument("action index out of range: " + std::to_string(index));
  }
  return static_cast<DialogueAction>(index);
}

ExerciseKind decode_exercise(int index) {
  if (index < 0 || index >= static_cast<int>(kNumExercises)) {
    throw InvalidArgument("exercise index out of range: " + std::to_string(index));
  }
  return static_cast<ExerciseKind>(index);
}

std::string_view to_string(DialogueAction a) { return kActionNames[action_code(a)]; }
std::string_view to_string(ExerciseKind e) { return kExerciseNames[exercise_code(e)]; }

DialogueAction parse_action(std::string_view name) {
  for (std::size_t i = 0; i < kNumActions; ++i) {
    if (kActionNames[i] == name) return static_cast<DialogueAction>(i);
  }
  throw InvalidArgument("unknown action '" + std::string(name) +
                        "' (expected summarise, follow_up_question, new_episode)");
}

ExerciseKind parse_exercise(std::string_view name) {
  for (std::size_t i = 0; i < kNumExercises; ++i) {
    if (kExerciseNames[i] == name) return static_cast<ExerciseKind>(i);
  }
  throw InvalidArgument("unknown exercise '" + std::string(name) +
                        "' (expected one of: savouring, gratitude, accomplishment, "
                        "one_door_closes_one_door_opens)");
}

std::string_view to_string(DurationSource s) {
  return s == DurationSource::ReferenceCorpus ? "reference-corpus" : "per-coachee-running";
}

DurationSource parse_duration_source(std::string_view name) {
  if (name == "reference-corpus") return DurationSource::ReferenceCorpus;
  if (name == "per-coachee-running") return DurationSource::PerCoacheeRunning;
  throw InvalidArgument("unknown duration stats source '" + std::string(name) + "'");
}

}  // namespace coach
