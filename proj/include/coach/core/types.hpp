#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "coach/core/error.hpp"

namespace coach {

enum class ExerciseKind : int {
  Savouring = 0,
  Gratitude = 1,
  Accomplishment = 2,
  OneDoorClosesOneDoorOpens = 3,
};

inline constexpr std::size_t kNumExercises = 4;
inline constexpr std::array<ExerciseKind, kNumExercises> kAllExercises = {
    ExerciseKind::Savouring, ExerciseKind::Gratitude, ExerciseKind::Accomplishment,
    ExerciseKind::OneDoorClosesOneDoorOpens};

enum class DialogueAction : int {
  Summarise = 0,
  FollowUpQuestion = 1,
  NewEpisode = 2,
};

inline constexpr std::size_t kNumActions = 3;
inline constexpr std::array<DialogueAction, kNumActions> kAllActions = {
    DialogueAction::Summarise, DialogueAction::FollowUpQuestion, DialogueAction::NewEpisode};

constexpr int action_code(DialogueAction a) { return static_cast<int>(a); }
constexpr int exercise_code(ExerciseKind e) { return static_cast<int>(e); }

/// Inverse of action_code. Throws InvalidArgument outside {0,1,2}.
DialogueAction decode_action(int index);
ExerciseKind decode_exercise(int index);

std::string_view to_string(DialogueAction a);
std::string_view to_string(ExerciseKind e);

// Accepts the canonical snake_case names ("summarise", "gratitude", ...).
DialogueAction parse_action(std::string_view name);
ExerciseKind parse_exercise(std::string_view name);

/// Raw per-turn content gathered at the end of a coachee answer.
struct TurnObservation {
  bool rupture = false;
  ExerciseKind exercise = ExerciseKind::Savouring;
  double speech_duration_s = 0.0;
  double silence_duration_s = 0.0;
  std::optional<DialogueAction> previous_action;
  int turn_index = 0;

  bool operator==(const TurnObservation&) const = default;
};

inline constexpr std::size_t kStateSize = 11;

/// Policy input. Layout: IR one-hot (2) | exercise one-hot (4) |
/// speech z (1) | silence z (1) | previous-action one-hot (3).
struct StateVector {
  std::array<double, kStateSize> values{};

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  bool operator==(const StateVector&) const = default;
};

struct Transition {
  StateVector state;
  DialogueAction action = DialogueAction::Summarise;
  double reward = 0.0;
  StateVector next_state;
  bool done = false;
  std::string coachee_id;
  int session_index = 1;
  int turn_index = 0;

  bool operator==(const Transition&) const = default;
};

enum class DurationSource { ReferenceCorpus, PerCoacheeRunning };

struct DurationStats {
  double mean_s = 0.0;
  double std_s = 1.0;
  DurationSource source = DurationSource::ReferenceCorpus;

  bool operator==(const DurationStats&) const = default;
};

std::string_view to_string(DurationSource s);
DurationSource parse_duration_source(std::string_view name);

}  // namespace coach
