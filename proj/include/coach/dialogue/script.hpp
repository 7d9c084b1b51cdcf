#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>

#include "coach/core/types.hpp"

namespace coach::dialogue {

class ScriptError : public Error {
 public:
  using Error::Error;
};

enum class ScriptPhase { Intro, FirstQuestion, Outro };

std::string_view to_string(ScriptPhase p);
ScriptPhase parse_phase(std::string_view name);  // "intro", "first-question", "outro"

struct ExerciseScript {
  std::string system_context;
  std::string intro;
  std::string first_question;
  std::string outro;
  std::array<std::string, kNumActions> fallback;  // by action code
};

/// Pre-scripted utterances for every exercise, loaded and validated at startup.
struct Script {
  int version = 1;
  std::string reprompt;
  std::array<ExerciseScript, kNumExercises> exercises;

  const ExerciseScript& at(ExerciseKind e) const { return exercises[static_cast<std::size_t>(exercise_code(e))]; }
};

/// Throws ScriptError naming the first missing or empty entry.
Script load_script(const std::filesystem::path& path);
Script parse_script(std::string_view json_text);

/// The copy shipped in the data directory.
const Script& default_script();
std::filesystem::path data_dir();

std::string scripted_line(const Script& script, ExerciseKind exercise, ScriptPhase phase);
std::string scripted_line(const Script& script, ExerciseKind exercise, std::string_view phase);

}  // namespace coach::dialogue
