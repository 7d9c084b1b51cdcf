#include "coach/dialogue/script.hpp"

#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

#include "json.hpp"

#ifndef COACH_DATA_DIR
#define COACH_DATA_DIR "data"
#endif

namespace coach::dialogue {

std::string_view to_string(ScriptPhase p) {
  switch (p) {
    case ScriptPhase::Intro: return "intro";
    case ScriptPhase::FirstQuestion: return "first-question";
    case ScriptPhase::Outro: return "outro";
  }
  return "?";
}

ScriptPhase parse_phase(std::string_view name) {
  for (auto p : {ScriptPhase::Intro, ScriptPhase::FirstQuestion, ScriptPhase::Outro}) {
    if (to_string(p) == name) return p;
  }
  throw ScriptError("unknown script phase '" + std::string(name) +
                    "' (expected intro, first-question or outro)");
}

namespace {

std::string required(const nlohmann::json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key) || !obj[key].is_string() ||
      obj[key].get<std::string>().empty()) {
    throw ScriptError("script entry missing or empty: " + where + key);
  }
  return obj[key].get<std::string>();
}

}  // namespace

Script parse_script(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ScriptError(std::string("script is not valid JSON: ") + e.what());
  }
  Script s;
  s.version = doc.value("version", 1);
  if (s.version != 1) throw ScriptError("unsupported script version " + std::to_string(s.version));
  s.reprompt = required(doc, "reprompt", "");
  if (!doc.contains("exercises") || !doc["exercises"].is_object()) {
    throw ScriptError("script entry missing: exercises");
  }
  for (ExerciseKind e : kAllExercises) {
    const std::string name(to_string(e));
    if (!doc["exercises"].contains(name)) throw ScriptError("script entry missing: exercises." + name);
    const auto& ex = doc["exercises"][name];
    const std::string where = "exercises." + name + ".";
    auto& out = s.exercises[static_cast<std::size_t>(exercise_code(e))];
    out.system_context = required(ex, "system_context", where);
    out.intro = required(ex, "intro", where);
    out.first_question = required(ex, "first_question", where);
    out.outro = required(ex, "outro", where);
    if (!ex.contains("fallback")) throw ScriptError("script entry missing: " + where + "fallback");
    for (DialogueAction a : kAllActions) {
      out.fallback[static_cast<std::size_t>(action_code(a))] =
          required(ex["fallback"], std::string(to_string(a)), where + "fallback.");
    }
  }
  return s;
}

Script load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScriptError("cannot open script file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_script(buf.str());
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("COACH_DATA_DIR")) return env;
  return COACH_DATA_DIR;
}

const Script& default_script() {
  static const Script script = load_script(data_dir() / "script.json");
  return script;
}

std::string scripted_line(const Script& script, ExerciseKind exercise, ScriptPhase phase) {
  const auto& ex = script.at(exercise);
  switch (phase) {
    case ScriptPhase::Intro: return ex.intro;
    case ScriptPhase::FirstQuestion: return ex.first_question;
    case ScriptPhase::Outro: return ex.outro;
  }
  throw ScriptError("invalid script phase");
}

std::string scripted_line(const Script& script, ExerciseKind exercise, std::string_view phase) {
  return scripted_line(script, exercise, parse_phase(phase));
}

}  // namespace coach::dialogue
