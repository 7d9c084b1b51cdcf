#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coach/sim/corpus.hpp"

namespace coach::sim {

enum class Arm { Adaptive, GenericFrozen };
std::string_view to_string(Arm a);
Arm parse_arm(std::string_view name);

struct StudyConfig {
  std::vector<CoacheeProfile> population;
  int sessions = 4;
  std::vector<ExerciseKind> exercise_order{kAllExercises.begin(), kAllExercises.end()};
  std::vector<Arm> arms{Arm::Adaptive, Arm::GenericFrozen};
  policy::OnlineConfig online;
  int turn_limit = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// 17 preference-structured coachees, 4 sessions, both arms.
StudyConfig default_study(std::uint64_t seed = 0);

struct CoacheeSessionRow {
  std::string coachee_id;
  int session_index = 1;
  ExerciseKind exercise = ExerciseKind::Savouring;
  double mean_reward = 0.0;
  std::size_t turns = 0;
  std::array<std::size_t, kNumActions> actions{};
  std::size_t favourite_choices = 0;
  dialogue::Termination termination = dialogue::Termination::Completed;
};

struct SessionStat {
  int session_index = 1;
  double mean = 0.0;  // pooled over every turn of every coachee
  double std = 0.0;
  std::size_t turns = 0;
  std::array<std::size_t, kNumActions> actions{};
};

struct ArmReport {
  Arm arm = Arm::Adaptive;
  std::vector<CoacheeSessionRow> rows;
  std::vector<SessionStat> sessions;
  double slope = 0.0;  // least-squares slope of pooled mean reward over session index
  std::vector<std::string> errors;

  const SessionStat& session(int index) const;
};

struct StudyReport {
  std::uint64_t seed = 0;
  std::vector<ArmReport> arms;
  std::optional<CalibrationStats> calibration;
  bool flagged = false;  // some session ended in an error

  const ArmReport& arm(Arm a) const;
};

/// Runs every coachee through every session of every arm. Arms share the
/// coachees' response streams so their contrasts are paired.
StudyReport run_study(const StudyConfig& config, const policy::PolicyCheckpoint& generic,
                      std::shared_ptr<const std::vector<Transition>> generic_replay);

struct ReplicationSummary {
  std::vector<StudyReport> reports;
  std::size_t trend_wins = 0;     // adaptive session 4 > adaptive session 2
  std::size_t arm_wins = 0;       // adaptive session 4 > generic session 4
  double trend_sign_test_p = 1.0; // one-sided
};

/// `replications` studies whose seeds derive from config.seed.
ReplicationSummary run_replications(const StudyConfig& config, std::size_t replications,
                                    const policy::PolicyCheckpoint& generic,
                                    std::shared_ptr<const std::vector<Transition>> generic_replay,
                                    int late_session = 4, int early_session = 2);

/// P(X >= successes) for X ~ Binomial(n, 1/2).
double sign_test_p(std::size_t successes, std::size_t n);

/// Least-squares slope of y over x = 1..n.
double trend_slope(std::span<const double> y);

}  // namespace coach::sim
