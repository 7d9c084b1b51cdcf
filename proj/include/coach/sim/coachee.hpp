#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "coach/dialogue/session.hpp"

namespace coach::sim {

class SimError : public Error {
 public:
  using Error::Error;
};

/// How one action shifts the coachee's answer.
struct ActionAffinity {
  double valence = 0.0;   // added to every valence sample
  double speech_s = 0.0;  // added to the mean speech duration

  bool operator==(const ActionAffinity&) const = default;
};

struct CoacheeProfile {
  std::string id = "P01";
  double base_valence = 0.1;
  double intro_lift = 0.25;       // extra valence while greeting; sets the baseline
  double talk_mean_s = 20.0;
  double talk_std_s = 6.0;
  double silence_mean_s = 2.0;
  double silence_std_s = 0.8;
  std::array<ActionAffinity, kNumActions> affinity{};
  double engagement_drift = 0.0;  // valence change per session after the first
  double valence_noise = 0.1;     // per-answer offset
  double sample_noise = 0.05;     // per-sample jitter
  int valence_samples = 10;
  double rupture_rate = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const CoacheeProfile&) const = default;
};

/// The coachee's answer to `action` (nullopt for the scripted first question).
dialogue::CoacheeTurnInput coachee_respond(const CoacheeProfile& profile, std::optional<DialogueAction> action,
                                           ExerciseKind exercise, int session_index, std::mt19937_64& rng);

/// Answer to the scripted introduction; its valence calibrates the baseline.
dialogue::CoacheeTurnInput coachee_greet(const CoacheeProfile& profile, int session_index, std::mt19937_64& rng);

/// Plays a profile against a session runner.
class SimulatedChannel : public dialogue::CoacheeChannel {
 public:
  SimulatedChannel(CoacheeProfile profile, ExerciseKind exercise, int session_index, std::uint64_t seed);

  void send(const dialogue::SessionEvent& event) override;
  std::optional<dialogue::CoacheeTurnInput> poll() override;

 private:
  CoacheeProfile profile_;
  ExerciseKind exercise_;
  int session_index_;
  std::mt19937_64 rng_;
  std::optional<DialogueAction> last_action_;
  std::optional<dialogue::CoacheeTurnInput> ready_;
};

/// Seeded preference-structured population: each profile prefers one action
/// (favourites dealt round robin from a shuffled start) and dislikes the rest.
struct PopulationConfig {
  std::size_t size = 5;
  std::string id_prefix = "P";
  double favourite_valence = 0.3;
  double favourite_speech_s = 10.0;
  double other_valence = -0.15;
  double other_speech_s = -5.0;
  double talk_mean_s = 20.0;
  double talk_mean_spread_s = 3.0;  // std of per-profile talkativeness
  double base_valence_spread = 0.15;
  std::uint64_t seed = 0;
};

std::vector<CoacheeProfile> make_population(const PopulationConfig& config);

/// Index of the action with the highest valence affinity.
DialogueAction favourite_action(const CoacheeProfile& profile);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace coach::sim
