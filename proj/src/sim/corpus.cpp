#include "coach/sim/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coach/core/state.hpp"
#include "coach/reward/reward.hpp"

namespace coach::sim {

namespace {

DurationStats fit(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  const double sd = xs.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  return {mean, sd > 0.0 ? sd : 1.0, DurationSource::ReferenceCorpus};
}

struct RawTurn {
  TurnObservation obs;
  DialogueAction action;
  dialogue::CoacheeTurnInput answer;
  BaselineValence baseline;
  bool done;
  std::string coachee_id;
  int session_index;
};

}  // namespace

CalibrationStats calibration_stats(std::span<const double> r) {
  CalibrationStats c;
  c.count = r.size();
  if (r.empty()) return c;
  const double n = static_cast<double>(r.size());
  c.mean = std::accumulate(r.begin(), r.end(), 0.0) / n;
  double var = 0.0;
  for (double x : r) var += (x - c.mean) * (x - c.mean);
  c.std = r.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  std::vector<double> s(r.begin(), r.end());
  std::sort(s.begin(), s.end());
  c.median = s.size() % 2 ? s[s.size() / 2] : 0.5 * (s[s.size() / 2 - 1] + s[s.size() / 2]);
  return c;
}

Corpus generate_corpus(std::span<const CoacheeProfile> profiles, const CorpusConfig& config) {
  if (profiles.empty()) throw SimError("corpus generation needs at least one profile");
  if (config.turn_limit < 1 || config.sessions_per_profile < 1) throw SimError("corpus needs turns and sessions");
  validate(config.reward);

  std::vector<RawTurn> raw;
  std::vector<double> speech, silence;
  for (const auto& p : profiles) {
    p.validate();
    for (std::size_t s = 1; s <= config.sessions_per_profile; ++s) {
      const int session = static_cast<int>(s);
      const ExerciseKind exercise = kAllExercises[(s - 1) % kNumExercises];
      std::mt19937_64 rng(derive_seed(config.seed, p.seed, s));
      const auto greeting = coachee_greet(p, session, rng);
      const auto baseline = calibrate_baseline(greeting.valence);
      auto answer = coachee_respond(p, std::nullopt, exercise, session, rng);
      speech.push_back(answer.speech_duration_s);
      silence.push_back(answer.silence_duration_s);
      TurnObservation obs{*answer.rupture, exercise, answer.speech_duration_s, answer.silence_duration_s,
                          std::nullopt, 0};
      std::uniform_int_distribution<int> uniform(0, static_cast<int>(kNumActions) - 1);
      for (int t = 0; t < config.turn_limit; ++t) {
        const DialogueAction a = decode_action(uniform(rng));
        answer = coachee_respond(p, a, exercise, session, rng);
        speech.push_back(answer.speech_duration_s);
        silence.push_back(answer.silence_duration_s);
        raw.push_back({obs, a, answer, baseline, t + 1 == config.turn_limit, p.id, session});
        obs = {*answer.rupture, exercise, answer.speech_duration_s, answer.silence_duration_s, a, t + 1};
      }
    }
  }

  Corpus c;
  c.normalizer.speech = fit(speech);
  c.normalizer.silence = fit(silence);
  std::vector<double> rewards;
  for (const auto& r : raw) {
    const auto& rc = config.reward;
    const double fv = valence_deviation(r.answer.valence, r.baseline, rc.scale_fv);
    const double sd = normalized_speech_duration(r.answer.speech_duration_s, c.normalizer.speech, rc.scale_sd, rc.clip);
    const auto comp = compute_reward(fv, sd);
    TurnObservation next{*r.answer.rupture, r.obs.exercise, r.answer.speech_duration_s,
                         r.answer.silence_duration_s, r.action, r.obs.turn_index + 1};
    c.transitions.push_back({encode_state(r.obs, c.normalizer), r.action, comp.total, encode_state(next, c.normalizer),
                             r.done, r.coachee_id, r.session_index, r.obs.turn_index});
    c.components.push_back(comp);
    rewards.push_back(comp.total);
  }
  c.calibration = calibration_stats(rewards);
  return c;
}

Corpus default_corpus(std::uint64_t seed) {
  PopulationConfig pop;
  pop.size = 5;
  pop.seed = seed;
  const auto profiles = make_population(pop);
  CorpusConfig cfg;
  cfg.seed = seed;
  return generate_corpus(profiles, cfg);
}

}  // namespace coach::sim
