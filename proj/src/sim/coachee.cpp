#include "coach/sim/coachee.hpp"

#include <algorithm>
#include <cmath>

namespace coach::sim {

namespace {

// Cosmetic; only the numeric features drive the reward.
const std::array<std::vector<std::string>, kNumExercises> kTopics = {{
    {"a long walk by the river", "dinner with my sister", "the first coffee in the morning",
     "listening to an old record", "a sunny afternoon in the park"},
    {"my neighbour helped me carry the shopping", "a friend called to check on me",
     "my colleague covered my shift", "I got a kind note from my teacher", "my family cooked for me"},
    {"I finished a report I had been avoiding", "I ran five kilometres", "I fixed the kitchen shelf",
     "I passed my driving theory test", "I learned a new song on the guitar"},
    {"I did not get the job but found a better course", "my trip was cancelled so I visited my parents",
     "the club closed and I joined a choir", "I moved flats and met new neighbours",
     "the project ended and I started painting"},
}};

const std::array<std::string, kNumActions> kLeads = {
    "Yes, that is right, ", "Well, thinking about it more, ", "Another thing that comes to mind is that "};

const std::vector<std::string> kTails = {
    "and it made me feel calm.", "and I keep thinking about it.", "which was nice.",
    "and I am glad it happened.", "I guess that is it."};

template <class T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

double positive_normal(double mean, double sd, std::mt19937_64& rng) {
  if (sd <= 0.0) return std::max(0.0, mean);
  return std::max(0.0, std::normal_distribution<double>(mean, sd)(rng));
}

std::vector<double> valence_samples(const CoacheeProfile& p, double level, std::mt19937_64& rng) {
  const double offset = p.valence_noise > 0.0 ? std::normal_distribution<double>(0.0, p.valence_noise)(rng) : 0.0;
  std::vector<double> out(static_cast<std::size_t>(p.valence_samples));
  for (auto& v : out) {
    const double jitter = p.sample_noise > 0.0 ? std::normal_distribution<double>(0.0, p.sample_noise)(rng) : 0.0;
    v = std::clamp(level + offset + jitter, -1.0, 1.0);
  }
  return out;
}

double session_level(const CoacheeProfile& p, int session_index) {
  return p.base_valence + p.engagement_drift * (session_index - 1);
}

}  // namespace

void CoacheeProfile::validate() const {
  auto nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
  if (id.empty()) throw SimError("profile id must not be empty");
  if (!std::isfinite(base_valence) || base_valence < -1.0 || base_valence > 1.0) {
    throw SimError("profile " + id + ": base_valence must lie in [-1, 1]");
  }
  if (!nonneg(talk_mean_s) || !nonneg(talk_std_s) || !nonneg(silence_mean_s) || !nonneg(silence_std_s)) {
    throw SimError("profile " + id + ": durations must be non-negative");
  }
  if (!nonneg(valence_noise) || !nonneg(sample_noise)) throw SimError("profile " + id + ": noise must be non-negative");
  if (valence_samples < 1) throw SimError("profile " + id + ": needs at least one valence sample per answer");
  if (!(rupture_rate >= 0.0 && rupture_rate <= 1.0)) throw SimError("profile " + id + ": rupture_rate must be in [0, 1]");
  for (const auto& a : affinity) {
    if (!std::isfinite(a.valence) || !std::isfinite(a.speech_s)) throw SimError("profile " + id + ": non-finite affinity");
  }
}

dialogue::CoacheeTurnInput coachee_respond(const CoacheeProfile& p, std::optional<DialogueAction> action,
                                           ExerciseKind exercise, int session_index, std::mt19937_64& rng) {
  const ActionAffinity aff = action ? p.affinity[static_cast<std::size_t>(action_code(*action))] : ActionAffinity{};
  dialogue::CoacheeTurnInput in;
  in.speech_duration_s = positive_normal(p.talk_mean_s + aff.speech_s, p.talk_std_s, rng);
  in.silence_duration_s = positive_normal(p.silence_mean_s, p.silence_std_s, rng);
  in.valence = valence_samples(p, session_level(p, session_index) + aff.valence, rng);
  in.rupture = std::bernoulli_distribution(p.rupture_rate)(rng);
  const auto& topic = pick(kTopics[static_cast<std::size_t>(exercise_code(exercise))], rng);
  const std::string lead = action ? kLeads[static_cast<std::size_t>(action_code(*action))] : std::string("I think ");
  in.transcript = lead + topic + " " + pick(kTails, rng);
  return in;
}

dialogue::CoacheeTurnInput coachee_greet(const CoacheeProfile& p, int session_index, std::mt19937_64& rng) {
  dialogue::CoacheeTurnInput in;
  in.speech_duration_s = positive_normal(2.0, 0.5, rng);
  in.silence_duration_s = positive_normal(p.silence_mean_s, p.silence_std_s, rng);
  in.valence = valence_samples(p, session_level(p, session_index) + p.intro_lift, rng);
  in.rupture = false;
  in.transcript = "Hello, my name is " + p.id + ".";
  return in;
}

SimulatedChannel::SimulatedChannel(CoacheeProfile profile, ExerciseKind exercise, int session_index,
                                   std::uint64_t seed)
    : profile_(std::move(profile)), exercise_(exercise), session_index_(session_index), rng_(seed) {
  profile_.validate();
}

void SimulatedChannel::send(const dialogue::SessionEvent& e) {
  using Kind = dialogue::SessionEvent::Kind;
  if (e.kind == Kind::CoachUtterance && e.action) last_action_ = e.action;
  if (e.kind != Kind::AwaitingInput) return;
  switch (e.phase) {
    case dialogue::AnswerPhase::Intro: ready_ = coachee_greet(profile_, session_index_, rng_); break;
    case dialogue::AnswerPhase::FirstQuestion:
      ready_ = coachee_respond(profile_, std::nullopt, exercise_, session_index_, rng_);
      break;
    case dialogue::AnswerPhase::Turn:
      ready_ = coachee_respond(profile_, last_action_, exercise_, session_index_, rng_);
      break;
  }
}

std::optional<dialogue::CoacheeTurnInput> SimulatedChannel::poll() {
  auto out = std::move(ready_);
  ready_.reset();
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  // splitmix64 over the combined inputs
  std::uint64_t x = base;
  for (std::uint64_t v : {a, b, c}) {
    x += 0x9E3779B97F4A7C15ULL + v * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    x ^= x >> 31;
  }
  return x;
}

std::vector<CoacheeProfile> make_population(const PopulationConfig& c) {
  std::mt19937_64 rng(derive_seed(c.seed, 0x5157));
  std::normal_distribution<double> talk(c.talk_mean_s, c.talk_mean_spread_s);
  std::normal_distribution<double> base(0.1, c.base_valence_spread);
  const std::size_t start = std::uniform_int_distribution<std::size_t>(0, kNumActions - 1)(rng);
  std::vector<CoacheeProfile> out;
  for (std::size_t i = 0; i < c.size; ++i) {
    CoacheeProfile p;
    char id[16];
    std::snprintf(id, sizeof id, "%02zu", i + 1);
    p.id = c.id_prefix + id;
    p.base_valence = std::clamp(base(rng), -0.6, 0.6);
    p.talk_mean_s = std::max(5.0, talk(rng));
    const std::size_t fav = (start + i) % kNumActions;
    for (std::size_t a = 0; a < kNumActions; ++a) {
      p.affinity[a] = a == fav ? ActionAffinity{c.favourite_valence, c.favourite_speech_s}
                               : ActionAffinity{c.other_valence, c.other_speech_s};
    }
    p.seed = derive_seed(c.seed, 0xC0AC, i);
    out.push_back(p);
  }
  return out;
}

DialogueAction favourite_action(const CoacheeProfile& p) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < kNumActions; ++a) {
    if (p.affinity[a].valence > p.affinity[best].valence) best = a;
  }
  return decode_action(static_cast<int>(best));
}

}  // namespace coach::sim
