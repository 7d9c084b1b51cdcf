#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <unistd.h>

#include "coach/core/log.hpp"

#include "coach/reward/reward.hpp"
#include "coach/sim/report.hpp"
#include "coach/sim/study.hpp"

using namespace coach;
using namespace coach::sim;

namespace {

struct Generic {
  Corpus corpus = default_corpus(0);
  policy::PolicyCheckpoint ck;
  std::shared_ptr<const std::vector<Transition>> replay;

  Generic() {
    policy::BatchConfig bc;
    bc.train.epochs = 60;
    ck = policy::train_batch(corpus.transitions, policy::Algorithm::Dqn, bc, 0.9, corpus.normalizer);
    replay = std::make_shared<const std::vector<Transition>>(corpus.transitions);
  }
};

const Generic& generic() {
  static const Generic g;
  return g;
}

double mean_speech(const CoacheeProfile& p, DialogueAction a, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += coachee_respond(p, a, ExerciseKind::Gratitude, 1, rng).speech_duration_s;
  return s / n;
}

}  // namespace

TEST_CASE("coachee responses") {
  CoacheeProfile p;
  p.talk_std_s = 0.0;
  p.valence_noise = 0.0;
  p.sample_noise = 0.0;
  std::mt19937_64 rng(1);
  const auto a = coachee_respond(p, DialogueAction::Summarise, ExerciseKind::Savouring, 1, rng);
  const auto b = coachee_respond(p, DialogueAction::FollowUpQuestion, ExerciseKind::Savouring, 1, rng);
  const auto c = coachee_respond(p, DialogueAction::NewEpisode, ExerciseKind::Savouring, 1, rng);
  CHECK(a.speech_duration_s == b.speech_duration_s);
  CHECK(b.speech_duration_s == c.speech_duration_s);
  CHECK(a.speech_duration_s == p.talk_mean_s);

  CoacheeProfile q;
  q.affinity[static_cast<std::size_t>(action_code(DialogueAction::FollowUpQuestion))].speech_s = 10.0;
  const double diff = mean_speech(q, DialogueAction::FollowUpQuestion, 1000, 5) -
                      mean_speech(q, DialogueAction::Summarise, 1000, 6);
  CHECK(diff == doctest::Approx(10.0).epsilon(0.05));

  std::mt19937_64 r1(9), r2(9);
  for (int i = 0; i < 20; ++i) {
    const auto x = coachee_respond(q, DialogueAction::NewEpisode, ExerciseKind::Gratitude, 2, r1);
    const auto y = coachee_respond(q, DialogueAction::NewEpisode, ExerciseKind::Gratitude, 2, r2);
    CHECK(x.transcript == y.transcript);
    CHECK(x.valence == y.valence);
    CHECK(x.speech_duration_s == y.speech_duration_s);
  }

  CoacheeProfile extreme;
  extreme.base_valence = 0.95;
  extreme.affinity[0].valence = 0.5;
  extreme.talk_mean_s = 0.0;
  std::mt19937_64 r3(2);
  for (int i = 0; i < 50; ++i) {
    const auto x = coachee_respond(extreme, DialogueAction::Summarise, ExerciseKind::Gratitude, 1, r3);
    for (double v : x.valence) CHECK(v <= 1.0);
    CHECK(x.speech_duration_s >= 0.0);
    CHECK_NOTHROW(x.validate());
  }

  CoacheeProfile bad;
  bad.base_valence = 1.5;
  CHECK_THROWS_AS(bad.validate(), SimError);
}

TEST_CASE("population is preference structured") {
  PopulationConfig c;
  c.size = 6;
  const auto pop = make_population(c);
  REQUIRE(pop.size() == 6);
  std::array<int, kNumActions> favs{};
  for (const auto& p : pop) ++favs[static_cast<std::size_t>(action_code(favourite_action(p)))];
  for (int f : favs) CHECK(f == 2);
  CHECK(make_population(c) == pop);
}

TEST_CASE("default corpus") {
  const auto& c = generic().corpus;
  CHECK(c.transitions.size() == 5 * 19 * 8);
  CHECK(c.calibration.count == 760);
  CHECK(c.calibration.mean >= -5.0);
  CHECK(c.calibration.mean <= -0.5);
  CHECK(c.calibration.std >= 3.0);
  CHECK(c.calibration.std <= 8.0);

  std::map<std::pair<std::string, int>, int> done;
  std::array<std::size_t, kNumActions> actions{};
  for (std::size_t i = 0; i < c.transitions.size(); ++i) {
    const auto& t = c.transitions[i];
    done[{t.coachee_id, t.session_index}] += t.done;
    ++actions[static_cast<std::size_t>(action_code(t.action))];
    const auto& k = c.components[i];
    CHECK(t.reward == compute_reward(k.fv, k.sd).total);
  }
  CHECK(done.size() == 5 * 19);
  for (const auto& [key, n] : done) CHECK(n == 1);
  // uniform random actions: each within 3 sigma of 760/3
  const double sigma = std::sqrt(760.0 * (1.0 / 3.0) * (2.0 / 3.0));
  for (auto n : actions) CHECK(std::abs(static_cast<double>(n) - 760.0 / 3.0) < 3.0 * sigma);

  std::vector<CoacheeProfile> two(2);
  two[1].id = "P02";
  CorpusConfig cfg;
  cfg.sessions_per_profile = 3;
  CHECK(generate_corpus(two, cfg).transitions.size() == 2 * 3 * 8);
  CHECK_THROWS_AS(generate_corpus({}, cfg), SimError);
}

TEST_CASE("statistics helpers") {
  CHECK(sign_test_p(20, 20) == doctest::Approx(std::pow(0.5, 20)));
  CHECK(sign_test_p(15, 20) == doctest::Approx(0.020694).epsilon(1e-4));
  CHECK(sign_test_p(0, 20) == doctest::Approx(1.0));
  const std::vector<double> line{1.0, 3.0, 5.0, 7.0};
  CHECK(trend_slope(line) == doctest::Approx(2.0));
  const auto c = calibration_stats(std::vector<double>{1.0, 2.0, 3.0, 10.0});
  CHECK(c.mean == doctest::Approx(4.0));
  CHECK(c.median == doctest::Approx(2.5));
  CHECK(c.std == doctest::Approx(std::sqrt(50.0 / 3.0)));
}

TEST_CASE("single coachee study structure and reproducibility") {
  StudyConfig cfg = default_study(3);
  cfg.population.resize(1);
  const auto& g = generic();
  const auto a = run_study(cfg, g.ck, g.replay);
  REQUIRE(a.arms.size() == 2);
  for (const auto& arm : a.arms) {
    CHECK(arm.rows.size() == 4);
    REQUIRE(arm.sessions.size() == 4);
    for (int s = 1; s <= 4; ++s) {
      CHECK(arm.sessions[static_cast<std::size_t>(s - 1)].session_index == s);
      CHECK(arm.sessions[static_cast<std::size_t>(s - 1)].turns == 8);
    }
    CHECK(arm.errors.empty());
  }
  CHECK_FALSE(a.flagged);
  CHECK(a.arm(Arm::Adaptive).rows[1].exercise == ExerciseKind::Gratitude);

  const auto b = run_study(cfg, g.ck, g.replay);
  CHECK(nlohmann::json(to_json(a)) == nlohmann::json(to_json(b)));

  StudyConfig bad = cfg;
  bad.sessions = 0;
  CHECK_THROWS_AS(run_study(bad, g.ck, g.replay), SimError);
}

TEST_CASE("session errors are recorded and the study continues") {
  StudyConfig cfg = default_study(1);
  cfg.population.resize(2);
  cfg.arms = {Arm::GenericFrozen};
  auto broken = generic().ck;
  broken.params.resize(3);
  std::vector<std::string> logs;
  auto prev = set_log_sink([&](LogLevel, std::string_view m) { logs.emplace_back(m); });
  const auto r = run_study(cfg, broken, generic().replay);
  set_log_sink(prev);
  CHECK(r.flagged);
  CHECK(r.arms[0].rows.size() == 8);
  CHECK(r.arms[0].errors.size() == 8);
  CHECK_FALSE(logs.empty());
}

TEST_CASE("frozen generic policy shows no systematic trend on stationary coachees") {
  StudyConfig cfg = default_study(11);
  cfg.arms = {Arm::GenericFrozen};
  const auto r = run_study(cfg, generic().ck, generic().replay);
  const auto& arm = r.arm(Arm::GenericFrozen);
  double sd = 0.0;
  for (const auto& s : arm.sessions) sd += s.std / std::sqrt(static_cast<double>(s.turns));
  sd /= static_cast<double>(arm.sessions.size());
  // slope standard error for x = 1..4 is se(mean) / sqrt(5); the band is 3 of them
  CHECK(std::abs(arm.slope) < 3.0 * sd / std::sqrt(5.0));
}

TEST_CASE("adaptive arm beats the frozen arm by session 4") {
  const auto& g = generic();
  const auto sum = run_replications(default_study(5), 4, g.ck, g.replay);
  CHECK(sum.reports.size() == 4);
  CHECK(sum.arm_wins >= 3);
  for (const auto& rep : sum.reports) {
    const auto& ad = rep.arm(Arm::Adaptive);
    std::size_t fav1 = 0, fav4 = 0;
    for (const auto& row : ad.rows) {
      if (row.session_index == 1) fav1 += row.favourite_choices;
      if (row.session_index == 4) fav4 += row.favourite_choices;
    }
    CHECK(fav4 > fav1);
  }
}

TEST_CASE("wider affinity spread does not hurt the adaptive arm") {
  const auto& g = generic();
  double previous = -1e9;
  for (double spread : {0.5, 1.0, 1.5}) {
    PopulationConfig pop;
    pop.size = 17;
    pop.favourite_valence *= spread;
    pop.other_valence *= spread;
    pop.favourite_speech_s *= spread;
    pop.other_speech_s *= spread;
    pop.seed = 77;
    StudyConfig cfg = default_study(77);
    cfg.population = make_population(pop);
    cfg.arms = {Arm::Adaptive};
    double s4 = 0.0;
    const int reps = 4;
    for (int r = 0; r < reps; ++r) {
      cfg.seed = derive_seed(77, static_cast<std::uint64_t>(r));
      s4 += run_study(cfg, g.ck, g.replay).arm(Arm::Adaptive).session(4).mean / reps;
    }
    CHECK(s4 >= previous);
    previous = s4;
  }
}

TEST_CASE("study report files") {
  StudyConfig cfg = default_study(2);
  cfg.population.resize(3);
  const auto r = run_study(cfg, generic().ck, generic().replay);
  const auto csv = study_csv(r);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 3 * 4);
  const auto sessions = session_csv(r);
  CHECK(std::count(sessions.begin(), sessions.end(), '\n') == 1 + 2 * 4);
  const auto svg = reward_svg(r);
  CHECK(svg.rfind("<svg", 0) == 0);
  std::size_t lines = 0;
  for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++lines;
  CHECK(lines == 2);
  const auto j = to_json(r);
  CHECK(j["arms"].size() == 2);
  CHECK(j["arm_delta"]["sessions"].size() == 4);

  const auto dir = std::filesystem::temp_directory_path() / ("coach_sim_" + std::to_string(::getpid()));
  write_study_report(dir, r);
  for (const char* f : {"study.json", "coachee_sessions.csv", "sessions.csv", "reward.svg"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  std::filesystem::remove_all(dir);
}
