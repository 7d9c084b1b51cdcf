#include "doctest.h"

#include <array>
#include <cmath>
#include <random>

#include "coach/policy/policy.hpp"
#include "policy_fixtures.hpp"

using namespace coach;
using namespace coach::policy;

TEST_CASE("q_values shape and zero network") {
  QNetwork q(q_network_spec(8, 1));
  std::fill(q.params.begin(), q.params.end(), 0.0);
  const auto v = q_values(q, StateVector{});
  CHECK(v.size() == 3);
  CHECK(v == QValues{0.0, 0.0, 0.0});
  const std::vector<double> short_state(10, 0.0);
  CHECK_THROWS_AS(q_values(q, short_state), PolicyError);
}

TEST_CASE("q_values are deterministic for a fixed checkpoint") {
  QNetwork a(q_network_spec(16, 42)), b(q_network_spec(16, 42));
  const StateVector s = testing::toy_state(2);
  CHECK(q_values(a, s) == q_values(b, s));
}

TEST_CASE("select_action greedy and tie-breaking") {
  std::mt19937_64 rng(1);
  CHECK(select_action({1.0, 0.5, -0.2}, 0.0, rng) == DialogueAction::Summarise);
  CHECK(select_action({0.5, 0.5, 0.1}, 0.0, rng) == DialogueAction::Summarise);
  CHECK(select_action({0.1, 0.5, 0.5}, 0.0, rng) == DialogueAction::FollowUpQuestion);
  CHECK(select_action({0.1, 0.2, 0.5}, 0.0, rng) == DialogueAction::NewEpisode);
}

TEST_CASE("epsilon = 1 draws are uniform within 3 sigma") {
  std::mt19937_64 rng(2024);
  std::array<int, 3> counts{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[action_code(select_action({5.0, 0.0, -5.0}, 1.0, rng))];
  const double expected = n / 3.0;
  const double sigma = std::sqrt(n * (1.0 / 3.0) * (2.0 / 3.0));
  for (int c : counts) CHECK(std::abs(c - expected) < 3.0 * sigma);
}

TEST_CASE("argmax invariance under a bias shift on the output layer") {
  QNetwork q(q_network_spec(8, 3));
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const StateVector s = testing::random_state(rng);
    const auto before = q_values(q, s);
    QNetwork shifted = q;
    const std::size_t n = shifted.params.size();
    for (std::size_t k = n - 3; k < n; ++k) shifted.params[k] += 7.25;
    const auto after = q_values(shifted, s);
    CHECK(greedy_action(before) == greedy_action(after));
    for (std::size_t a = 0; a < 3; ++a) CHECK(after[a] == doctest::Approx(before[a] + 7.25));
  }
}

TEST_CASE("replay buffer is bounded FIFO") {
  ReplayBuffer buf(3);
  for (int i = 0; i < 7; ++i) {
    Transition t;
    t.turn_index = i;
    buf.push(t);
    CHECK(buf.size() <= 3);
  }
  CHECK(buf[0].turn_index == 4);
  CHECK(buf[1].turn_index == 5);
  CHECK(buf[2].turn_index == 6);
  CHECK_THROWS_AS(ReplayBuffer(0), PolicyError);
}

TEST_CASE("batch training preconditions") {
  BatchConfig cfg;
  CHECK_THROWS_AS(train_batch({}, Algorithm::Dqn, cfg, 0.9), PolicyError);
  std::vector<Transition> one(1);
  CHECK_THROWS_AS(train_batch(one, Algorithm::Dqn, cfg, 1.0), PolicyError);
}

TEST_CASE("terminal-only corpus regresses Q(s, a) onto the reward") {
  std::vector<Transition> corpus;
  std::array<std::array<double, 3>, 3> reward = {{{1.0, -2.0, 0.5}, {3.0, 0.0, -1.0}, {-0.5, 2.0, 1.5}}};
  for (int rep = 0; rep < 16; ++rep) {
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t a = 0; a < 3; ++a) {
        Transition t;
        t.state = testing::toy_state(s);
        t.next_state = t.state;
        t.action = decode_action(static_cast<int>(a));
        t.reward = reward[s][a];
        t.done = true;
        corpus.push_back(t);
      }
    }
  }
  BatchConfig cfg;
  cfg.hidden = 32;
  cfg.train.epochs = 300;
  const auto ck = train_batch(corpus, Algorithm::Dqn, cfg, 0.9);
  const QNetwork q = ck.network();
  for (std::size_t s = 0; s < 3; ++s) {
    const auto v = q_values(q, testing::toy_state(s));
    for (std::size_t a = 0; a < 3; ++a) CHECK(std::abs(v[a] - reward[s][a]) < 0.05);
  }
}

TEST_CASE("value-iteration oracle on the toy MDP") {
  const auto mdp = testing::ToyMdp::standard();
  const auto oracle = mdp.value_iteration(0.9);
  REQUIRE(oracle.min_gap > 0.2);  // the greedy choice is unambiguous
  const auto corpus = mdp.corpus(20);
  for (Algorithm algo : {Algorithm::Dqn, Algorithm::DoubleDqn, Algorithm::Nfq}) {
    const auto ck = train_batch(corpus, algo, testing::toy_batch_config(), 0.9);
    const QNetwork q = ck.network();
    for (std::size_t s = 0; s < mdp.states; ++s) {
      INFO(to_string(algo) << " state " << s);
      CHECK(action_code(greedy_action(q_values(q, testing::toy_state(s)))) == oracle.greedy[s]);
    }
  }
}

TEST_CASE("fork_for_coachee copy semantics") {
  const auto mdp = testing::ToyMdp::standard();
  BatchConfig cfg = testing::toy_batch_config();
  cfg.train.epochs = 5;
  const auto generic = train_batch(mdp.corpus(2), Algorithm::Dqn, cfg, 0.9);
  const auto a = fork_for_coachee(generic, "alice");
  CHECK(a.coachee_id == std::optional<std::string>("alice"));
  CHECK(a.params == generic.params);
  CHECK_THROWS_AS(fork_for_coachee(a, "bob"), PolicyError);
  const StateVector s = testing::toy_state(1);
  CHECK(q_values(a.network(), s) == q_values(generic.network(), s));
}

TEST_CASE("online updates: no-op, convergence and isolation") {
  const auto mdp = testing::ToyMdp::standard();
  BatchConfig cfg = testing::toy_batch_config();
  cfg.train.epochs = 20;
  const auto generic = train_batch(mdp.corpus(4), Algorithm::Dqn, cfg, 0.9);
  auto replay = std::make_shared<const std::vector<Transition>>(mdp.corpus(4));
  // a state where the generic policy does not already prefer follow-up
  std::size_t probe = 0;
  while (probe < 3 && greedy_action(q_values(generic.network(), testing::toy_state(probe))) ==
                          DialogueAction::FollowUpQuestion) {
    ++probe;
  }
  const StateVector s = testing::toy_state(probe);

  SUBCASE("k = 0 leaves parameters unchanged") {
    OnlineConfig oc;
    oc.steps_per_turn = 0;
    OnlineLearner learner(fork_for_coachee(generic, "c0"), replay, oc, 1);
    Transition t{s, DialogueAction::NewEpisode, 3.0, s, true, "c0", 1, 0};
    const auto report = learner.update_online(t);
    CHECK(report.gradient_steps == 0);
    CHECK(learner.network().params == generic.params);
    CHECK(learner.buffer().size() == 1);
  }

  SUBCASE("rewarding follow-up in a fixed state makes it the argmax") {
    const auto initial = q_values(generic.network(), s);
    REQUIRE(greedy_action(initial) != DialogueAction::FollowUpQuestion);
    OnlineLearner learner(fork_for_coachee(generic, "c1"), replay, OnlineConfig{}, 2);
    int updates = 0;
    while (updates < 200 && greedy_action(learner.q_values(s)) != DialogueAction::FollowUpQuestion) {
      Transition t{s, DialogueAction::FollowUpQuestion, 10.0, s, true, "c1", 1, updates};
      learner.update_online(t);
      ++updates;
    }
    CHECK(greedy_action(learner.q_values(s)) == DialogueAction::FollowUpQuestion);
    CHECK(updates < 200);
  }

  SUBCASE("two coachees evolve independently; generic untouched") {
    const auto generic_copy = generic;
    OnlineLearner a(fork_for_coachee(generic, "a"), replay, OnlineConfig{}, 3);
    OnlineLearner b(fork_for_coachee(generic, "b"), replay, OnlineConfig{}, 3);
    for (int i = 0; i < 10; ++i) {
      a.update_online({s, DialogueAction::Summarise, 5.0, s, true, "a", 1, i});
      b.update_online({s, DialogueAction::NewEpisode, -5.0, s, true, "b", 1, i});
    }
    CHECK(a.network().params != b.network().params);
    CHECK(generic == generic_copy);
    CHECK(a.checkpoint().coachee_id == std::optional<std::string>("a"));
  }
}

TEST_CASE("online schedules") {
  OnlineConfig oc;
  CHECK(oc.epsilon_for(1) == doctest::Approx(0.1));
  CHECK(oc.epsilon_for(2) == doctest::Approx(0.05));
  CHECK(oc.epsilon_for(4) == doctest::Approx(0.0125));
  CHECK(oc.generic_mix_for(1) == doctest::Approx(0.5));
  CHECK(oc.generic_mix_for(4) == doctest::Approx(0.2));
  CHECK(oc.generic_mix_for(9) == doctest::Approx(0.2));
}
