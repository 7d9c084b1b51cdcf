#pragma once

// Toy MDP and its tabular value-iteration oracle, shared by the policy unit
// tests and the acceptance suite. Independent of the Q-network code path.

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "coach/policy/policy.hpp"

namespace coach::testing {

/// Toy state i: IR absent, exercise slot i one-hot, durations zero.
inline StateVector toy_state(std::size_t i) {
  StateVector s;
  s[0] = 1.0;
  s[2 + (i % 4)] = 1.0;
  if (i >= 4) s[8 + (i - 4) % 3] = 1.0;
  return s;
}

inline StateVector random_state(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ir(0, 1), ex(0, 3), prev(-1, 2);
  std::normal_distribution<double> z(0.0, 1.0);
  StateVector s;
  s[ir(rng)] = 1.0;
  s[2 + ex(rng)] = 1.0;
  s[6] = z(rng);
  s[7] = z(rng);
  const int p = prev(rng);
  if (p >= 0) s[8 + p] = 1.0;
  return s;
}

struct ToyMdp {
  std::size_t states = 4;
  std::vector<std::array<std::size_t, 3>> next;
  std::vector<std::array<double, 3>> reward;

  static ToyMdp standard() {
    ToyMdp m;
    m.next = {{1, 2, 0}, {2, 3, 1}, {3, 0, 2}, {0, 1, 3}};
    m.reward = {{0.0, 1.0, 0.2}, {0.5, -1.0, 0.0}, {1.0, 0.0, -0.5}, {-0.2, 0.3, 1.0}};
    return m;
  }

  struct Solution {
    std::vector<std::array<double, 3>> q;
    std::vector<int> greedy;
    double min_gap = 0.0;  // smallest margin between best and second-best action
  };

  Solution value_iteration(double gamma, int sweeps = 2000) const {
    std::vector<double> v(states, 0.0);
    Solution sol;
    sol.q.assign(states, {});
    for (int it = 0; it < sweeps; ++it) {
      for (std::size_t s = 0; s < states; ++s) {
        for (std::size_t a = 0; a < 3; ++a) sol.q[s][a] = reward[s][a] + gamma * v[next[s][a]];
      }
      for (std::size_t s = 0; s < states; ++s) v[s] = *std::max_element(sol.q[s].begin(), sol.q[s].end());
    }
    sol.min_gap = 1e9;
    for (std::size_t s = 0; s < states; ++s) {
      auto q = sol.q[s];
      const auto best = std::max_element(q.begin(), q.end()) - q.begin();
      sol.greedy.push_back(static_cast<int>(best));
      std::sort(q.begin(), q.end());
      sol.min_gap = std::min(sol.min_gap, q[2] - q[1]);
    }
    return sol;
  }

  /// Every (s, a) pair `reps` times; the chain never terminates.
  std::vector<Transition> corpus(int reps) const {
    std::vector<Transition> out;
    for (int r = 0; r < reps; ++r) {
      for (std::size_t s = 0; s < states; ++s) {
        for (std::size_t a = 0; a < 3; ++a) {
          Transition t;
          t.state = toy_state(s);
          t.action = decode_action(static_cast<int>(a));
          t.reward = reward[s][a];
          t.next_state = toy_state(next[s][a]);
          t.done = false;
          t.coachee_id = "toy";
          out.push_back(t);
        }
      }
    }
    return out;
  }
};

inline policy::BatchConfig toy_batch_config() {
  policy::BatchConfig cfg;
  cfg.hidden = 32;
  cfg.train.epochs = 400;
  cfg.train.batch_size = 32;
  cfg.train.learning_rate = 1e-3;
  cfg.target_sync_steps = 25;
  cfg.nfq_iterations = 80;
  cfg.nfq_fit_epochs = 5;
  cfg.seed = 7;
  return cfg;
}

}  // namespace coach::testing
