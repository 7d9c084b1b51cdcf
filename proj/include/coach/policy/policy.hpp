#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "coach/core/state.hpp"
#include "coach/nn/network.hpp"
#include "coach/nn/optimizer.hpp"
#include "coach/reward/reward.hpp"

namespace coach::policy {

class PolicyError : public Error {
 public:
  using Error::Error;
};

enum class Algorithm { Dqn, DoubleDqn, Nfq };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

using QValues = std::array<double, kNumActions>;

/// 11 -> hidden (relu) -> hidden (relu) -> 3 (linear), squared TD loss.
nn::NetworkSpec q_network_spec(std::size_t hidden, std::uint64_t seed);

/// Online parameters plus a target copy that only moves on sync_target().
struct QNetwork {
  nn::Network net;
  std::vector<double> params;
  std::vector<double> target_params;
  std::uint64_t sync_counter = 0;

  explicit QNetwork(nn::NetworkSpec spec);
  QNetwork(nn::NetworkSpec spec, std::vector<double> params);

  void sync_target();
};

QValues q_values(const QNetwork& policy, const StateVector& state);
QValues q_values(const nn::Network& net, std::span<const double> params, const StateVector& state);
// Throws PolicyError unless `state` has exactly kStateSize entries.
QValues q_values(const QNetwork& policy, std::span<const double> state);

/// Argmax with ties broken toward the lowest action code.
DialogueAction greedy_action(const QValues& q);

/// Epsilon-greedy: uniform random with probability epsilon, greedy otherwise.
DialogueAction select_action(const QValues& q, double epsilon, std::mt19937_64& rng);

/// Bounded FIFO of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  const Transition& operator[](std::size_t i) const { return items_[i]; }
  const std::deque<Transition>& items() const { return items_; }

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

struct TrainingMetadata {
  std::string corpus_id;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::size_t gradient_steps = 0;
  std::vector<double> loss_curve;

  bool operator==(const TrainingMetadata&) const = default;
};

struct PolicyCheckpoint {
  Algorithm algorithm = Algorithm::Dqn;
  nn::NetworkSpec spec;
  std::vector<double> params;
  StateNormalizer normalizer;
  RewardConfig reward;
  double gamma = 0.9;
  TrainingMetadata metadata;
  std::optional<std::string> coachee_id;

  QNetwork network() const;
  bool operator==(const PolicyCheckpoint&) const = default;
};

struct BatchConfig {
  nn::TrainConfig train;          // epochs = passes over the corpus (DQN/D-DQN)
  std::size_t hidden = 64;
  std::size_t target_sync_steps = 100;
  std::size_t nfq_iterations = 30;  // NFQ: outer fitted-Q iterations
  std::size_t nfq_fit_epochs = 10;  // NFQ: passes over the frozen targets per iteration
  std::uint64_t seed = 0;

  BatchConfig();
};

/// Offline Q-learning over a logged corpus.
///   dqn:        y = r + gamma * max_a' Q_target(s', a')
///   double-dqn: y = r + gamma * Q_target(s', argmax_a' Q_online(s', a'))
///   nfq:        targets recomputed over the full batch each iteration, then fitted
/// Terminal transitions use y = r.
PolicyCheckpoint train_batch(std::span<const Transition> corpus, Algorithm algo,
                             const BatchConfig& config, double gamma,
                             const StateNormalizer& normalizer = {},
                             const RewardConfig& reward = {}, std::string corpus_id = {});

/// Deep copy of a generic checkpoint tagged with `coachee_id`.
PolicyCheckpoint fork_for_coachee(const PolicyCheckpoint& generic, const std::string& coachee_id);

struct OnlineConfig {
  std::size_t steps_per_turn = 4;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  std::size_t target_sync_steps = 100;
  std::size_t buffer_capacity = 1000;
  double epsilon_initial = 0.1;
  double epsilon_decay = 0.5;           // multiplier per session
  double generic_mix_initial = 0.5;     // share of each minibatch drawn from generic replay
  double generic_mix_final = 0.2;
  double generic_mix_step = 0.1;        // decrease per session

  double epsilon_for(int session_index) const;
  double generic_mix_for(int session_index) const;

  bool operator==(const OnlineConfig&) const = default;
};

struct OnlineUpdateReport {
  std::size_t gradient_steps = 0;
  double mean_loss = 0.0;
  bool target_synced = false;
  std::optional<std::string> diagnostic;  // set when an update was rolled back
};

/// Per-coachee adaptive policy. Owns a forked checkpoint, its replay buffer
/// and optimizer state; the generic replay corpus is shared read-only.
class OnlineLearner {
 public:
  OnlineLearner(PolicyCheckpoint personalised,
                std::shared_ptr<const std::vector<Transition>> generic_replay,
                OnlineConfig config, std::uint64_t seed);

  QValues q_values(const StateVector& s) const { return policy::q_values(network_, s); }
  const QNetwork& network() const { return network_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const OnlineConfig& config() const { return config_; }

  /// Appends `t` and runs steps_per_turn minibatch updates on a mix of the
  /// personal buffer and generic replay. Failed updates leave params untouched.
  OnlineUpdateReport update_online(const Transition& t);

  PolicyCheckpoint checkpoint() const;

 private:
  PolicyCheckpoint base_;
  QNetwork network_;
  std::shared_ptr<const std::vector<Transition>> generic_;
  OnlineConfig config_;
  ReplayBuffer buffer_;
  nn::Optimizer optimizer_;
  std::mt19937_64 rng_;
  std::uint64_t steps_ = 0;
};

/// One TD gradient step on a minibatch; returns the batch loss.
/// Exposed for tests and for the online learner.
double td_step(QNetwork& q, std::span<const Transition* const> batch, Algorithm algo, double gamma,
               nn::Optimizer& opt, double clip_norm);

/// Bellman target for one transition under the given algorithm.
double td_target(const QNetwork& q, const Transition& t, Algorithm algo, double gamma);

}  // namespace coach::policy
