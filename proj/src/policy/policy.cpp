#include "coach/policy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "coach/nn/kernels.hpp"

namespace coach::policy {

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Dqn: return "dqn";
    case Algorithm::DoubleDqn: return "double-dqn";
    case Algorithm::Nfq: return "nfq";
  }
  return "dqn";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "dqn") return Algorithm::Dqn;
  if (name == "double-dqn" || name == "ddqn") return Algorithm::DoubleDqn;
  if (name == "nfq") return Algorithm::Nfq;
  throw PolicyError("unknown algorithm '" + std::string(name) + "' (expected dqn, double-dqn, nfq)");
}

nn::NetworkSpec q_network_spec(std::size_t hidden, std::uint64_t seed) {
  using nn::Activation;
  using nn::LayerSpec;
  return nn::NetworkSpec{{LayerSpec::dense(kStateSize, hidden, Activation::Relu),
                          LayerSpec::dense(hidden, hidden, Activation::Relu),
                          LayerSpec::dense(hidden, kNumActions, Activation::Identity)},
                         nn::LossKind::SquaredError,
                         seed};
}

QNetwork::QNetwork(nn::NetworkSpec spec) : net(std::move(spec)) {
  if (net.input_width() != kStateSize || net.output_width() != kNumActions) {
    throw PolicyError("Q-network must map 11 inputs to 3 outputs");
  }
  params = net.init_params();
  target_params = params;
}

QNetwork::QNetwork(nn::NetworkSpec spec, std::vector<double> p) : net(std::move(spec)) {
  if (net.input_width() != kStateSize || net.output_width() != kNumActions) {
    throw PolicyError("Q-network must map 11 inputs to 3 outputs");
  }
  if (p.size() != net.param_count()) throw PolicyError("parameter count does not match network");
  params = std::move(p);
  target_params = params;
}

void QNetwork::sync_target() {
  target_params = params;
  ++sync_counter;
}

QValues q_values(const nn::Network& net, std::span<const double> params, const StateVector& state) {
  const auto out = net.forward(params, nn::SequenceView{1, kStateSize, state.values});
  QValues q{};
  std::copy(out.begin(), out.end(), q.begin());
  return q;
}

QValues q_values(const QNetwork& policy, const StateVector& state) {
  return q_values(policy.net, policy.params, state);
}

QValues q_values(const QNetwork& policy, std::span<const double> state) {
  if (state.size() != kStateSize) {
    throw PolicyError("state has " + std::to_string(state.size()) + " entries, expected 11");
  }
  StateVector s;
  std::copy(state.begin(), state.end(), s.values.begin());
  return q_values(policy, s);
}

DialogueAction greedy_action(const QValues& q) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < kNumActions; ++a) {
    if (q[a] > q[best]) best = a;
  }
  return static_cast<DialogueAction>(best);
}

DialogueAction select_action(const QValues& q, double epsilon, std::mt19937_64& rng) {
  for (double v : q) {
    if (!std::isfinite(v)) throw PolicyError("non-finite q-value");
  }
  // Both draws happen unconditionally so the rng stream does not depend on q.
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(kNumActions) - 1);
  const double u = coin(rng);
  const int random_action = pick(rng);
  if (u < epsilon) return static_cast<DialogueAction>(random_action);
  return greedy_action(q);
}

// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw PolicyError("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

// ---------------------------------------------------------------------------

double td_target(const QNetwork& q, const Transition& t, Algorithm algo, double gamma) {
  if (t.done) return t.reward;
  const QValues next_target = q_values(q.net, q.target_params, t.next_state);
  if (algo == Algorithm::DoubleDqn) {
    const QValues next_online = q_values(q.net, q.params, t.next_state);
    return t.reward + gamma * next_target[action_code(greedy_action(next_online))];
  }
  return t.reward + gamma * *std::max_element(next_target.begin(), next_target.end());
}

namespace {

struct TdBatch {
  nn::Tensor3 inputs;
  std::vector<nn::Target> targets;
};

TdBatch make_batch(std::span<const Transition* const> batch, std::span<const double> ys) {
  TdBatch b{nn::Tensor3(batch.size(), 1, kStateSize), {}};
  b.targets.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::copy(batch[i]->state.values.begin(), batch[i]->state.values.end(), b.inputs.sample_data(i).begin());
    b.targets.push_back({static_cast<std::size_t>(action_code(batch[i]->action)), ys[i]});
  }
  return b;
}

double fit_step(QNetwork& q, const TdBatch& b, nn::Optimizer& opt, double clip_norm) {
  std::vector<std::size_t> idx(b.targets.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> grad(q.net.param_count());
  const double loss = nn::batch_gradient(q.net, q.params, b.inputs, b.targets, idx, grad);
  nn::clip_by_global_norm(grad, clip_norm);
  opt.step(q.params, grad);
  return loss;
}

void validate_corpus(std::span<const Transition> corpus, double gamma) {
  if (corpus.empty()) throw PolicyError("training corpus is empty");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw PolicyError("gamma must lie in [0, 1)");
  for (const auto& t : corpus) {
    if (!std::isfinite(t.reward)) throw PolicyError("corpus contains a non-finite reward");
  }
}

}  // namespace

double td_step(QNetwork& q, std::span<const Transition* const> batch, Algorithm algo, double gamma,
               nn::Optimizer& opt, double clip_norm) {
  std::vector<double> ys(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) ys[i] = td_target(q, *batch[i], algo, gamma);
  return fit_step(q, make_batch(batch, ys), opt, clip_norm);
}

BatchConfig::BatchConfig() {
  train.learning_rate = 1e-3;
  train.batch_size = 32;
  train.epochs = 150;
  train.clip_norm = 5.0;
}

PolicyCheckpoint train_batch(std::span<const Transition> corpus, Algorithm algo,
                             const BatchConfig& config, double gamma,
                             const StateNormalizer& normalizer, const RewardConfig& reward,
                             std::string corpus_id) {
  validate_corpus(corpus, gamma);
  nn::validate(config.train);
  if (config.target_sync_steps == 0) throw PolicyError("target_sync_steps must be positive");

  QNetwork q(q_network_spec(config.hidden, config.seed));
  nn::Optimizer opt(config.train, q.net.param_count());
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const Transition*> batch;
  TrainingMetadata meta;
  meta.corpus_id = std::move(corpus_id);
  meta.seed = config.seed;

  auto minibatches = [&](auto&& fn) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start < order.size(); start += config.train.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.train.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&corpus[order[i]]);
      total += fn(std::span<const std::size_t>(order.data() + start, stop - start));
      ++count;
    }
    return total / static_cast<double>(count);
  };

  auto check = [&](double loss, std::size_t epoch) {
    if (!std::isfinite(loss)) {
      throw PolicyError("batch Q-learning diverged at epoch " + std::to_string(epoch));
    }
  };

  if (algo == Algorithm::Nfq) {
    std::vector<double> ys(corpus.size());
    for (std::size_t it = 0; it < config.nfq_iterations; ++it) {
      // Targets are frozen over the whole corpus for this iteration.
      q.sync_target();
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        ys[i] = td_target(q, corpus[i], Algorithm::Dqn, gamma);
      }
      double loss = 0.0;
      for (std::size_t e = 0; e < config.nfq_fit_epochs; ++e) {
        loss = minibatches([&](std::span<const std::size_t> idx) {
          std::vector<double> sub(idx.size());
          for (std::size_t k = 0; k < idx.size(); ++k) sub[k] = ys[idx[k]];
          ++meta.gradient_steps;
          return fit_step(q, make_batch(batch, sub), opt, config.train.clip_norm);
        });
      }
      check(loss, it + 1);
      meta.loss_curve.push_back(loss);
    }
    meta.epochs = config.nfq_iterations * config.nfq_fit_epochs;
  } else {
    for (std::size_t epoch = 0; epoch < config.train.epochs; ++epoch) {
      const double loss = minibatches([&](std::span<const std::size_t>) {
        const double l = td_step(q, batch, algo, gamma, opt, config.train.clip_norm);
        if (++meta.gradient_steps % config.target_sync_steps == 0) q.sync_target();
        return l;
      });
      check(loss, epoch + 1);
      meta.loss_curve.push_back(loss);
    }
    meta.epochs = config.train.epochs;
  }

  for (double p : q.params) {
    if (!std::isfinite(p)) throw PolicyError("batch Q-learning produced non-finite parameters");
  }
  PolicyCheckpoint ck;
  ck.algorithm = algo;
  ck.spec = q.net.spec();
  ck.params = q.params;
  ck.normalizer = normalizer;
  ck.reward = reward;
  ck.gamma = gamma;
  ck.metadata = std::move(meta);
  return ck;
}

QNetwork PolicyCheckpoint::network() const { return QNetwork(spec, params); }

PolicyCheckpoint fork_for_coachee(const PolicyCheckpoint& generic, const std::string& coachee_id) {
  if (generic.coachee_id) {
    throw PolicyError("checkpoint is already personalised for coachee '" + *generic.coachee_id + "'");
  }
  if (coachee_id.empty()) throw PolicyError("coachee id must not be empty");
  PolicyCheckpoint copy = generic;
  copy.coachee_id = coachee_id;
  return copy;
}

// ---------------------------------------------------------------------------

double OnlineConfig::epsilon_for(int session_index) const {
  return epsilon_initial * std::pow(epsilon_decay, std::max(0, session_index - 1));
}

double OnlineConfig::generic_mix_for(int session_index) const {
  return std::max(generic_mix_final,
                  generic_mix_initial - generic_mix_step * std::max(0, session_index - 1));
}

namespace {

nn::TrainConfig online_train_config(const OnlineConfig& c) {
  nn::TrainConfig t;
  t.learning_rate = c.learning_rate;
  t.batch_size = c.batch_size;
  t.clip_norm = c.clip_norm;
  return t;
}

}  // namespace

OnlineLearner::OnlineLearner(PolicyCheckpoint personalised,
                             std::shared_ptr<const std::vector<Transition>> generic_replay,
                             OnlineConfig config, std::uint64_t seed)
    : base_(std::move(personalised)),
      network_(base_.network()),
      generic_(std::move(generic_replay)),
      config_(config),
      buffer_(config.buffer_capacity),
      optimizer_(online_train_config(config), network_.net.param_count()),
      rng_(seed) {
  if (config_.batch_size == 0) throw PolicyError("online batch size must be positive");
  if (config_.target_sync_steps == 0) throw PolicyError("target_sync_steps must be positive");
}

OnlineUpdateReport OnlineLearner::update_online(const Transition& t) {
  buffer_.push(t);
  OnlineUpdateReport report;
  if (config_.steps_per_turn == 0) return report;

  const double mix = generic_ && !generic_->empty() ? config_.generic_mix_for(t.session_index) : 0.0;
  const auto generic_count = static_cast<std::size_t>(std::round(mix * static_cast<double>(config_.batch_size)));
  const std::size_t personal_count = config_.batch_size - generic_count;

  const std::vector<double> snapshot = network_.params;
  const std::vector<double> target_snapshot = network_.target_params;
  try {
    double total = 0.0;
    std::vector<const Transition*> batch;
    for (std::size_t step = 0; step < config_.steps_per_turn; ++step) {
      batch.clear();
      std::uniform_int_distribution<std::size_t> pick_personal(0, buffer_.size() - 1);
      for (std::size_t i = 0; i < personal_count; ++i) batch.push_back(&buffer_[pick_personal(rng_)]);
      if (generic_count > 0) {
        std::uniform_int_distribution<std::size_t> pick_generic(0, generic_->size() - 1);
        for (std::size_t i = 0; i < generic_count; ++i) batch.push_back(&(*generic_)[pick_generic(rng_)]);
      }
      const double loss = td_step(network_, batch, base_.algorithm == Algorithm::DoubleDqn
                                                        ? Algorithm::DoubleDqn
                                                        : Algorithm::Dqn,
                                  base_.gamma, optimizer_, config_.clip_norm);
      if (!std::isfinite(loss)) throw nn::NonFiniteError("non-finite online loss");
      total += loss;
      ++report.gradient_steps;
      if (++steps_ % config_.target_sync_steps == 0) {
        network_.sync_target();
        report.target_synced = true;
      }
    }
    for (double p : network_.params) {
      if (!std::isfinite(p)) throw nn::NonFiniteError("non-finite parameters after online update");
    }
    report.mean_loss = total / static_cast<double>(report.gradient_steps);
  } catch (const Error& e) {
    network_.params = snapshot;
    network_.target_params = target_snapshot;
    report = OnlineUpdateReport{};
    report.diagnostic = std::string("online update rolled back: ") + e.what();
  }
  return report;
}

PolicyCheckpoint OnlineLearner::checkpoint() const {
  PolicyCheckpoint ck = base_;
  ck.params = network_.params;
  ck.metadata.gradient_steps += steps_;
  return ck;
}

}  // namespace coach::policy
