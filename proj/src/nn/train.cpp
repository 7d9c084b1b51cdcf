#include "coach/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace coach::nn {

TrainResult train(const Network& net, const Dataset& data, const TrainConfig& config,
                  std::vector<double> initial) {
  validate(config);
  if (data.size() == 0) throw ConfigError("training set is empty");
  if (data.targets.size() != data.size()) throw ShapeError("dataset targets/inputs mismatch");

  TrainResult result;
  result.params = initial.empty() ? net.init_params() : std::move(initial);
  if (result.params.size() != net.param_count()) throw ShapeError("initial parameters have wrong size");

  Optimizer opt(config, net.param_count());
  std::vector<double> grad(net.param_count());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.shuffle_seed);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      double loss = 0.0;
      try {
        loss = batch_gradient(net, result.params, data.inputs, data.targets, idx, grad);
      } catch (const NonFiniteError& e) {
        throw TrainingError("training diverged at epoch " + std::to_string(epoch + 1) + ": " + e.what(),
                            epoch + 1);
      }
      clip_by_global_norm(grad, config.clip_norm);
      opt.step(result.params, grad);
      epoch_loss += loss;
      ++batches;
    }
    epoch_loss /= static_cast<double>(batches);
    if (!std::isfinite(epoch_loss)) {
      throw TrainingError("training diverged at epoch " + std::to_string(epoch + 1), epoch + 1);
    }
    result.loss_curve.push_back(epoch_loss);
  }
  for (double p : result.params) {
    if (!std::isfinite(p)) throw TrainingError("non-finite parameters after training", config.epochs);
  }
  return result;
}

double accuracy(const Network& net, std::span<const double> params, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  const Tensor2 out = predict_batch(net, params, data.inputs);
  std::size_t hits = 0;
  for (std::size_t b = 0; b < data.size(); ++b) {
    const auto row = out.row(b);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == data.targets[b].index) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

GradCheckResult check_gradients(const Network& net, std::span<const double> params,
                                const Tensor3& inputs, std::span<const Target> targets, double h,
                                double floor) {
  std::vector<std::size_t> all(inputs.batch);
  std::iota(all.begin(), all.end(), 0);
  std::vector<double> analytic(net.param_count());
  batch_gradient_serial(net, params, inputs, targets, all, analytic);

  std::vector<double> probe(params.begin(), params.end());
  GradCheckResult r;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    const double orig = probe[k];
    probe[k] = orig + h;
    const double up = dataset_loss(net, probe, inputs, targets);
    probe[k] = orig - h;
    const double down = dataset_loss(net, probe, inputs, targets);
    probe[k] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double abs_err = std::abs(analytic[k] - numeric);
    const double rel = abs_err / std::max({std::abs(analytic[k]), std::abs(numeric), floor});
    if (rel > r.max_rel_error) {
      r.max_rel_error = rel;
      r.worst_index = k;
    }
    r.max_abs_error = std::max(r.max_abs_error, abs_err);
    ++r.checked;
  }
  return r;
}

}  // namespace coach::nn
