#pragma once

#include <vector>

#include "coach/nn/kernels.hpp"
#include "coach/nn/optimizer.hpp"

namespace coach::nn {

struct Dataset {
  Tensor3 inputs;
  std::vector<Target> targets;

  std::size_t size() const { return inputs.batch; }
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t epoch) : Error(what), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

struct TrainResult {
  std::vector<double> params;
  std::vector<double> loss_curve;  // mean minibatch loss per epoch
};

/// Minibatch training with per-epoch shuffling seeded by config.shuffle_seed.
/// Starts from `initial` when given, otherwise from net.init_params().
TrainResult train(const Network& net, const Dataset& data, const TrainConfig& config,
                  std::vector<double> initial = {});

/// Fraction of samples whose argmax output equals the target class.
double accuracy(const Network& net, std::span<const double> params, const Dataset& data);

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Compares batch_gradient with central finite differences of the batch loss.
/// Relative error per parameter is |a - n| / max(|a|, |n|, floor).
GradCheckResult check_gradients(const Network& net, std::span<const double> params,
                                const Tensor3& inputs, std::span<const Target> targets,
                                double h = 1e-5, double floor = 1e-6);

}  // namespace coach::nn
