#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "coach/core/error.hpp"

namespace coach::nn {

enum class OptimizerKind { Sgd, Adam };

std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamParams&) const = default;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  OptimizerKind optimizer = OptimizerKind::Adam;
  AdamParams adam;
  double clip_norm = 5.0;
  std::uint64_t shuffle_seed = 0;

  bool operator==(const TrainConfig&) const = default;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

void validate(const TrainConfig& config);

/// Rescales `grad` in place so its L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_by_global_norm(std::span<double> grad, double max_norm);

/// Stateful first-order optimizer over a flat parameter vector.
class Optimizer {
 public:
  Optimizer(const TrainConfig& config, std::size_t param_count);

  void step(std::span<double> params, std::span<const double> grad);
  std::uint64_t steps() const { return t_; }

 private:
  OptimizerKind kind_;
  double lr_;
  AdamParams adam_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace coach::nn
