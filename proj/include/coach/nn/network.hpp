#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "coach/nn/layers.hpp"

namespace coach::nn {

enum class LossKind { SoftmaxCrossEntropy, SquaredError };

std::string_view to_string(LossKind k);
LossKind parse_loss(std::string_view name);

/// Per-sample supervision. Cross-entropy: `index` is the class. Squared
/// error: only output `index` is regressed toward `value` (TD targets).
struct Target {
  std::size_t index = 0;
  double value = 0.0;

  bool operator==(const Target&) const = default;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  LossKind loss = LossKind::SquaredError;
  std::uint64_t seed = 0;

  bool operator==(const NetworkSpec&) const = default;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Immutable layer stack over a flat parameter vector. Parameters are owned
/// by the caller so several parameter sets (online/target) share one network.
class Network {
 public:
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  std::size_t param_count() const { return offsets_.back(); }
  std::size_t input_width() const { return spec_.layers.front().in; }
  std::size_t output_width() const { return spec_.layers.back().output_width(); }

  std::vector<double> init_params() const { return init_params(spec_.seed); }
  std::vector<double> init_params(std::uint64_t seed) const;

  std::vector<double> forward(std::span<const double> params, const SequenceView& x) const;

  double loss(std::span<const double> params, const SequenceView& x, const Target& target) const;

  /// Per-sample loss; its parameter gradient is added into `grad`.
  double loss_and_gradient(std::span<const double> params, const SequenceView& x,
                           const Target& target, std::span<double> grad) const;

  // Class probabilities (softmax of the output) for classification nets.
  std::vector<double> predict_proba(std::span<const double> params, const SequenceView& x) const;

 private:
  struct Trace {
    std::vector<Sequence> acts;  // acts[0] unused, acts[i+1] = output of layer i
    std::vector<Cache> caches;
  };

  void check_params(std::span<const double> params) const;
  Sequence run(std::span<const double> params, const SequenceView& x, Trace* trace) const;
  double loss_from_output(std::span<const double> out, const Target& target,
                          std::span<double> dout) const;

  NetworkSpec spec_;
  std::vector<std::shared_ptr<const Layer>> layers_;
  std::vector<std::size_t> offsets_;
};

std::vector<double> softmax(std::span<const double> logits);

}  // namespace coach::nn
