#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "coach/nn/tensor.hpp"

namespace coach::nn {

enum class Activation { Identity, Relu, Tanh, Sigmoid };
enum class LayerKind { Dense, Lstm, Gru, BiLstm, LastStep };

std::string_view to_string(Activation a);
std::string_view to_string(LayerKind k);
Activation parse_activation(std::string_view name);
LayerKind parse_layer_kind(std::string_view name);

/// Declarative description of one layer. For recurrent kinds `out` is the
/// hidden size (BiLstm emits 2*out features per step). For LastStep, `out`
/// equals `in` and `split` is the width of the forward half when the input
/// comes from a BiLstm (0 otherwise).
struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::Identity;
  std::size_t split = 0;

  static LayerSpec dense(std::size_t in, std::size_t out, Activation act = Activation::Identity) {
    return {LayerKind::Dense, in, out, act, 0};
  }
  static LayerSpec lstm(std::size_t in, std::size_t hidden) { return {LayerKind::Lstm, in, hidden}; }
  static LayerSpec gru(std::size_t in, std::size_t hidden) { return {LayerKind::Gru, in, hidden}; }
  static LayerSpec bilstm(std::size_t in, std::size_t hidden) { return {LayerKind::BiLstm, in, hidden}; }
  static LayerSpec last_step(std::size_t width = 0) { return {LayerKind::LastStep, width, width}; }

  std::size_t output_width() const { return kind == LayerKind::BiLstm ? 2 * out : out; }

  bool operator==(const LayerSpec&) const = default;
};

/// Layer-private scratch kept from forward for the backward pass.
using Cache = std::vector<double>;

class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::size_t param_count() const = 0;
  virtual void init(std::span<double> params, std::mt19937_64& rng) const = 0;
  virtual Sequence forward(std::span<const double> params, const SequenceView& in,
                           Cache& cache) const = 0;
  /// Accumulates parameter gradients into `dparams` and returns d(loss)/d(input).
  virtual Sequence backward(std::span<const double> params, const SequenceView& in,
                            const Sequence& out, const Cache& cache, const Sequence& dout,
                            std::span<double> dparams) const = 0;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec);

double activate(Activation a, double x);
// Derivative expressed through the activation's output y = f(x).
double activate_grad_from_output(Activation a, double y);

}  // namespace coach::nn
