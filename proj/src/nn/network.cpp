#include "coach/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace coach::nn {

std::string_view to_string(LossKind k) {
  return k == LossKind::SoftmaxCrossEntropy ? "softmax_cross_entropy" : "squared_error";
}

LossKind parse_loss(std::string_view name) {
  if (name == "softmax_cross_entropy") return LossKind::SoftmaxCrossEntropy;
  if (name == "squared_error") return LossKind::SquaredError;
  throw ShapeError("unknown loss '" + std::string(name) + "'");
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double m = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  if (spec_.layers.empty()) throw ShapeError("network needs at least one layer");
  offsets_.push_back(0);
  std::size_t width = spec_.layers.front().in;
  LayerKind prev_kind = LayerKind::Dense;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    LayerSpec& l = spec_.layers[i];
    if (l.kind == LayerKind::LastStep) {
      if (l.in == 0) l.in = width;
      l.out = l.in;
      l.split = (i > 0 && prev_kind == LayerKind::BiLstm) ? l.in / 2 : 0;
    }
    if (l.in != width) {
      throw ShapeError("layer " + std::to_string(i) + " (" + std::string(to_string(l.kind)) +
                       ") expects " + std::to_string(l.in) + " inputs but receives " +
                       std::to_string(width));
    }
    if (l.in == 0 || l.out == 0) throw ShapeError("layer " + std::to_string(i) + " has zero width");
    layers_.push_back(make_layer(l));
    offsets_.push_back(offsets_.back() + layers_.back()->param_count());
    width = l.output_width();
    prev_kind = l.kind;
  }
}

std::vector<double> Network::init_params(std::uint64_t seed) const {
  std::vector<double> params(param_count(), 0.0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->init(std::span<double>(params).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]),
                     rng);
  }
  return params;
}

void Network::check_params(std::span<const double> params) const {
  if (params.size() != param_count()) {
    throw ShapeError("parameter vector has " + std::to_string(params.size()) + " values, network needs " +
                     std::to_string(param_count()));
  }
}

Sequence Network::run(std::span<const double> params, const SequenceView& x, Trace* trace) const {
  check_params(params);
  if (x.features != input_width()) {
    throw ShapeError("input has " + std::to_string(x.features) + " features, network expects " +
                     std::to_string(input_width()));
  }
  Sequence cur(x.time, x.features, std::vector<double>(x.data.begin(), x.data.end()));
  Cache scratch;
  if (trace) {
    trace->acts.clear();
    trace->caches.assign(layers_.size(), {});
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto p = params.subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
    Cache& cache = trace ? trace->caches[i] : scratch;
    Sequence next = layers_[i]->forward(p, cur.view(), cache);
    if (trace) trace->acts.push_back(std::move(cur));
    cur = std::move(next);
  }
  if (cur.time != 1) {
    // Recurrent stacks must end in a pooling layer before the head.
    throw ShapeError("network output must have a single time step; add last_step pooling");
  }
  return cur;
}

std::vector<double> Network::forward(std::span<const double> params, const SequenceView& x) const {
  Sequence out = run(params, x, nullptr);
  for (double v : out.data) {
    if (!std::isfinite(v)) throw NonFiniteError("non-finite network output");
  }
  return std::move(out.data);
}

std::vector<double> Network::predict_proba(std::span<const double> params,
                                           const SequenceView& x) const {
  return softmax(forward(params, x));
}

double Network::loss_from_output(std::span<const double> out, const Target& target,
                                 std::span<double> dout) const {
  if (target.index >= out.size()) throw ShapeError("target index outside network output");
  if (spec_.loss == LossKind::SoftmaxCrossEntropy) {
    const auto p = softmax(out);
    for (std::size_t k = 0; k < out.size(); ++k) {
      dout[k] = p[k] - (k == target.index ? 1.0 : 0.0);
    }
    return -std::log(std::max(p[target.index], 1e-300));
  }
  const double diff = out[target.index] - target.value;
  std::fill(dout.begin(), dout.end(), 0.0);
  dout[target.index] = 2.0 * diff;
  return diff * diff;
}

double Network::loss(std::span<const double> params, const SequenceView& x,
                     const Target& target) const {
  Sequence out = run(params, x, nullptr);
  std::vector<double> dout(out.data.size());
  return loss_from_output(out.data, target, dout);
}

double Network::loss_and_gradient(std::span<const double> params, const SequenceView& x,
                                  const Target& target, std::span<double> grad) const {
  if (grad.size() != param_count()) throw ShapeError("gradient buffer has wrong size");
  Trace trace;
  Sequence out = run(params, x, &trace);
  Sequence dout(1, out.features);
  const double l = loss_from_output(out.data, target, dout.data);
  if (!std::isfinite(l)) throw NonFiniteError("non-finite loss");
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const auto p = params.subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
    auto dp = grad.subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
    const Sequence& in = trace.acts[i];
    dout = layers_[i]->backward(p, in.view(), out, trace.caches[i], dout, dp);
    out = in;
  }
  return l;
}

}  // namespace coach::nn
