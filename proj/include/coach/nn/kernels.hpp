#pragma once

#include <span>
#include <vector>

#include "coach/nn/network.hpp"

namespace coach::nn {

enum class Reduction { Mean, Sum };

/// Minibatch loss and gradient over `indices` of (inputs, targets).
///
/// Each sample's gradient is computed into its own buffer and the buffers are
/// summed in index order, so the OpenMP kernel and the serial reference give
/// bit-identical results regardless of thread count.
double batch_gradient(const Network& net, std::span<const double> params, const Tensor3& inputs,
                      std::span<const Target> targets, std::span<const std::size_t> indices,
                      std::span<double> grad, Reduction reduction = Reduction::Mean);

double batch_gradient_serial(const Network& net, std::span<const double> params,
                             const Tensor3& inputs, std::span<const Target> targets,
                             std::span<const std::size_t> indices, std::span<double> grad,
                             Reduction reduction = Reduction::Mean);

/// Network outputs for every sample, one row each.
Tensor2 predict_batch(const Network& net, std::span<const double> params, const Tensor3& inputs);
Tensor2 predict_batch_serial(const Network& net, std::span<const double> params,
                             const Tensor3& inputs);

/// Mean loss over the whole set (no gradient).
double dataset_loss(const Network& net, std::span<const double> params, const Tensor3& inputs,
                    std::span<const Target> targets);

}  // namespace coach::nn
