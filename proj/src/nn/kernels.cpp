#include "coach/nn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>

namespace coach::nn {

namespace {

void check_batch(const Network& net, const Tensor3& inputs, std::span<const Target> targets,
                 std::span<const std::size_t> indices, std::span<double> grad) {
  if (targets.size() != inputs.batch) throw ShapeError("targets and inputs differ in length");
  if (grad.size() != net.param_count()) throw ShapeError("gradient buffer has wrong size");
  if (indices.empty()) throw ShapeError("empty minibatch");
  for (std::size_t i : indices) {
    if (i >= inputs.batch) throw ShapeError("minibatch index out of range");
  }
}

double sum_sample_gradients(std::span<const double> per_sample_grads, std::span<const double> losses,
              std::span<double> grad, Reduction reduction) {
  const std::size_t n = losses.size();
  const std::size_t p = grad.size();
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double* g = per_sample_grads.data() + s * p;
    for (std::size_t k = 0; k < p; ++k) grad[k] += g[k];
    loss += losses[s];
  }
  if (reduction == Reduction::Mean) {
    const double inv = 1.0 / static_cast<double>(n);
    for (double& g : grad) g *= inv;
    loss *= inv;
  }
  if (!std::isfinite(loss)) throw NonFiniteError("non-finite batch loss");
  return loss;
}

}  // namespace

double batch_gradient(const Network& net, std::span<const double> params, const Tensor3& inputs,
                      std::span<const Target> targets, std::span<const std::size_t> indices,
                      std::span<double> grad, Reduction reduction) {
  check_batch(net, inputs, targets, indices, grad);
  const std::size_t n = indices.size();
  const std::size_t p = net.param_count();
  std::vector<double> per_sample(n * p, 0.0);
  std::vector<double> losses(n, 0.0);
  std::exception_ptr failure;
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(static)
  for (long s = 0; s < count; ++s) {
    try {
      const std::size_t i = indices[static_cast<std::size_t>(s)];
      losses[s] = net.loss_and_gradient(params, inputs.sample(i), targets[i],
                                        std::span<double>(per_sample).subspan(s * p, p));
    } catch (...) {
#pragma omp critical(coach_batch_gradient_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return sum_sample_gradients(per_sample, losses, grad, reduction);
}

double batch_gradient_serial(const Network& net, std::span<const double> params,
                             const Tensor3& inputs, std::span<const Target> targets,
                             std::span<const std::size_t> indices, std::span<double> grad,
                             Reduction reduction) {
  check_batch(net, inputs, targets, indices, grad);
  const std::size_t n = indices.size();
  const std::size_t p = net.param_count();
  std::vector<double> per_sample(n * p, 0.0);
  std::vector<double> losses(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t i = indices[s];
    losses[s] = net.loss_and_gradient(params, inputs.sample(i), targets[i],
                                      std::span<double>(per_sample).subspan(s * p, p));
  }
  return sum_sample_gradients(per_sample, losses, grad, reduction);
}

Tensor2 predict_batch(const Network& net, std::span<const double> params, const Tensor3& inputs) {
  Tensor2 out(inputs.batch, net.output_width());
  std::exception_ptr failure;
  const long count = static_cast<long>(inputs.batch);
#pragma omp parallel for schedule(static)
  for (long b = 0; b < count; ++b) {
    try {
      const auto y = net.forward(params, inputs.sample(b));
      std::copy(y.begin(), y.end(), out.row(b).begin());
    } catch (...) {
#pragma omp critical(coach_predict_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

Tensor2 predict_batch_serial(const Network& net, std::span<const double> params,
                             const Tensor3& inputs) {
  Tensor2 out(inputs.batch, net.output_width());
  for (std::size_t b = 0; b < inputs.batch; ++b) {
    const auto y = net.forward(params, inputs.sample(b));
    std::copy(y.begin(), y.end(), out.row(b).begin());
  }
  return out;
}

double dataset_loss(const Network& net, std::span<const double> params, const Tensor3& inputs,
                    std::span<const Target> targets) {
  if (targets.size() != inputs.batch || inputs.batch == 0) {
    throw ShapeError("dataset_loss needs matching, non-empty inputs and targets");
  }
  double total = 0.0;
  for (std::size_t b = 0; b < inputs.batch; ++b) total += net.loss(params, inputs.sample(b), targets[b]);
  return total / static_cast<double>(inputs.batch);
}

}  // namespace coach::nn
