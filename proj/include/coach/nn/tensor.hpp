#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

#include "coach/core/error.hpp"

namespace coach::nn {

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Read-only view of one sample: `time` rows of `features` values.
struct SequenceView {
  std::size_t time = 0;
  std::size_t features = 0;
  std::span<const double> data;

  double at(std::size_t t, std::size_t f) const { return data[t * features + f]; }
  std::span<const double> row(std::size_t t) const { return data.subspan(t * features, features); }
};

/// One sample's activations, row-major (time x features).
struct Sequence {
  std::size_t time = 0;
  std::size_t features = 0;
  std::vector<double> data;

  Sequence() = default;
  Sequence(std::size_t t, std::size_t f) : time(t), features(f), data(t * f, 0.0) {}
  Sequence(std::size_t t, std::size_t f, std::vector<double> values)
      : time(t), features(f), data(std::move(values)) {
    if (data.size() != t * f) throw ShapeError("sequence data size does not match shape");
  }

  double& at(std::size_t t, std::size_t f) { return data[t * features + f]; }
  double at(std::size_t t, std::size_t f) const { return data[t * features + f]; }
  std::span<double> row(std::size_t t) { return {data.data() + t * features, features}; }
  std::span<const double> row(std::size_t t) const {
    return {data.data() + t * features, features};
  }
  SequenceView view() const { return {time, features, data}; }

  bool operator==(const Sequence&) const = default;
};

/// (rows, cols) matrix; used for batches of flat vectors.
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Tensor2&) const = default;
};

/// (batch, time, features) contiguous block.
struct Tensor3 {
  std::size_t batch = 0;
  std::size_t time = 0;
  std::size_t features = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(std::size_t b, std::size_t t, std::size_t f) : batch(b), time(t), features(f), data(b * t * f, 0.0) {}

  // A Tensor2 is a batch of length-1 sequences.
  static Tensor3 from_rows(const Tensor2& m) {
    Tensor3 out(m.rows, 1, m.cols);
    out.data = m.data;
    return out;
  }

  double& at(std::size_t b, std::size_t t, std::size_t f) {
    return data[(b * time + t) * features + f];
  }
  double at(std::size_t b, std::size_t t, std::size_t f) const {
    return data[(b * time + t) * features + f];
  }
  SequenceView sample(std::size_t b) const {
    return {time, features, std::span<const double>(data).subspan(b * time * features, time * features)};
  }
  std::span<double> sample_data(std::size_t b) {
    return std::span<double>(data).subspan(b * time * features, time * features);
  }

  bool operator==(const Tensor3&) const = default;
};

}  // namespace coach::nn
