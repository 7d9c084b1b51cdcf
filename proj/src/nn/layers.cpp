#include "coach/nn/layers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace coach::nn {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y += W x, W is rows x cols row-major.
void gemv_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
              std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
}

// x_grad += W^T dy
void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> dy, std::span<double> x_grad) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w.data() + r * cols;
    const double g = dy[r];
    if (g == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) x_grad[c] += wr[c] * g;
  }
}

// dW += dy x^T
void outer_acc(std::span<const double> dy, std::span<const double> x, std::span<double> dw) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < dy.size(); ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    double* dwr = dw.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) dwr[c] += g * x[c];
  }
}

void fill_uniform(std::span<double> xs, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& x : xs) x = dist(rng);
}

void check_input(const SequenceView& in, std::size_t width, const char* layer) {
  if (in.features != width) {
    throw ShapeError(std::string(layer) + " expects " + std::to_string(width) +
                     " input features, got " + std::to_string(in.features));
  }
  if (in.time == 0) throw ShapeError(std::string(layer) + " received an empty sequence");
}

// ---------------------------------------------------------------------------

class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out, Activation act) : in_(in), out_(out), act_(act) {}

  std::size_t param_count() const override { return out_ * in_ + out_; }

  void init(std::span<double> p, std::mt19937_64& rng) const override {
    fill_uniform(p.first(out_ * in_), std::sqrt(6.0 / static_cast<double>(in_ + out_)), rng);
    std::fill(p.begin() + out_ * in_, p.end(), 0.0);
  }

  Sequence forward(std::span<const double> p, const SequenceView& in, Cache&) const override {
    check_input(in, in_, "dense");
    const auto w = p.first(out_ * in_);
    const auto b = p.subspan(out_ * in_, out_);
    Sequence out(in.time, out_);
    for (std::size_t t = 0; t < in.time; ++t) {
      auto y = out.row(t);
      std::copy(b.begin(), b.end(), y.begin());
      gemv_acc(w, out_, in_, in.row(t), y);
      for (double& v : y) v = activate(act_, v);
    }
    return out;
  }

  Sequence backward(std::span<const double> p, const SequenceView& in, const Sequence& out,
                    const Cache&, const Sequence& dout, std::span<double> dp) const override {
    const auto w = p.first(out_ * in_);
    auto dw = dp.first(out_ * in_);
    auto db = dp.subspan(out_ * in_, out_);
    Sequence din(in.time, in_);
    std::vector<double> dpre(out_);
    for (std::size_t t = 0; t < in.time; ++t) {
      for (std::size_t o = 0; o < out_; ++o) {
        dpre[o] = dout.at(t, o) * activate_grad_from_output(act_, out.at(t, o));
        db[o] += dpre[o];
      }
      outer_acc(dpre, in.row(t), dw);
      gemv_t_acc(w, out_, in_, dpre, din.row(t));
    }
    return din;
  }

 private:
  std::size_t in_, out_;
  Activation act_;
};

// ---------------------------------------------------------------------------
// Gate order i, f, g, o. Params: W (4H x in) | U (4H x H) | b (4H).

class Lstm final : public Layer {
 public:
  Lstm(std::size_t in, std::size_t hidden) : in_(in), h_(hidden) {}

  std::size_t param_count() const override { return 4 * h_ * (in_ + h_ + 1); }

  void init(std::span<double> p, std::mt19937_64& rng) const override {
    const double limit = 1.0 / std::sqrt(static_cast<double>(h_));
    fill_uniform(p.first(4 * h_ * (in_ + h_)), limit, rng);
    auto b = p.subspan(4 * h_ * (in_ + h_), 4 * h_);
    std::fill(b.begin(), b.end(), 0.0);
    std::fill(b.begin() + h_, b.begin() + 2 * h_, 1.0);
  }

  // Cache per step: i f g o c tanh(c)  (6H)
  Sequence forward(std::span<const double> p, const SequenceView& in, Cache& cache) const override {
    check_input(in, in_, "lstm");
    const auto w = p.first(4 * h_ * in_);
    const auto u = p.subspan(4 * h_ * in_, 4 * h_ * h_);
    const auto b = p.subspan(4 * h_ * (in_ + h_), 4 * h_);
    const std::size_t steps = in.time;
    Sequence out(steps, h_);
    cache.assign(steps * 6 * h_, 0.0);
    std::vector<double> z(4 * h_), h_prev(h_, 0.0), c_prev(h_, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
      std::copy(b.begin(), b.end(), z.begin());
      gemv_acc(w, 4 * h_, in_, in.row(t), z);
      gemv_acc(u, 4 * h_, h_, h_prev, z);
      double* cs = cache.data() + t * 6 * h_;
      auto h = out.row(t);
      for (std::size_t k = 0; k < h_; ++k) {
        const double ig = sigmoid(z[k]);
        const double fg = sigmoid(z[h_ + k]);
        const double gg = std::tanh(z[2 * h_ + k]);
        const double og = sigmoid(z[3 * h_ + k]);
        const double c = fg * c_prev[k] + ig * gg;
        const double tc = std::tanh(c);
        cs[k] = ig;
        cs[h_ + k] = fg;
        cs[2 * h_ + k] = gg;
        cs[3 * h_ + k] = og;
        cs[4 * h_ + k] = c;
        cs[5 * h_ + k] = tc;
        h[k] = og * tc;
        c_prev[k] = c;
      }
      std::copy(h.begin(), h.end(), h_prev.begin());
    }
    return out;
  }

  Sequence backward(std::span<const double> p, const SequenceView& in, const Sequence& out,
                    const Cache& cache, const Sequence& dout, std::span<double> dp) const override {
    const auto w = p.first(4 * h_ * in_);
    const auto u = p.subspan(4 * h_ * in_, 4 * h_ * h_);
    auto dw = dp.first(4 * h_ * in_);
    auto du = dp.subspan(4 * h_ * in_, 4 * h_ * h_);
    auto db = dp.subspan(4 * h_ * (in_ + h_), 4 * h_);
    const std::size_t steps = in.time;
    Sequence din(steps, in_);
    std::vector<double> dh_next(h_, 0.0), dc_next(h_, 0.0), dz(4 * h_), zeros(h_, 0.0);
    for (std::size_t t = steps; t-- > 0;) {
      const double* cs = cache.data() + t * 6 * h_;
      const double* c_prev = t > 0 ? cache.data() + (t - 1) * 6 * h_ + 4 * h_ : zeros.data();
      for (std::size_t k = 0; k < h_; ++k) {
        const double ig = cs[k], fg = cs[h_ + k], gg = cs[2 * h_ + k], og = cs[3 * h_ + k];
        const double tc = cs[5 * h_ + k];
        const double dh = dout.at(t, k) + dh_next[k];
        const double d_o = dh * tc;
        const double dc = dh * og * (1.0 - tc * tc) + dc_next[k];
        dz[k] = dc * gg * ig * (1.0 - ig);
        dz[h_ + k] = dc * c_prev[k] * fg * (1.0 - fg);
        dz[2 * h_ + k] = dc * ig * (1.0 - gg * gg);
        dz[3 * h_ + k] = d_o * og * (1.0 - og);
        dc_next[k] = dc * fg;
      }
      for (std::size_t r = 0; r < 4 * h_; ++r) db[r] += dz[r];
      outer_acc(dz, in.row(t), dw);
      if (t > 0) outer_acc(dz, out.row(t - 1), du);
      gemv_t_acc(w, 4 * h_, in_, dz, din.row(t));
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      gemv_t_acc(u, 4 * h_, h_, dz, dh_next);
    }
    return din;
  }

 private:
  std::size_t in_, h_;
};

// ---------------------------------------------------------------------------
// Gate order z (update), r (reset), n (candidate).
// h' = (1 - z) * n + z * h,  n = tanh(Wn x + Un (r * h) + bn).

class Gru final : public Layer {
 public:
  Gru(std::size_t in, std::size_t hidden) : in_(in), h_(hidden) {}

  std::size_t param_count() const override { return 3 * h_ * (in_ + h_ + 1); }

  void init(std::span<double> p, std::mt19937_64& rng) const override {
    const double limit = 1.0 / std::sqrt(static_cast<double>(h_));
    fill_uniform(p.first(3 * h_ * (in_ + h_)), limit, rng);
    auto b = p.subspan(3 * h_ * (in_ + h_));
    std::fill(b.begin(), b.end(), 0.0);
  }

  // Cache per step: z r n (r*h_prev)  (4H)
  Sequence forward(std::span<const double> p, const SequenceView& in, Cache& cache) const override {
    check_input(in, in_, "gru");
    const auto w = p.first(3 * h_ * in_);
    const auto u = p.subspan(3 * h_ * in_, 3 * h_ * h_);
    const auto b = p.subspan(3 * h_ * (in_ + h_), 3 * h_);
    const std::size_t steps = in.time;
    Sequence out(steps, h_);
    cache.assign(steps * 4 * h_, 0.0);
    std::vector<double> xz(3 * h_), hz(2 * h_), hn(h_), h_prev(h_, 0.0), rh(h_);
    for (std::size_t t = 0; t < steps; ++t) {
      std::copy(b.begin(), b.end(), xz.begin());
      gemv_acc(w, 3 * h_, in_, in.row(t), xz);
      std::fill(hz.begin(), hz.end(), 0.0);
      gemv_acc(u.first(2 * h_ * h_), 2 * h_, h_, h_prev, hz);
      double* cs = cache.data() + t * 4 * h_;
      for (std::size_t k = 0; k < h_; ++k) {
        cs[k] = sigmoid(xz[k] + hz[k]);
        cs[h_ + k] = sigmoid(xz[h_ + k] + hz[h_ + k]);
        rh[k] = cs[h_ + k] * h_prev[k];
        cs[3 * h_ + k] = rh[k];
      }
      std::fill(hn.begin(), hn.end(), 0.0);
      gemv_acc(u.subspan(2 * h_ * h_), h_, h_, rh, hn);
      auto h = out.row(t);
      for (std::size_t k = 0; k < h_; ++k) {
        const double n = std::tanh(xz[2 * h_ + k] + hn[k]);
        cs[2 * h_ + k] = n;
        const double zg = cs[k];
        h[k] = (1.0 - zg) * n + zg * h_prev[k];
      }
      std::copy(h.begin(), h.end(), h_prev.begin());
    }
    return out;
  }

  Sequence backward(std::span<const double> p, const SequenceView& in, const Sequence& out,
                    const Cache& cache, const Sequence& dout, std::span<double> dp) const override {
    const auto w = p.first(3 * h_ * in_);
    const auto u = p.subspan(3 * h_ * in_, 3 * h_ * h_);
    const auto u_zr = u.first(2 * h_ * h_);
    const auto u_n = u.subspan(2 * h_ * h_);
    auto dw = dp.first(3 * h_ * in_);
    auto du = dp.subspan(3 * h_ * in_, 3 * h_ * h_);
    auto du_zr = du.first(2 * h_ * h_);
    auto du_n = du.subspan(2 * h_ * h_);
    auto db = dp.subspan(3 * h_ * (in_ + h_), 3 * h_);
    const std::size_t steps = in.time;
    Sequence din(steps, in_);
    std::vector<double> dh_next(h_, 0.0), dz(3 * h_), drh(h_), zeros(h_, 0.0);
    for (std::size_t t = steps; t-- > 0;) {
      const double* cs = cache.data() + t * 4 * h_;
      std::span<const double> h_prev = t > 0 ? out.row(t - 1) : std::span<const double>(zeros);
      std::span<const double> rh(cs + 3 * h_, h_);
      std::vector<double> dh_prev(h_, 0.0);
      for (std::size_t k = 0; k < h_; ++k) {
        const double zg = cs[k], n = cs[2 * h_ + k];
        const double dh = dout.at(t, k) + dh_next[k];
        dz[2 * h_ + k] = dh * (1.0 - zg) * (1.0 - n * n);
        dz[k] = dh * (h_prev[k] - n) * zg * (1.0 - zg);
        dh_prev[k] = dh * zg;
      }
      // candidate path through r * h_prev
      std::fill(drh.begin(), drh.end(), 0.0);
      std::span<const double> dzn(dz.data() + 2 * h_, h_);
      gemv_t_acc(u_n, h_, h_, dzn, drh);
      outer_acc(dzn, rh, du_n);
      for (std::size_t k = 0; k < h_; ++k) {
        const double rg = cs[h_ + k];
        dz[h_ + k] = drh[k] * h_prev[k] * rg * (1.0 - rg);
        dh_prev[k] += drh[k] * rg;
      }
      std::span<const double> dzr(dz.data(), 2 * h_);
      outer_acc(dzr, h_prev, du_zr);
      gemv_t_acc(u_zr, 2 * h_, h_, dzr, dh_prev);
      for (std::size_t r = 0; r < 3 * h_; ++r) db[r] += dz[r];
      outer_acc(dz, in.row(t), dw);
      gemv_t_acc(w, 3 * h_, in_, dz, din.row(t));
      dh_next = std::move(dh_prev);
    }
    return din;
  }

 private:
  std::size_t in_, h_;
};

// ---------------------------------------------------------------------------
// Two independent LSTMs; the backward one reads the sequence reversed and its
// states are written back at their original time positions, so the final
// backward state lives at t = 0.

Sequence reversed(const SequenceView& in) {
  Sequence r(in.time, in.features);
  for (std::size_t t = 0; t < in.time; ++t) {
    auto src = in.row(in.time - 1 - t);
    std::copy(src.begin(), src.end(), r.row(t).begin());
  }
  return r;
}

class BiLstm final : public Layer {
 public:
  BiLstm(std::size_t in, std::size_t hidden) : in_(in), h_(hidden), cell_(in, hidden) {}

  std::size_t param_count() const override { return 2 * cell_.param_count(); }

  void init(std::span<double> p, std::mt19937_64& rng) const override {
    cell_.init(p.first(cell_.param_count()), rng);
    cell_.init(p.subspan(cell_.param_count()), rng);
  }

  // Cache layout: [fwd cache | bwd cache]; both have the same size.
  Sequence forward(std::span<const double> p, const SequenceView& in, Cache& cache) const override {
    check_input(in, in_, "bilstm");
    const std::size_t n = cell_.param_count();
    Cache cf, cb;
    Sequence hf = cell_.forward(p.first(n), in, cf);
    Sequence rin = reversed(in);
    Sequence hb = cell_.forward(p.subspan(n), rin.view(), cb);
    cache.clear();
    cache.reserve(cf.size() + cb.size());
    cache.insert(cache.end(), cf.begin(), cf.end());
    cache.insert(cache.end(), cb.begin(), cb.end());
    Sequence out(in.time, 2 * h_);
    for (std::size_t t = 0; t < in.time; ++t) {
      auto fr = hf.row(t);
      auto br = hb.row(in.time - 1 - t);
      std::copy(fr.begin(), fr.end(), out.row(t).begin());
      std::copy(br.begin(), br.end(), out.row(t).begin() + h_);
    }
    return out;
  }

  Sequence backward(std::span<const double> p, const SequenceView& in, const Sequence& out,
                    const Cache& cache, const Sequence& dout, std::span<double> dp) const override {
    const std::size_t n = cell_.param_count();
    const std::size_t steps = in.time;
    const std::size_t half = cache.size() / 2;
    Cache cf(cache.begin(), cache.begin() + half), cb(cache.begin() + half, cache.end());
    Sequence hf(steps, h_), hb(steps, h_), dhf(steps, h_), dhb(steps, h_);
    for (std::size_t t = 0; t < steps; ++t) {
      const std::size_t rt = steps - 1 - t;
      for (std::size_t k = 0; k < h_; ++k) {
        hf.at(t, k) = out.at(t, k);
        hb.at(rt, k) = out.at(t, h_ + k);
        dhf.at(t, k) = dout.at(t, k);
        dhb.at(rt, k) = dout.at(t, h_ + k);
      }
    }
    Sequence din = cell_.backward(p.first(n), in, hf, cf, dhf, dp.first(n));
    Sequence rin = reversed(in);
    Sequence drin = cell_.backward(p.subspan(n), rin.view(), hb, cb, dhb, dp.subspan(n));
    for (std::size_t t = 0; t < steps; ++t) {
      auto src = drin.row(steps - 1 - t);
      auto dst = din.row(t);
      for (std::size_t f = 0; f < in_; ++f) dst[f] += src[f];
    }
    return din;
  }

 private:
  std::size_t in_, h_;
  Lstm cell_;
};

// ---------------------------------------------------------------------------

class LastStep final : public Layer {
 public:
  LastStep(std::size_t width, std::size_t split) : width_(width), split_(split) {}

  std::size_t param_count() const override { return 0; }
  void init(std::span<double>, std::mt19937_64&) const override {}

  Sequence forward(std::span<const double>, const SequenceView& in, Cache&) const override {
    check_input(in, width_, "last_step");
    Sequence out(1, width_);
    const std::size_t last = in.time - 1;
    for (std::size_t f = 0; f < width_; ++f) {
      out.at(0, f) = (split_ == 0 || f < split_) ? in.at(last, f) : in.at(0, f);
    }
    return out;
  }

  Sequence backward(std::span<const double>, const SequenceView& in, const Sequence&, const Cache&,
                    const Sequence& dout, std::span<double>) const override {
    Sequence din(in.time, width_);
    const std::size_t last = in.time - 1;
    for (std::size_t f = 0; f < width_; ++f) {
      din.at((split_ == 0 || f < split_) ? last : 0, f) += dout.at(0, f);
    }
    return din;
  }

 private:
  std::size_t width_, split_;
};

}  // namespace

double activate(Activation a, double x) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Tanh: return std::tanh(x);
    case Activation::Sigmoid: return sigmoid(x);
  }
  return x;
}

double activate_grad_from_output(Activation a, double y) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: return 1.0 - y * y;
    case Activation::Sigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

std::unique_ptr<Layer> make_layer(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::Dense: return std::make_unique<Dense>(spec.in, spec.out, spec.activation);
    case LayerKind::Lstm: return std::make_unique<Lstm>(spec.in, spec.out);
    case LayerKind::Gru: return std::make_unique<Gru>(spec.in, spec.out);
    case LayerKind::BiLstm: return std::make_unique<BiLstm>(spec.in, spec.out);
    case LayerKind::LastStep: return std::make_unique<LastStep>(spec.in, spec.split);
  }
  throw ShapeError("unknown layer kind");
}

namespace {
constexpr std::array<std::string_view, 4> kActivationNames = {"identity", "relu", "tanh", "sigmoid"};
constexpr std::array<std::string_view, 5> kLayerNames = {"dense", "lstm", "gru", "bilstm", "last_step"};
}  // namespace

std::string_view to_string(Activation a) { return kActivationNames[static_cast<int>(a)]; }
std::string_view to_string(LayerKind k) { return kLayerNames[static_cast<int>(k)]; }

Activation parse_activation(std::string_view name) {
  for (std::size_t i = 0; i < kActivationNames.size(); ++i) {
    if (kActivationNames[i] == name) return static_cast<Activation>(i);
  }
  throw ShapeError("unknown activation '" + std::string(name) + "'");
}

LayerKind parse_layer_kind(std::string_view name) {
  for (std::size_t i = 0; i < kLayerNames.size(); ++i) {
    if (kLayerNames[i] == name) return static_cast<LayerKind>(i);
  }
  throw ShapeError("unknown layer kind '" + std::string(name) + "'");
}

}  // namespace coach::nn
