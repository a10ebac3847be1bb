#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "deepboost/common.hpp"

// From-scratch 1-D layer kernels: convolution, batch normalization, max
// pooling, nearest-neighbor upsampling, per-timestep dense, ReLU and sigmoid.
// Every kernel has a forward and a backward pass; all arithmetic is double
// precision with fixed summation order so results are run-to-run
// deterministic.

namespace deepboost::nn {

class ShapeError : public Error {
 public:
  enum class Kind { ChannelMismatch, ShapeMismatch, EmptyBatch, IndexOutOfRange, LengthMismatch };
  ShapeError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Timestep-major 2-D tensor: data[t * channels + c].
struct Tensor2 {
  int length = 0;
  int channels = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(int len, int ch)
      : length(len), channels(ch), data(static_cast<std::size_t>(len) * ch, 0.0) {}

  double& at(int t, int c) { return data[static_cast<std::size_t>(t) * channels + c]; }
  double at(int t, int c) const { return data[static_cast<std::size_t>(t) * channels + c]; }
  double* row(int t) { return data.data() + static_cast<std::size_t>(t) * channels; }
  const double* row(int t) const { return data.data() + static_cast<std::size_t>(t) * channels; }
  std::size_t size() const { return data.size(); }

  bool same_shape(const Tensor2& o) const { return length == o.length && channels == o.channels; }
};

// Weights laid out [tap][in_channel][out_channel], out contiguous.
struct ConvKernel {
  int ksize = 0;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> w;

  ConvKernel() = default;
  ConvKernel(int k, int in_ch, int out_ch)
      : ksize(k),
        in_channels(in_ch),
        out_channels(out_ch),
        w(static_cast<std::size_t>(k) * in_ch * out_ch, 0.0) {}

  double& at(int j, int c, int o) {
    return w[(static_cast<std::size_t>(j) * in_channels + c) * out_channels + o];
  }
  double at(int j, int c, int o) const {
    return w[(static_cast<std::size_t>(j) * in_channels + c) * out_channels + o];
  }
  const double* taps(int j, int c) const {
    return w.data() + (static_cast<std::size_t>(j) * in_channels + c) * out_channels;
  }
};

// -------------------------------------------------------------------------
// Convolution (cross-correlation, zero same-padding, stride 1)
// -------------------------------------------------------------------------

// out[t,o] = sum_{j,c} x[t + j - k/2, c] * w[j,c,o], out-of-range x = 0.
// Output length equals input length.
inline Tensor2 conv1d_forward(const Tensor2& x, const ConvKernel& k) {
  if (x.channels != k.in_channels)
    throw ShapeError(ShapeError::Kind::ChannelMismatch, "conv1d_forward: channel mismatch");
  if (k.ksize <= 0 || k.ksize % 2 == 0)
    throw ShapeError(ShapeError::Kind::ShapeMismatch, "conv1d_forward: kernel length must be odd");
  const int half = k.ksize / 2;
  Tensor2 out(x.length, k.out_channels);
  for (int t = 0; t < x.length; ++t) {
    double* out_row = out.row(t);
    for (int j = 0; j < k.ksize; ++j) {
      const int s = t + j - half;
      if (s < 0 || s >= x.length) continue;
      const double* x_row = x.row(s);
      for (int c = 0; c < k.in_channels; ++c) {
        const double xv = x_row[c];
        const double* taps = k.taps(j, c);
        for (int o = 0; o < k.out_channels; ++o) out_row[o] += xv * taps[o];
      }
    }
  }
  return out;
}

struct ConvGrads {
  Tensor2 grad_x;
  std::vector<double> grad_w;  // same layout as ConvKernel::w
};

// grad_w[j,c,o] = sum_t upstream[t,o] * x[t+j-k/2, c];
// grad_x is upstream mapped back through the transposed (flipped) kernels.
inline ConvGrads conv1d_backward(const Tensor2& x, const ConvKernel& k, const Tensor2& upstream) {
  if (upstream.length != x.length || upstream.channels != k.out_channels ||
      x.channels != k.in_channels)
    throw ShapeError(ShapeError::Kind::ShapeMismatch, "conv1d_backward: shape mismatch");
  const int half = k.ksize / 2;
  ConvGrads g;
  g.grad_x = Tensor2(x.length, x.channels);
  g.grad_w.assign(k.w.size(), 0.0);
  for (int t = 0; t < x.length; ++t) {
    const double* up_row = upstream.row(t);
    for (int j = 0; j < k.ksize; ++j) {
      const int s = t + j - half;
      if (s < 0 || s >= x.length) continue;
      const double* x_row = x.row(s);
      for (int c = 0; c < k.in_channels; ++c) {
        const double xv = x_row[c];
        double* gw = g.grad_w.data() +
                     (static_cast<std::size_t>(j) * k.in_channels + c) * k.out_channels;
        for (int o = 0; o < k.out_channels; ++o) gw[o] += xv * up_row[o];
      }
    }
  }
  for (int t = 0; t < x.length; ++t) {
    double* gx_row = g.grad_x.row(t);
    for (int j = 0; j < k.ksize; ++j) {
      const int s = t + half - j;  // upstream position whose window covers t
      if (s < 0 || s >= x.length) continue;
      const double* up_row = upstream.row(s);
      for (int c = 0; c < k.in_channels; ++c) {
        const double* taps = k.taps(j, c);
        double acc = 0.0;
        for (int o = 0; o < k.out_channels; ++o) acc += up_row[o] * taps[o];
        gx_row[c] += acc;
      }
    }
  }
  return g;
}

// -------------------------------------------------------------------------
// Batch normalization
// -------------------------------------------------------------------------

enum class BnMode { Train, Infer };

struct BatchNormState {
  int channels = 0;
  std::vector<double> gamma, beta, running_mean, running_var;

  BatchNormState() = default;
  explicit BatchNormState(int ch)
      : channels(ch),
        gamma(static_cast<std::size_t>(ch), 1.0),
        beta(static_cast<std::size_t>(ch), 0.0),
        running_mean(static_cast<std::size_t>(ch), 0.0),
        running_var(static_cast<std::size_t>(ch), 1.0) {}
};

struct BatchNormCache {
  std::vector<Tensor2> xhat;
  std::vector<double> batch_mean, batch_var, inv_std;
  double count = 0;  // batch * timesteps per channel
};

// Train mode normalizes with batch statistics (biased variance over
// batch x timesteps); infer mode uses the running statistics. The cache is
// filled in train mode only.
inline std::vector<Tensor2> batchnorm_forward(const std::vector<Tensor2>& batch,
                                              const BatchNormState& bn, double eps, BnMode mode,
                                              BatchNormCache* cache = nullptr) {
  if (batch.empty())
    throw ShapeError(ShapeError::Kind::EmptyBatch, "batchnorm_forward: empty batch");
  const int ch = bn.channels;
  for (const auto& t : batch)
    if (t.channels != ch || t.length != batch[0].length)
      throw ShapeError(ShapeError::Kind::ShapeMismatch, "batchnorm_forward: ragged batch");
  if (eps <= 0) throw Error("batchnorm_forward: eps must be positive");

  std::vector<double> mean(ch, 0.0), var(ch, 0.0), inv_std(ch, 0.0);
  const double count = static_cast<double>(batch.size()) * batch[0].length;
  if (mode == BnMode::Train) {
    for (const auto& t : batch)
      for (int i = 0; i < t.length; ++i) {
        const double* row = t.row(i);
        for (int c = 0; c < ch; ++c) mean[c] += row[c];
      }
    for (int c = 0; c < ch; ++c) mean[c] /= count;
    for (const auto& t : batch)
      for (int i = 0; i < t.length; ++i) {
        const double* row = t.row(i);
        for (int c = 0; c < ch; ++c) {
          const double d = row[c] - mean[c];
          var[c] += d * d;
        }
      }
    for (int c = 0; c < ch; ++c) var[c] /= count;
  } else {
    mean = bn.running_mean;
    var = bn.running_var;
  }
  for (int c = 0; c < ch; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);

  std::vector<Tensor2> out;
  out.reserve(batch.size());
  if (cache) {
    cache->xhat.clear();
    cache->xhat.reserve(batch.size());
  }
  for (const auto& t : batch) {
    Tensor2 y(t.length, ch);
    Tensor2 xh(t.length, ch);
    for (int i = 0; i < t.length; ++i) {
      const double* row = t.row(i);
      double* y_row = y.row(i);
      double* xh_row = xh.row(i);
      for (int c = 0; c < ch; ++c) {
        const double n = (row[c] - mean[c]) * inv_std[c];
        xh_row[c] = n;
        y_row[c] = bn.gamma[c] * n + bn.beta[c];
      }
    }
    out.push_back(std::move(y));
    if (cache) cache->xhat.push_back(std::move(xh));
  }
  if (cache) {
    cache->batch_mean = mean;
    cache->batch_var = var;
    cache->inv_std = inv_std;
    cache->count = count;
  }
  return out;
}

inline void update_running_stats(BatchNormState& bn, const BatchNormCache& cache,
                                 double momentum) {
  for (int c = 0; c < bn.channels; ++c) {
    bn.running_mean[c] = momentum * bn.running_mean[c] + (1.0 - momentum) * cache.batch_mean[c];
    bn.running_var[c] = momentum * bn.running_var[c] + (1.0 - momentum) * cache.batch_var[c];
  }
}

// Train-mode forward: batch statistics plus the momentum update of the
// running statistics.
inline std::vector<Tensor2> batchnorm_forward_train(const std::vector<Tensor2>& batch,
                                                    BatchNormState& bn, double eps,
                                                    double momentum, BatchNormCache& cache) {
  auto out = batchnorm_forward(batch, bn, eps, BnMode::Train, &cache);
  update_running_stats(bn, cache, momentum);
  return out;
}

struct BatchNormGrads {
  std::vector<Tensor2> grad_x;
  std::vector<double> grad_gamma, grad_beta;
};

// Chain rule through the train-mode normalization:
//   grad_beta  = sum(up), grad_gamma = sum(up * xhat),
//   grad_x     = gamma * inv_std * (up - grad_beta/N - xhat * grad_gamma/N).
inline BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const BatchNormState& bn,
                                         const std::vector<Tensor2>& upstream) {
  if (upstream.size() != cache.xhat.size())
    throw ShapeError(ShapeError::Kind::ShapeMismatch, "batchnorm_backward: batch size mismatch");
  const int ch = bn.channels;
  BatchNormGrads g;
  g.grad_gamma.assign(static_cast<std::size_t>(ch), 0.0);
  g.grad_beta.assign(static_cast<std::size_t>(ch), 0.0);
  for (std::size_t b = 0; b < upstream.size(); ++b) {
    const Tensor2& up = upstream[b];
    const Tensor2& xh = cache.xhat[b];
    if (!up.same_shape(xh))
      throw ShapeError(ShapeError::Kind::ShapeMismatch, "batchnorm_backward: shape mismatch");
    for (int i = 0; i < up.length; ++i) {
      const double* up_row = up.row(i);
      const double* xh_row = xh.row(i);
      for (int c = 0; c < ch; ++c) {
        g.grad_beta[c] += up_row[c];
        g.grad_gamma[c] += up_row[c] * xh_row[c];
      }
    }
  }
  const double inv_n = 1.0 / cache.count;
  g.grad_x.reserve(upstream.size());
  for (std::size_t b = 0; b < upstream.size(); ++b) {
    const Tensor2& up = upstream[b];
    const Tensor2& xh = cache.xhat[b];
    Tensor2 gx(up.length, ch);
    for (int i = 0; i < up.length; ++i) {
      const double* up_row = up.row(i);
      const double* xh_row = xh.row(i);
      double* gx_row = gx.row(i);
      for (int c = 0; c < ch; ++c) {
        gx_row[c] = bn.gamma[c] * cache.inv_std[c] *
                    (up_row[c] - g.grad_beta[c] * inv_n - xh_row[c] * g.grad_gamma[c] * inv_n);
      }
    }
    g.grad_x.push_back(std::move(gx));
  }
  return g;
}

// -------------------------------------------------------------------------
// Max pooling (size 2, stride 2, ceil mode)
// -------------------------------------------------------------------------

struct PoolResult {
  Tensor2 out;
  std::vector<int> argmax;  // winning input timestep per (output cell, channel)
};

// Odd lengths are padded with -inf, so output length = ceil(len/2).
// Ties pick the lower input index.
inline PoolResult maxpool1d_forward(const Tensor2& x) {
  const int out_len = (x.length + 1) / 2;
  PoolResult r;
  r.out = Tensor2(out_len, x.channels);
  r.argmax.assign(static_cast<std::size_t>(out_len) * x.channels, 0);
  for (int p = 0; p < out_len; ++p) {
    const int i0 = 2 * p;
    const int i1 = i0 + 1;
    const double* row0 = x.row(i0);
    const double* row1 = i1 < x.length ? x.row(i1) : nullptr;
    double* out_row = r.out.row(p);
    int* am_row = r.argmax.data() + static_cast<std::size_t>(p) * x.channels;
    for (int c = 0; c < x.channels; ++c) {
      const double v0 = row0[c];
      const double v1 = row1 ? row1[c] : -std::numeric_limits<double>::infinity();
      if (v1 > v0) {
        out_row[c] = v1;
        am_row[c] = i1;
      } else {
        out_row[c] = v0;
        am_row[c] = i0;
      }
    }
  }
  return r;
}

// Routes upstream to the recorded argmax positions; everything else is zero.
inline Tensor2 maxpool1d_backward(const std::vector<int>& argmax, const Tensor2& upstream,
                                  int input_length) {
  if (argmax.size() != upstream.size())
    throw ShapeError(ShapeError::Kind::ShapeMismatch, "maxpool1d_backward: argmax size mismatch");
  Tensor2 gx(input_length, upstream.channels);
  for (int p = 0; p < upstream.length; ++p) {
    const double* up_row = upstream.row(p);
    const int* am_row = argmax.data() + static_cast<std::size_t>(p) * upstream.channels;
    for (int c = 0; c < upstream.channels; ++c) {
      const int src = am_row[c];
      if (src < 0 || src >= input_length)
        throw ShapeError(ShapeError::Kind::IndexOutOfRange, "maxpool1d_backward: argmax out of range");
      gx.at(src, c) += up_row[c];
    }
  }
  return gx;
}

// -------------------------------------------------------------------------
// Nearest-neighbor upsampling
// -------------------------------------------------------------------------

inline Tensor2 upsample1d_forward(const Tensor2& x, int factor = 2) {
  if (factor < 1) throw Error("upsample1d_forward: factor must be >= 1");
  Tensor2 out(x.length * factor, x.channels);
  for (int t = 0; t < out.length; ++t) {
    const double* src = x.row(t / factor);
    double* dst = out.row(t);
    for (int c = 0; c < x.channels; ++c) dst[c] = src[c];
  }
  return out;
}

// grad_x[t] = sum of the `factor` upstream cells copied from t.
inline Tensor2 upsample1d_backward(const Tensor2& upstream, int factor = 2) {
  if (factor < 1) throw Error("upsample1d_backward: factor must be >= 1");
  if (upstream.length % factor != 0)
    throw ShapeError(ShapeError::Kind::ShapeMismatch,
                     "upsample1d_backward: length not divisible by factor");
  Tensor2 gx(upstream.length / factor, upstream.channels);
  for (int t = 0; t < upstream.length; ++t) {
    const double* up_row = upstream.row(t);
    double* gx_row = gx.row(t / factor);
    for (int c = 0; c < upstream.channels; ++c) gx_row[c] += up_row[c];
  }
  return gx;
}

// -------------------------------------------------------------------------
// Per-timestep dense (no bias)
// -------------------------------------------------------------------------

// out[t,o] = sum_c x[t,c] * w[c*out_ch + o].
inline Tensor2 dense_forward(const Tensor2& x, const std::vector<double>& w, int in_ch,
                             int out_ch) {
  if (x.channels != in_ch || w.size() != static_cast<std::size_t>(in_ch) * out_ch)
    throw ShapeError(ShapeError::Kind::ChannelMismatch, "dense_forward: channel mismatch");
  Tensor2 out(x.length, out_ch);
  for (int t = 0; t < x.length; ++t) {
    const double* x_row = x.row(t);
    double* out_row = out.row(t);
    for (int c = 0; c < in_ch; ++c) {
      const double xv = x_row[c];
      const double* w_row = w.data() + static_cast<std::size_t>(c) * out_ch;
      for (int o = 0; o < out_ch; ++o) out_row[o] += xv * w_row[o];
    }
  }
  return out;
}

struct DenseGrads {
  Tensor2 grad_x;
  std::vector<double> grad_w;
};

inline DenseGrads dense_backward(const Tensor2& x, const std::vector<double>& w, int in_ch,
                                 int out_ch, const Tensor2& upstream) {
  if (upstream.length != x.length || upstream.channels != out_ch || x.channels != in_ch)
    throw ShapeError(ShapeError::Kind::ShapeMismatch, "dense_backward: shape mismatch");
  DenseGrads g;
  g.grad_x = Tensor2(x.length, in_ch);
  g.grad_w.assign(w.size(), 0.0);
  for (int t = 0; t < x.length; ++t) {
    const double* x_row = x.row(t);
    const double* up_row = upstream.row(t);
    double* gx_row = g.grad_x.row(t);
    for (int c = 0; c < in_ch; ++c) {
      const double* w_row = w.data() + static_cast<std::size_t>(c) * out_ch;
      double* gw_row = g.grad_w.data() + static_cast<std::size_t>(c) * out_ch;
      double acc = 0.0;
      for (int o = 0; o < out_ch; ++o) {
        gw_row[o] += up_row[o] * x_row[c];
        acc += up_row[o] * w_row[o];
      }
      gx_row[c] = acc;
    }
  }
  return g;
}

// -------------------------------------------------------------------------
// Activations
// -------------------------------------------------------------------------

enum class Activation : std::uint8_t { None = 0, Relu = 1, Sigmoid = 2 };

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Tensor2 activation_forward(const Tensor2& x, Activation kind) {
  Tensor2 out = x;
  switch (kind) {
    case Activation::None:
      break;
    case Activation::Relu:
      for (double& v : out.data) v = v > 0 ? v : 0.0;
      break;
    case Activation::Sigmoid:
      for (double& v : out.data) v = sigmoid(v);
      break;
  }
  return out;
}

// Elementwise derivative gate, expressed through the forward OUTPUT:
// relu' = [y > 0], sigmoid' = y * (1 - y).
inline Tensor2 activation_backward(const Tensor2& output, const Tensor2& upstream,
                                   Activation kind) {
  if (!output.same_shape(upstream))
    throw ShapeError(ShapeError::Kind::ShapeMismatch, "activation_backward: shape mismatch");
  Tensor2 gx = upstream;
  switch (kind) {
    case Activation::None:
      break;
    case Activation::Relu:
      for (std::size_t i = 0; i < gx.data.size(); ++i)
        if (!(output.data[i] > 0)) gx.data[i] = 0.0;
      break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < gx.data.size(); ++i)
        gx.data[i] *= output.data[i] * (1.0 - output.data[i]);
      break;
  }
  return gx;
}

// -------------------------------------------------------------------------
// Layer specifications
// -------------------------------------------------------------------------

enum class LayerKind : std::uint8_t {
  Input = 0,
  Conv1d = 1,
  BatchNorm = 2,
  MaxPool = 3,
  Upsample = 4,
  Dense = 5,
  Relu = 6,
  Sigmoid = 7,
};

struct LayerSpec {
  LayerKind kind = LayerKind::Input;
  Activation act = Activation::None;  // fused activation on conv/dense rows
  int kernel_size = 0;
  int stride = 1;
  int in_channels = 0;
  int out_channels = 0;
  int factor = 2;  // pool size / upsample scale
  std::string name;
};

// Convolutions and the dense layer carry no bias; batch-norm rows count
// gamma, beta and both running statistics (4 per channel).
inline long count_parameters(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::Conv1d:
      return static_cast<long>(spec.kernel_size) * spec.in_channels * spec.out_channels;
    case LayerKind::BatchNorm:
      return 4L * spec.out_channels;
    case LayerKind::Dense:
      return static_cast<long>(spec.in_channels) * spec.out_channels;
    default:
      return 0;
  }
}

// Output length of one layer under same-padding rules: conv keeps the
// length at stride 1, pooling halves it (ceil), upsampling multiplies.
inline int output_length(const LayerSpec& spec, int input_length) {
  switch (spec.kind) {
    case LayerKind::MaxPool:
      return (input_length + spec.factor - 1) / spec.factor;
    case LayerKind::Upsample:
      return input_length * spec.factor;
    default:
      return input_length;
  }
}

}  // namespace deepboost::nn
