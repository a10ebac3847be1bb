#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "deepboost/common.hpp"
#include "deepboost/neural.hpp"
#include "deepboost/preprocess.hpp"

// The 19-layer convolutional autoencoder: 9 encoder rows compress a 9000x1
// signal to a 1125x16 bottleneck, 10 decoder rows reconstruct it. Trained
// with Adam on mean squared reconstruction error; the encoder alone supplies
// classification features.

namespace deepboost::dcae {

inline constexpr int kBottleneckLength = 1125;
inline constexpr int kBottleneckChannels = 16;
inline constexpr double kBnEps = 1e-3;
inline constexpr double kBnMomentum = 0.99;

class DcaeError : public Error {
 public:
  enum class Kind {
    EmptyTrainingSet,
    NonFiniteLoss,
    VersionMismatch,
    CorruptFile,
    LengthMismatch,
  };
  DcaeError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct OptimizerConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 32;
  int epochs = 30;
};

enum class FeatureMode { Reduce, Flatten };

struct FeatureVector {
  std::string record_id;
  std::vector<double> values;  // 1125 (reduce) or 18000 (flatten)
};

struct DcaeModel {
  std::vector<nn::LayerSpec> layers;  // 19 rows, encoder then decoder
  std::vector<nn::ConvKernel> convs;
  std::vector<nn::BatchNormState> bns;
  std::vector<double> dense_w;
  int dense_in = 0;
  int dense_out = 0;

  // Adam moments per trainable tensor, in for_each_trainable order.
  std::vector<std::vector<double>> adam_m, adam_v;
  std::int64_t adam_t = 0;
  std::uint64_t rng_seed = 0;
};

// Trainable tensors in fixed layer order: each conv kernel, then gamma and
// beta of each batch-norm row, then the dense weights. The visitor signature
// is fn(tensor_index, std::vector<double>& values).
template <typename Model, typename Fn>
void for_each_trainable(Model& m, Fn&& fn) {
  std::size_t idx = 0, conv_i = 0, bn_i = 0;
  for (const auto& spec : m.layers) {
    switch (spec.kind) {
      case nn::LayerKind::Conv1d:
        fn(idx++, m.convs[conv_i++].w);
        break;
      case nn::LayerKind::BatchNorm:
        fn(idx++, m.bns[bn_i].gamma);
        fn(idx++, m.bns[bn_i].beta);
        ++bn_i;
        break;
      case nn::LayerKind::Dense:
        fn(idx++, m.dense_w);
        break;
      default:
        break;
    }
  }
}

inline std::size_t trainable_tensor_count(const DcaeModel& m) {
  std::size_t n = 0;
  for_each_trainable(m, [&](std::size_t, const std::vector<double>&) { ++n; });
  return n;
}

namespace detail {

inline nn::LayerSpec conv_row(const std::string& name, int in_ch, int out_ch) {
  nn::LayerSpec s;
  s.kind = nn::LayerKind::Conv1d;
  s.act = nn::Activation::Relu;
  s.kernel_size = 3;
  s.stride = 1;
  s.in_channels = in_ch;
  s.out_channels = out_ch;
  s.name = name;
  return s;
}

inline nn::LayerSpec bn_row(const std::string& name, int ch) {
  nn::LayerSpec s;
  s.kind = nn::LayerKind::BatchNorm;
  s.in_channels = ch;
  s.out_channels = ch;
  s.name = name;
  return s;
}

inline nn::LayerSpec pool_row(const std::string& name, int ch) {
  nn::LayerSpec s;
  s.kind = nn::LayerKind::MaxPool;
  s.in_channels = ch;
  s.out_channels = ch;
  s.factor = 2;
  s.name = name;
  return s;
}

inline nn::LayerSpec upsample_row(const std::string& name, int ch) {
  nn::LayerSpec s;
  s.kind = nn::LayerKind::Upsample;
  s.in_channels = ch;
  s.out_channels = ch;
  s.factor = 2;
  s.name = name;
  return s;
}

inline nn::LayerSpec dense_row(const std::string& name, int in_ch, int out_ch) {
  nn::LayerSpec s;
  s.kind = nn::LayerKind::Dense;
  s.act = nn::Activation::Sigmoid;
  s.in_channels = in_ch;
  s.out_channels = out_ch;
  s.name = name;
  return s;
}

}  // namespace detail

// Channel progression of the autoencoder. Widths may be scaled down (see
// build_dcae_scaled) for cheap gradient checks; the default is the full
// 1 -> 32 -> 16 -> 16 bottleneck and its mirror image.
struct Widths {
  int c1 = 32;
  int c2 = 16;
  int c3 = 16;
};

inline std::vector<nn::LayerSpec> architecture(const Widths& w = {}) {
  std::vector<nn::LayerSpec> rows;
  // encoder: 9 rows
  rows.push_back(detail::conv_row("conv1d_1", 1, w.c1));
  rows.push_back(detail::bn_row("bn_1", w.c1));
  rows.push_back(detail::pool_row("mp1d_1", w.c1));
  rows.push_back(detail::conv_row("conv1d_2", w.c1, w.c2));
  rows.push_back(detail::bn_row("bn_2", w.c2));
  rows.push_back(detail::pool_row("mp1d_2", w.c2));
  rows.push_back(detail::conv_row("conv1d_3", w.c2, w.c3));
  rows.push_back(detail::bn_row("bn_3", w.c3));
  rows.push_back(detail::pool_row("mp1d_3", w.c3));
  // decoder: 10 rows
  rows.push_back(detail::conv_row("conv1d_4", w.c3, w.c3));
  rows.push_back(detail::bn_row("bn_4", w.c3));
  rows.push_back(detail::upsample_row("upsampling_1", w.c3));
  rows.push_back(detail::conv_row("conv1d_5", w.c3, w.c2));
  rows.push_back(detail::bn_row("bn_5", w.c2));
  rows.push_back(detail::upsample_row("upsampling_2", w.c2));
  rows.push_back(detail::conv_row("conv1d_6", w.c2, w.c1));
  rows.push_back(detail::bn_row("bn_6", w.c1));
  rows.push_back(detail::upsample_row("upsampling_3", w.c1));
  rows.push_back(detail::dense_row("dense", w.c1, 1));
  return rows;
}

inline constexpr std::size_t kEncoderRows = 9;

// Glorot-uniform init for conv kernels and the dense map; gamma = 1,
// beta = 0, running stats at (0, 1). Deterministic for a given seed.
inline DcaeModel build_dcae_scaled(std::uint64_t seed, const Widths& widths) {
  DcaeModel m;
  m.rng_seed = seed;
  m.layers = architecture(widths);
  Rng rng(seed);
  for (const auto& spec : m.layers) {
    switch (spec.kind) {
      case nn::LayerKind::Conv1d: {
        nn::ConvKernel k(spec.kernel_size, spec.in_channels, spec.out_channels);
        const double fan_in = static_cast<double>(spec.kernel_size) * spec.in_channels;
        const double fan_out = static_cast<double>(spec.kernel_size) * spec.out_channels;
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& v : k.w) v = rng.uniform(-limit, limit);
        m.convs.push_back(std::move(k));
        break;
      }
      case nn::LayerKind::BatchNorm:
        m.bns.emplace_back(spec.out_channels);
        break;
      case nn::LayerKind::Dense: {
        m.dense_in = spec.in_channels;
        m.dense_out = spec.out_channels;
        m.dense_w.assign(static_cast<std::size_t>(m.dense_in) * m.dense_out, 0.0);
        const double limit = std::sqrt(6.0 / (m.dense_in + m.dense_out));
        for (double& v : m.dense_w) v = rng.uniform(-limit, limit);
        break;
      }
      default:
        break;
    }
  }
  const std::size_t n = trainable_tensor_count(m);
  m.adam_m.resize(n);
  m.adam_v.resize(n);
  for_each_trainable(m, [&](std::size_t i, std::vector<double>& t) {
    m.adam_m[i].assign(t.size(), 0.0);
    m.adam_v[i].assign(t.size(), 0.0);
  });
  return m;
}

inline DcaeModel build_dcae(std::uint64_t seed) { return build_dcae_scaled(seed, Widths{}); }

inline long total_parameter_count(const DcaeModel& m) {
  long total = 0;
  for (const auto& spec : m.layers) total += nn::count_parameters(spec);
  return total;
}

// (length, channels) after each row, starting with the input row.
inline std::vector<std::pair<int, int>> layer_output_shapes(const DcaeModel& m, int input_length) {
  std::vector<std::pair<int, int>> shapes;
  shapes.emplace_back(input_length, 1);
  int len = input_length;
  for (const auto& spec : m.layers) {
    len = nn::output_length(spec, len);
    shapes.emplace_back(len, spec.out_channels);
  }
  return shapes;
}

// -------------------------------------------------------------------------
// Forward / backward over the whole stack
// -------------------------------------------------------------------------

struct LayerIo {
  std::vector<nn::Tensor2> input;   // batch fed into this row
  std::vector<nn::Tensor2> output;  // post-activation batch (conv rows, for the ReLU gate)
  nn::BatchNormCache bn_cache;
  std::vector<std::vector<int>> argmax;
  int pool_input_length = 0;
};

struct ForwardCache {
  std::vector<LayerIo> rows;
  std::vector<nn::Tensor2> output;  // final post-sigmoid batch (uncropped)
  int input_length = 0;
};

namespace detail {

// Shared forward walk. In train mode running statistics are updated through
// `mutable_model`; in infer mode the model is untouched. The decoder can
// overshoot the input length when it is not divisible by 8 (ceil-mode
// pooling); outputs are cropped back and backward() pads with zeros.
inline std::vector<nn::Tensor2> forward_impl(const DcaeModel& m, DcaeModel* mutable_model,
                                             const std::vector<nn::Tensor2>& batch,
                                             nn::BnMode mode, ForwardCache* cache,
                                             std::size_t row_limit) {
  if (batch.empty()) throw nn::ShapeError(nn::ShapeError::Kind::EmptyBatch, "forward: empty batch");
  for (const auto& t : batch)
    if (t.channels != 1)
      throw nn::ShapeError(nn::ShapeError::Kind::ShapeMismatch, "forward: input must have 1 channel");
  if (cache) {
    cache->rows.assign(m.layers.size(), LayerIo{});
    cache->input_length = batch[0].length;
  }

  std::vector<nn::Tensor2> cur = batch;
  std::size_t conv_i = 0, bn_i = 0;
  for (std::size_t row = 0; row < m.layers.size() && row < row_limit; ++row) {
    const nn::LayerSpec& spec = m.layers[row];
    switch (spec.kind) {
      case nn::LayerKind::Conv1d: {
        if (cache) cache->rows[row].input = cur;
        const nn::ConvKernel& k = m.convs[conv_i++];
        for (auto& t : cur) t = nn::activation_forward(nn::conv1d_forward(t, k), spec.act);
        if (cache) cache->rows[row].output = cur;
        break;
      }
      case nn::LayerKind::BatchNorm: {
        nn::BatchNormCache local;
        nn::BatchNormCache* bc = cache ? &cache->rows[row].bn_cache : &local;
        cur = nn::batchnorm_forward(cur, m.bns[bn_i], kBnEps, mode, bc);
        if (mode == nn::BnMode::Train && mutable_model)
          nn::update_running_stats(mutable_model->bns[bn_i], *bc, kBnMomentum);
        ++bn_i;
        break;
      }
      case nn::LayerKind::MaxPool: {
        if (cache) cache->rows[row].pool_input_length = cur.empty() ? 0 : cur[0].length;
        std::vector<nn::Tensor2> next;
        next.reserve(cur.size());
        for (auto& t : cur) {
          nn::PoolResult r = nn::maxpool1d_forward(t);
          if (cache) cache->rows[row].argmax.push_back(std::move(r.argmax));
          next.push_back(std::move(r.out));
        }
        cur = std::move(next);
        break;
      }
      case nn::LayerKind::Upsample:
        for (auto& t : cur) t = nn::upsample1d_forward(t, spec.factor);
        break;
      case nn::LayerKind::Dense: {
        if (cache) cache->rows[row].input = cur;
        for (auto& t : cur)
          t = nn::activation_forward(nn::dense_forward(t, m.dense_w, m.dense_in, m.dense_out),
                                     spec.act);
        break;
      }
      default:
        throw Error("forward: unsupported layer kind");
    }
  }
  if (cache) cache->output = cur;
  if (row_limit >= m.layers.size()) {
    // crop decoder overshoot back to the input length
    for (auto& t : cur)
      if (t.length > batch[0].length) {
        t.data.resize(static_cast<std::size_t>(batch[0].length) * t.channels);
        t.length = batch[0].length;
      }
  }
  return cur;
}

}  // namespace detail

// Inference-mode forward: pure function of (model, batch).
inline std::vector<nn::Tensor2> forward(const DcaeModel& m, const std::vector<nn::Tensor2>& batch) {
  return detail::forward_impl(m, nullptr, batch, nn::BnMode::Infer, nullptr,
                              m.layers.size());
}

// Train-mode forward: batch statistics, running-stat updates, full cache.
inline std::vector<nn::Tensor2> forward_train(DcaeModel& m, const std::vector<nn::Tensor2>& batch,
                                              ForwardCache& cache) {
  return detail::forward_impl(m, &m, batch, nn::BnMode::Train, &cache, m.layers.size());
}

// Gradients per trainable tensor, aligned with for_each_trainable order.
using GradientSet = std::vector<std::vector<double>>;

// Backpropagates `upstream` (gradient of the loss in the CROPPED output)
// through the whole stack; returns parameter gradients.
inline GradientSet backward(const DcaeModel& m, const ForwardCache& cache,
                            const std::vector<nn::Tensor2>& upstream) {
  GradientSet grads(trainable_tensor_count(m));
  for_each_trainable(m, [&](std::size_t i, const std::vector<double>& t) {
    grads[i].assign(t.size(), 0.0);
  });

  // pad upstream with zeros if the decoder overshot the input length
  std::vector<nn::Tensor2> cur;
  cur.reserve(upstream.size());
  for (std::size_t b = 0; b < upstream.size(); ++b) {
    const nn::Tensor2& full = cache.output[b];
    nn::Tensor2 u(full.length, full.channels);
    if (upstream[b].length > full.length || upstream[b].channels != full.channels)
      throw nn::ShapeError(nn::ShapeError::Kind::ShapeMismatch, "backward: upstream shape mismatch");
    std::copy(upstream[b].data.begin(), upstream[b].data.end(), u.data.begin());
    cur.push_back(std::move(u));
  }

  // map rows to tensor indices (mirrors for_each_trainable)
  std::vector<std::size_t> first_tensor_of_row(m.layers.size(), 0);
  std::vector<std::size_t> conv_of_row(m.layers.size(), 0), bn_of_row(m.layers.size(), 0);
  {
    std::size_t idx = 0, conv_i = 0, bn_i = 0;
    for (std::size_t row = 0; row < m.layers.size(); ++row) {
      first_tensor_of_row[row] = idx;
      switch (m.layers[row].kind) {
        case nn::LayerKind::Conv1d:
          conv_of_row[row] = conv_i++;
          idx += 1;
          break;
        case nn::LayerKind::BatchNorm:
          bn_of_row[row] = bn_i++;
          idx += 2;
          break;
        case nn::LayerKind::Dense:
          idx += 1;
          break;
        default:
          break;
      }
    }
  }

  for (std::size_t row_plus = m.layers.size(); row_plus > 0; --row_plus) {
    const std::size_t row = row_plus - 1;
    const nn::LayerSpec& spec = m.layers[row];
    const LayerIo& io = cache.rows[row];
    switch (spec.kind) {
      case nn::LayerKind::Conv1d: {
        const nn::ConvKernel& k = m.convs[conv_of_row[row]];
        std::vector<double>& gw = grads[first_tensor_of_row[row]];
        for (std::size_t b = 0; b < cur.size(); ++b) {
          const nn::Tensor2& x = io.input[b];
          nn::Tensor2 gated = nn::activation_backward(io.output[b], cur[b], spec.act);
          nn::ConvGrads cg = nn::conv1d_backward(x, k, gated);
          for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += cg.grad_w[i];
          cur[b] = std::move(cg.grad_x);
        }
        break;
      }
      case nn::LayerKind::BatchNorm: {
        const nn::BatchNormState& bn = m.bns[bn_of_row[row]];
        nn::BatchNormGrads bg = nn::batchnorm_backward(io.bn_cache, bn, cur);
        std::vector<double>& ggamma = grads[first_tensor_of_row[row]];
        std::vector<double>& gbeta = grads[first_tensor_of_row[row] + 1];
        for (std::size_t i = 0; i < ggamma.size(); ++i) {
          ggamma[i] += bg.grad_gamma[i];
          gbeta[i] += bg.grad_beta[i];
        }
        cur = std::move(bg.grad_x);
        break;
      }
      case nn::LayerKind::MaxPool: {
        for (std::size_t b = 0; b < cur.size(); ++b)
          cur[b] = nn::maxpool1d_backward(io.argmax[b], cur[b], io.pool_input_length);
        break;
      }
      case nn::LayerKind::Upsample:
        for (auto& t : cur) t = nn::upsample1d_backward(t, spec.factor);
        break;
      case nn::LayerKind::Dense: {
        std::vector<double>& gw = grads[first_tensor_of_row[row]];
        for (std::size_t b = 0; b < cur.size(); ++b) {
          const nn::Tensor2& x = io.input[b];
          const nn::Tensor2& y = cache.output[b];
          nn::Tensor2 gated = nn::activation_backward(y, cur[b], spec.act);
          nn::DenseGrads dg = nn::dense_backward(x, m.dense_w, m.dense_in, m.dense_out, gated);
          for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += dg.grad_w[i];
          cur[b] = std::move(dg.grad_x);
        }
        break;
      }
      default:
        break;
    }
  }
  return grads;
}

// -------------------------------------------------------------------------
// Loss and optimizer
// -------------------------------------------------------------------------

// Mean squared error: (1/T) * sum((u - u_hat)^2).
inline double mse(const std::vector<double>& u, const std::vector<double>& u_hat) {
  if (u.size() != u_hat.size())
    throw DcaeError(DcaeError::Kind::LengthMismatch, "mse: length mismatch");
  if (u.empty()) throw DcaeError(DcaeError::Kind::LengthMismatch, "mse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - u_hat[i];
    acc += d * d;
  }
  return acc / static_cast<double>(u.size());
}

// One bias-corrected Adam update. `step` is the 1-based step counter shared
// by all tensors of the model.
inline void adam_step(std::vector<double>& params, const std::vector<double>& grads,
                      std::vector<double>& m, std::vector<double>& v, std::int64_t step,
                      const OptimizerConfig& cfg) {
  if (params.size() != grads.size() || params.size() != m.size() || params.size() != v.size())
    throw nn::ShapeError(nn::ShapeError::Kind::ShapeMismatch, "adam_step: size mismatch");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grads[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

inline std::vector<nn::Tensor2> signals_to_tensors(const std::vector<preprocess::Signal>& signals) {
  std::vector<nn::Tensor2> out;
  out.reserve(signals.size());
  for (const auto& s : signals) {
    nn::Tensor2 t(static_cast<int>(s.values.size()), 1);
    for (std::size_t i = 0; i < s.values.size(); ++i) t.data[i] = s.values[i];
    out.push_back(std::move(t));
  }
  return out;
}

// Runs one optimisation step on a batch; returns the summed per-record MSE.
inline double train_batch(DcaeModel& m, const std::vector<nn::Tensor2>& batch,
                          const OptimizerConfig& cfg) {
  ForwardCache cache;
  std::vector<nn::Tensor2> recon = forward_train(m, batch, cache);
  double loss_sum = 0.0;
  std::vector<nn::Tensor2> upstream;
  upstream.reserve(batch.size());
  const double batch_n = static_cast<double>(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const nn::Tensor2& u = batch[b];
    const nn::Tensor2& y = recon[b];
    double acc = 0.0;
    nn::Tensor2 up(y.length, y.channels);
    const double scale = 2.0 / (static_cast<double>(u.size()) * batch_n);
    for (std::size_t i = 0; i < u.data.size(); ++i) {
      const double d = y.data[i] - u.data[i];
      acc += d * d;
      up.data[i] = scale * d;
    }
    loss_sum += acc / static_cast<double>(u.size());
    upstream.push_back(std::move(up));
  }
  GradientSet grads = backward(m, cache, upstream);
  ++m.adam_t;
  for_each_trainable(m, [&](std::size_t i, std::vector<double>& t) {
    adam_step(t, grads[i], m.adam_m[i], m.adam_v[i], m.adam_t, cfg);
  });
  return loss_sum;
}

// Mini-batch Adam training on reconstruction MSE. Deterministic for a given
// seed: fixed shuffle, fixed batch order, fixed summation order. Returns the
// per-epoch mean loss log.
inline std::vector<double> train_dcae(DcaeModel& m, const std::vector<preprocess::Signal>& train,
                                      const OptimizerConfig& cfg, std::uint64_t shuffle_seed) {
  if (train.empty())
    throw DcaeError(DcaeError::Kind::EmptyTrainingSet, "train_dcae: empty training set");
  if (cfg.learning_rate <= 0) throw Error("train_dcae: learning rate must be positive");
  if (cfg.beta1 < 0 || cfg.beta1 >= 1 || cfg.beta2 < 0 || cfg.beta2 >= 1)
    throw Error("train_dcae: beta parameters must lie in [0, 1)");
  const std::vector<nn::Tensor2> tensors = signals_to_tensors(train);
  const int batch_size = std::max(1, cfg.batch_size);
  Rng rng(shuffle_seed);
  std::vector<std::size_t> order(tensors.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> loss_log;
  loss_log.reserve(static_cast<std::size_t>(std::max(0, cfg.epochs)));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    deterministic_shuffle(order, rng);
    double epoch_loss = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      std::vector<nn::Tensor2> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) batch.push_back(tensors[order[i]]);
      const double batch_loss = train_batch(m, batch, cfg);
      if (!std::isfinite(batch_loss))
        throw DcaeError(DcaeError::Kind::NonFiniteLoss,
                        "train_dcae: non-finite loss at epoch " + std::to_string(epoch + 1) +
                            ", batch " + std::to_string(batch_index + 1));
      epoch_loss += batch_loss;
    }
    loss_log.push_back(epoch_loss / static_cast<double>(tensors.size()));
  }
  return loss_log;
}

// -------------------------------------------------------------------------
// Feature extraction
// -------------------------------------------------------------------------

// Runs the encoder rows in inference mode. Reduce mode averages the channels
// per bottleneck position (1125 values for a 9000-sample input); flatten
// emits every (position, channel) cell in position-major order.
inline FeatureVector encode_features(const DcaeModel& m, const preprocess::Signal& signal,
                                     FeatureMode mode, const std::string& record_id = "") {
  std::vector<nn::Tensor2> batch = signals_to_tensors({signal});
  std::vector<nn::Tensor2> enc =
      detail::forward_impl(m, nullptr, batch, nn::BnMode::Infer, nullptr, kEncoderRows);
  const nn::Tensor2& z = enc[0];
  FeatureVector fv;
  fv.record_id = record_id;
  if (mode == FeatureMode::Reduce) {
    fv.values.resize(static_cast<std::size_t>(z.length));
    for (int t = 0; t < z.length; ++t) {
      const double* row = z.row(t);
      double acc = 0.0;
      for (int c = 0; c < z.channels; ++c) acc += row[c];
      fv.values[static_cast<std::size_t>(t)] = acc / z.channels;
    }
  } else {
    fv.values = z.data;
  }
  return fv;
}

// -------------------------------------------------------------------------
// Serialization: magic "DCAE", version, layer table, f32 tensor payloads,
// CRC32 trailer. Parameters and Adam moments are quantized to f32 on save;
// a file that has been loaded and saved again is bit-identical.
// -------------------------------------------------------------------------

inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

inline void write_f32_array(ByteWriter& w, const std::vector<double>& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (double x : v) w.f32(static_cast<float>(x));
}

inline std::vector<double> read_f32_array(ByteReader& r) {
  const std::uint32_t n = r.u32();
  std::vector<double> v(n);
  for (std::uint32_t i = 0; i < n; ++i) v[i] = static_cast<double>(r.f32());
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> model_to_bytes(const DcaeModel& m) {
  ByteWriter w;
  w.text("DCAE");
  w.u32(kModelVersion);
  w.u64(m.rng_seed);
  w.u64(static_cast<std::uint64_t>(m.adam_t));
  w.u32(static_cast<std::uint32_t>(m.layers.size()));
  for (const auto& spec : m.layers) {
    w.u8(static_cast<std::uint8_t>(spec.kind));
    w.u8(static_cast<std::uint8_t>(spec.act));
    w.u32(static_cast<std::uint32_t>(spec.kernel_size));
    w.u32(static_cast<std::uint32_t>(spec.stride));
    w.u32(static_cast<std::uint32_t>(spec.in_channels));
    w.u32(static_cast<std::uint32_t>(spec.out_channels));
    w.u32(static_cast<std::uint32_t>(spec.factor));
    w.u16(static_cast<std::uint16_t>(spec.name.size()));
    w.text(spec.name);
  }
  w.u32(static_cast<std::uint32_t>(m.convs.size()));
  for (const auto& k : m.convs) detail::write_f32_array(w, k.w);
  w.u32(static_cast<std::uint32_t>(m.bns.size()));
  for (const auto& bn : m.bns) {
    detail::write_f32_array(w, bn.gamma);
    detail::write_f32_array(w, bn.beta);
    detail::write_f32_array(w, bn.running_mean);
    detail::write_f32_array(w, bn.running_var);
  }
  detail::write_f32_array(w, m.dense_w);
  w.u32(static_cast<std::uint32_t>(m.adam_m.size()));
  for (std::size_t i = 0; i < m.adam_m.size(); ++i) {
    detail::write_f32_array(w, m.adam_m[i]);
    detail::write_f32_array(w, m.adam_v[i]);
  }
  const std::uint32_t crc = crc32(w.data());
  w.u32(crc);
  return w.take();
}

inline DcaeModel model_from_bytes(const std::vector<std::uint8_t>& bytes) {
  try {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "DCAE", 4) != 0)
      throw DcaeError(DcaeError::Kind::CorruptFile, "model file: bad magic");
    ByteReader crc_check(bytes.data() + bytes.size() - 4, 4);
    const std::uint32_t stored_crc = crc_check.u32();
    if (crc32(bytes.data(), bytes.size() - 4) != stored_crc)
      throw DcaeError(DcaeError::Kind::CorruptFile, "model file: checksum mismatch");

    ByteReader r(bytes.data(), bytes.size() - 4);
    r.skip(4);
    const std::uint32_t version = r.u32();
    if (version != kModelVersion)
      throw DcaeError(DcaeError::Kind::VersionMismatch,
                      "model file: unsupported version " + std::to_string(version));
    DcaeModel m;
    m.rng_seed = r.u64();
    m.adam_t = static_cast<std::int64_t>(r.u64());
    const std::uint32_t n_layers = r.u32();
    m.layers.resize(n_layers);
    for (auto& spec : m.layers) {
      spec.kind = static_cast<nn::LayerKind>(r.u8());
      spec.act = static_cast<nn::Activation>(r.u8());
      spec.kernel_size = static_cast<int>(r.u32());
      spec.stride = static_cast<int>(r.u32());
      spec.in_channels = static_cast<int>(r.u32());
      spec.out_channels = static_cast<int>(r.u32());
      spec.factor = static_cast<int>(r.u32());
      spec.name = r.text(r.u16());
    }
    const std::uint32_t n_convs = r.u32();
    m.convs.resize(n_convs);
    {
      std::size_t conv_i = 0;
      for (const auto& spec : m.layers) {
        if (spec.kind != nn::LayerKind::Conv1d) continue;
        if (conv_i >= n_convs)
          throw DcaeError(DcaeError::Kind::CorruptFile, "model file: conv table mismatch");
        nn::ConvKernel k(spec.kernel_size, spec.in_channels, spec.out_channels);
        k.w = detail::read_f32_array(r);
        if (k.w.size() != static_cast<std::size_t>(spec.kernel_size) * spec.in_channels *
                              spec.out_channels)
          throw DcaeError(DcaeError::Kind::CorruptFile, "model file: conv tensor size mismatch");
        m.convs[conv_i++] = std::move(k);
      }
      if (conv_i != n_convs)
        throw DcaeError(DcaeError::Kind::CorruptFile, "model file: conv table mismatch");
    }
    const std::uint32_t n_bns = r.u32();
    m.bns.resize(n_bns);
    for (auto& bn : m.bns) {
      bn.gamma = detail::read_f32_array(r);
      bn.beta = detail::read_f32_array(r);
      bn.running_mean = detail::read_f32_array(r);
      bn.running_var = detail::read_f32_array(r);
      bn.channels = static_cast<int>(bn.gamma.size());
      if (bn.beta.size() != bn.gamma.size() || bn.running_mean.size() != bn.gamma.size() ||
          bn.running_var.size() != bn.gamma.size())
        throw DcaeError(DcaeError::Kind::CorruptFile, "model file: batch-norm tensor mismatch");
    }
    m.dense_w = detail::read_f32_array(r);
    for (const auto& spec : m.layers)
      if (spec.kind == nn::LayerKind::Dense) {
        m.dense_in = spec.in_channels;
        m.dense_out = spec.out_channels;
      }
    const std::uint32_t n_trainable = r.u32();
    m.adam_m.resize(n_trainable);
    m.adam_v.resize(n_trainable);
    for (std::uint32_t i = 0; i < n_trainable; ++i) {
      m.adam_m[i] = detail::read_f32_array(r);
      m.adam_v[i] = detail::read_f32_array(r);
    }
    if (n_trainable != trainable_tensor_count(m))
      throw DcaeError(DcaeError::Kind::CorruptFile, "model file: optimizer state mismatch");
    if (r.remaining() != 0)
      throw DcaeError(DcaeError::Kind::CorruptFile, "model file: trailing bytes");
    return m;
  } catch (const TruncatedData&) {
    throw DcaeError(DcaeError::Kind::CorruptFile, "model file: truncated");
  }
}

inline void save_model(const DcaeModel& m, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = model_to_bytes(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("save_model: cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("save_model: write failed for " + path.string());
}

inline DcaeModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_model: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return model_from_bytes(bytes);
}

}  // namespace deepboost::dcae
