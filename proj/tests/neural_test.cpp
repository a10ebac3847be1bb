#include "deepboost/neural.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "deepboost/common.hpp"
#include "testutil.hpp"

using deepboost::Rng;
namespace nn = deepboost::nn;

namespace {

nn::Tensor2 make_tensor(std::initializer_list<double> values, int channels = 1) {
  nn::Tensor2 t(static_cast<int>(values.size()) / channels, channels);
  std::copy(values.begin(), values.end(), t.data.begin());
  return t;
}

void fill_random(std::vector<double>& v, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (double& x : v) x = rng.uniform(lo, hi);
}

double sum_squares(const nn::Tensor2& t) {
  double acc = 0.0;
  for (double v : t.data) acc += v * v;
  return acc;
}

nn::Tensor2 doubled(const nn::Tensor2& t) {
  nn::Tensor2 u = t;
  for (double& v : u.data) v *= 2.0;
  return u;
}

}  // namespace

// ---------------------------------------------------------------------------
// conv1d
// ---------------------------------------------------------------------------

TEST(Conv1d, EdgeDetectorKernel) {
  const nn::Tensor2 x = make_tensor({1, 2, 3, 4});
  nn::ConvKernel k(3, 1, 1);
  k.at(0, 0, 0) = 1;
  k.at(1, 0, 0) = 0;
  k.at(2, 0, 0) = -1;
  const nn::Tensor2 out = nn::conv1d_forward(x, k);
  const std::vector<double> expected{-2, -2, -2, 3};
  EXPECT_EQ(out.data, expected);
}

TEST(Conv1d, IdentityKernel) {
  Rng rng(21);
  nn::Tensor2 x(16, 1);
  fill_random(x.data, rng);
  nn::ConvKernel k(3, 1, 1);
  k.at(1, 0, 0) = 1.0;
  EXPECT_EQ(nn::conv1d_forward(x, k).data, x.data);
}

TEST(Conv1d, TwoChannelSummation) {
  nn::Tensor2 x(2, 2);
  x.at(0, 0) = x.at(0, 1) = x.at(1, 0) = x.at(1, 1) = 1.0;
  nn::ConvKernel k(3, 2, 1);
  for (double& w : k.w) w = 1.0;
  const nn::Tensor2 out = nn::conv1d_forward(x, k);
  const std::vector<double> expected{4, 4};
  EXPECT_EQ(out.data, expected);
}

TEST(Conv1d, ChannelMismatchThrows) {
  nn::Tensor2 x(4, 2);
  nn::ConvKernel k(3, 1, 1);
  EXPECT_THROW(nn::conv1d_forward(x, k), nn::ShapeError);
}

// direct triple-loop oracle
TEST(Conv1d, MatchesDirectCrossCorrelation) {
  Rng rng(22);
  nn::Tensor2 x(9, 3);
  fill_random(x.data, rng);
  nn::ConvKernel k(5, 3, 2);
  fill_random(k.w, rng);
  const nn::Tensor2 out = nn::conv1d_forward(x, k);
  for (int t = 0; t < x.length; ++t)
    for (int o = 0; o < 2; ++o) {
      double acc = 0.0;
      for (int j = 0; j < 5; ++j)
        for (int c = 0; c < 3; ++c) {
          const int s = t + j - 2;
          if (s >= 0 && s < x.length) acc += x.at(s, c) * k.at(j, c, o);
        }
      EXPECT_NEAR(out.at(t, o), acc, 1e-12);
    }
}

TEST(Conv1d, LinearInInput) {
  Rng rng(23);
  nn::Tensor2 x(12, 2), y(12, 2);
  fill_random(x.data, rng);
  fill_random(y.data, rng);
  nn::ConvKernel k(3, 2, 3);
  fill_random(k.w, rng);
  const double a = 1.7, b = -0.6;
  nn::Tensor2 combo(12, 2);
  for (std::size_t i = 0; i < combo.data.size(); ++i) combo.data[i] = a * x.data[i] + b * y.data[i];
  const nn::Tensor2 fx = nn::conv1d_forward(x, k);
  const nn::Tensor2 fy = nn::conv1d_forward(y, k);
  const nn::Tensor2 fc = nn::conv1d_forward(combo, k);
  for (std::size_t i = 0; i < fc.data.size(); ++i)
    EXPECT_NEAR(fc.data[i], a * fx.data[i] + b * fy.data[i], 1e-9);
}

TEST(Conv1dBackward, HandWorkedKernelGradient) {
  const nn::Tensor2 x = make_tensor({1, 2, 3});
  nn::ConvKernel k(3, 1, 1);
  k.at(0, 0, 0) = 1;
  k.at(2, 0, 0) = -1;
  const nn::Tensor2 upstream = make_tensor({1, 1, 1});
  const auto g = nn::conv1d_backward(x, k, upstream);
  const std::vector<double> expected{3, 6, 5};
  EXPECT_EQ(g.grad_w, expected);
}

TEST(Conv1dBackward, ZeroUpstreamGivesZeroGrads) {
  Rng rng(24);
  nn::Tensor2 x(6, 2);
  fill_random(x.data, rng);
  nn::ConvKernel k(3, 2, 2);
  fill_random(k.w, rng);
  const auto g = nn::conv1d_backward(x, k, nn::Tensor2(6, 2));
  for (double v : g.grad_w) EXPECT_EQ(v, 0.0);
  for (double v : g.grad_x.data) EXPECT_EQ(v, 0.0);
}

TEST(Conv1dBackward, MatchesFiniteDifferences) {
  Rng rng(25);
  nn::Tensor2 x(8, 2);
  fill_random(x.data, rng);
  nn::ConvKernel k(3, 2, 2);
  fill_random(k.w, rng);

  // loss = sum(out^2), so upstream = 2 * out
  const auto loss = [&] { return sum_squares(nn::conv1d_forward(x, k)); };
  const auto analytic = nn::conv1d_backward(x, k, doubled(nn::conv1d_forward(x, k)));
  for (std::size_t i = 0; i < k.w.size(); ++i) {
    const double fd = testutil::central_difference(loss, k.w[i], 1e-5);
    EXPECT_LT(testutil::relative_error(analytic.grad_w[i], fd), 1e-6) << "kernel slot " << i;
  }
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double fd = testutil::central_difference(loss, x.data[i], 1e-5);
    EXPECT_LT(testutil::relative_error(analytic.grad_x.data[i], fd), 1e-6) << "input slot " << i;
  }
}

// ---------------------------------------------------------------------------
// batch normalization
// ---------------------------------------------------------------------------

TEST(BatchNorm, HandComputedTwoValueBatch) {
  std::vector<nn::Tensor2> batch{make_tensor({1}), make_tensor({3})};
  nn::BatchNormState bn(1);
  const auto out = nn::batchnorm_forward(batch, bn, 1e-8, nn::BnMode::Train);
  EXPECT_NEAR(out[0].at(0, 0), -1.0, 1e-4);
  EXPECT_NEAR(out[1].at(0, 0), 1.0, 1e-4);
}

TEST(BatchNorm, ZeroGammaOutputsBeta) {
  Rng rng(26);
  std::vector<nn::Tensor2> batch{nn::Tensor2(5, 2), nn::Tensor2(5, 2)};
  for (auto& t : batch) fill_random(t.data, rng);
  nn::BatchNormState bn(2);
  bn.gamma = {0.0, 0.0};
  bn.beta = {0.7, -0.2};
  const auto out = nn::batchnorm_forward(batch, bn, 1e-3, nn::BnMode::Train);
  for (const auto& t : out)
    for (int i = 0; i < t.length; ++i) {
      EXPECT_DOUBLE_EQ(t.at(i, 0), 0.7);
      EXPECT_DOUBLE_EQ(t.at(i, 1), -0.2);
    }
}

TEST(BatchNorm, ConstantInputDegeneratesToBeta) {
  std::vector<nn::Tensor2> batch{make_tensor({4, 4, 4})};
  nn::BatchNormState bn(1);
  bn.beta = {0.3};
  const auto out = nn::batchnorm_forward(batch, bn, 1e-3, nn::BnMode::Train);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(out[0].at(i, 0), 0.3, 1e-12);
}

TEST(BatchNorm, EmptyBatchThrows) {
  nn::BatchNormState bn(1);
  EXPECT_THROW(nn::batchnorm_forward({}, bn, 1e-3, nn::BnMode::Train), nn::ShapeError);
}

TEST(BatchNorm, InferModeUsesRunningStats) {
  nn::BatchNormState bn(1);
  bn.running_mean = {2.0};
  bn.running_var = {4.0};
  std::vector<nn::Tensor2> batch{make_tensor({4.0})};
  const auto out = nn::batchnorm_forward(batch, bn, 1e-12, nn::BnMode::Infer);
  EXPECT_NEAR(out[0].at(0, 0), 1.0, 1e-6);
}

TEST(BatchNorm, RunningStatsFollowMomentum) {
  std::vector<nn::Tensor2> batch{make_tensor({1}), make_tensor({3})};
  nn::BatchNormState bn(1);
  nn::BatchNormCache cache;
  nn::batchnorm_forward_train(batch, bn, 1e-8, 0.9, cache);
  EXPECT_NEAR(bn.running_mean[0], 0.9 * 0.0 + 0.1 * 2.0, 1e-12);
  EXPECT_NEAR(bn.running_var[0], 0.9 * 1.0 + 0.1 * 1.0, 1e-12);
}

TEST(BatchNormBackward, ZeroUpstreamGivesZeroGrads) {
  Rng rng(27);
  std::vector<nn::Tensor2> batch{nn::Tensor2(4, 2), nn::Tensor2(4, 2)};
  for (auto& t : batch) fill_random(t.data, rng);
  nn::BatchNormState bn(2);
  nn::BatchNormCache cache;
  nn::batchnorm_forward(batch, bn, 1e-3, nn::BnMode::Train, &cache);
  const auto g = nn::batchnorm_backward(cache, bn, {nn::Tensor2(4, 2), nn::Tensor2(4, 2)});
  for (double v : g.grad_gamma) EXPECT_EQ(v, 0.0);
  for (double v : g.grad_beta) EXPECT_EQ(v, 0.0);
  for (const auto& t : g.grad_x)
    for (double v : t.data) EXPECT_EQ(v, 0.0);
}

TEST(BatchNormBackward, ConstantUpstreamBetaGradIsSum) {
  Rng rng(28);
  std::vector<nn::Tensor2> batch{nn::Tensor2(6, 1), nn::Tensor2(6, 1)};
  for (auto& t : batch) fill_random(t.data, rng);
  nn::BatchNormState bn(1);
  bn.beta = {0.4};
  nn::BatchNormCache cache;
  nn::batchnorm_forward(batch, bn, 1e-3, nn::BnMode::Train, &cache);
  const double c = 0.37;
  std::vector<nn::Tensor2> upstream{nn::Tensor2(6, 1), nn::Tensor2(6, 1)};
  for (auto& t : upstream)
    for (double& v : t.data) v = c;
  const auto g = nn::batchnorm_backward(cache, bn, upstream);
  EXPECT_NEAR(g.grad_beta[0], 12.0 * c, 1e-12);
}

TEST(BatchNormBackward, MatchesFiniteDifferences) {
  Rng rng(29);
  std::vector<nn::Tensor2> batch{nn::Tensor2(5, 2), nn::Tensor2(5, 2)};
  for (auto& t : batch) fill_random(t.data, rng);
  nn::BatchNormState bn(2);
  bn.gamma = {1.3, 0.8};
  bn.beta = {0.2, -0.1};

  const auto loss = [&] {
    const auto out = nn::batchnorm_forward(batch, bn, 1e-3, nn::BnMode::Train);
    double acc = 0.0;
    for (const auto& t : out) acc += sum_squares(t);
    return acc;
  };
  nn::BatchNormCache cache;
  const auto out = nn::batchnorm_forward(batch, bn, 1e-3, nn::BnMode::Train, &cache);
  std::vector<nn::Tensor2> upstream;
  for (const auto& t : out) upstream.push_back(doubled(t));
  const auto g = nn::batchnorm_backward(cache, bn, upstream);

  for (int c = 0; c < 2; ++c) {
    EXPECT_LT(testutil::relative_error(
                  g.grad_gamma[static_cast<std::size_t>(c)],
                  testutil::central_difference(loss, bn.gamma[static_cast<std::size_t>(c)], 1e-5)),
              1e-5);
    EXPECT_LT(testutil::relative_error(
                  g.grad_beta[static_cast<std::size_t>(c)],
                  testutil::central_difference(loss, bn.beta[static_cast<std::size_t>(c)], 1e-5)),
              1e-5);
  }
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (std::size_t i = 0; i < batch[b].data.size(); ++i) {
      const double fd = testutil::central_difference(loss, batch[b].data[i], 1e-5);
      EXPECT_LT(testutil::relative_error(g.grad_x[b].data[i], fd), 1e-5)
          << "batch " << b << " slot " << i;
    }
}

// ---------------------------------------------------------------------------
// max pooling
// ---------------------------------------------------------------------------

TEST(MaxPool, ValuesAndArgmax) {
  const auto r = nn::maxpool1d_forward(make_tensor({1, 3, 2, 5}));
  const std::vector<double> values{3, 5};
  const std::vector<int> argmax{1, 3};
  EXPECT_EQ(r.out.data, values);
  EXPECT_EQ(r.argmax, argmax);
}

TEST(MaxPool, SingletonCeilMode) {
  const auto r = nn::maxpool1d_forward(make_tensor({7}));
  EXPECT_EQ(r.out.length, 1);
  EXPECT_EQ(r.out.data[0], 7.0);
  EXPECT_EQ(r.argmax[0], 0);
}

TEST(MaxPool, TiesPickLowerIndex) {
  const auto r = nn::maxpool1d_forward(make_tensor({2, 2, -1, -1}));
  const std::vector<int> argmax{0, 2};
  EXPECT_EQ(r.argmax, argmax);
}

TEST(MaxPool, EncoderCascadeLengths) {
  int len = 9000;
  const int expected[] = {4500, 2250, 1125};
  for (int stage = 0; stage < 3; ++stage) {
    nn::Tensor2 x(len, 1);
    const auto r = nn::maxpool1d_forward(x);
    len = r.out.length;
    EXPECT_EQ(len, expected[stage]);
  }
}

TEST(MaxPoolBackward, RoutesToArgmax) {
  const std::vector<int> argmax{1, 3};
  const nn::Tensor2 upstream = make_tensor({10, 20});
  const nn::Tensor2 gx = nn::maxpool1d_backward(argmax, upstream, 4);
  const std::vector<double> expected{0, 10, 0, 20};
  EXPECT_EQ(gx.data, expected);
}

TEST(MaxPoolBackward, OutOfRangeIndexThrows) {
  EXPECT_THROW(nn::maxpool1d_backward({5}, make_tensor({1.0}), 4), nn::ShapeError);
}

TEST(MaxPoolBackward, MatchesFiniteDifferencesAwayFromTies) {
  Rng rng(31);
  nn::Tensor2 x(7, 2);  // odd length exercises the ceil-mode pad
  fill_random(x.data, rng);
  const auto loss = [&] { return sum_squares(nn::maxpool1d_forward(x).out); };
  const auto fwd = nn::maxpool1d_forward(x);
  const nn::Tensor2 gx = nn::maxpool1d_backward(fwd.argmax, doubled(fwd.out), x.length);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double fd = testutil::central_difference(loss, x.data[i], 1e-6);
    EXPECT_LT(testutil::relative_error(gx.data[i], fd), 1e-6) << "slot " << i;
  }
}

// ---------------------------------------------------------------------------
// upsampling
// ---------------------------------------------------------------------------

TEST(Upsample, RepeatsTimesteps) {
  const auto out = nn::upsample1d_forward(make_tensor({1, 2}));
  const std::vector<double> expected{1, 1, 2, 2};
  EXPECT_EQ(out.data, expected);
}

TEST(Upsample, FactorOneIsIdentity) {
  Rng rng(32);
  nn::Tensor2 x(5, 3);
  fill_random(x.data, rng);
  EXPECT_EQ(nn::upsample1d_forward(x, 1).data, x.data);
}

TEST(Upsample, DecoderCascadeLengths) {
  int len = 1125;
  const int expected[] = {2250, 4500, 9000};
  for (int stage = 0; stage < 3; ++stage) {
    nn::Tensor2 x(len, 1);
    len = nn::upsample1d_forward(x).length;
    EXPECT_EQ(len, expected[stage]);
  }
}

TEST(UpsampleBackward, SumsCopiedCells) {
  const nn::Tensor2 gx = nn::upsample1d_backward(make_tensor({1, 2, 3, 4}));
  const std::vector<double> expected{3, 7};
  EXPECT_EQ(gx.data, expected);
}

TEST(UpsampleBackward, MatchesFiniteDifferences) {
  Rng rng(33);
  nn::Tensor2 x(4, 2);
  fill_random(x.data, rng);
  const auto loss = [&] { return sum_squares(nn::upsample1d_forward(x)); };
  const nn::Tensor2 gx = nn::upsample1d_backward(doubled(nn::upsample1d_forward(x)));
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double fd = testutil::central_difference(loss, x.data[i], 1e-5);
    EXPECT_LT(testutil::relative_error(gx.data[i], fd), 1e-6);
  }
}

// ---------------------------------------------------------------------------
// dense
// ---------------------------------------------------------------------------

TEST(Dense, ZeroWeightsGiveZeroOutput) {
  nn::Tensor2 x(3, 2);
  x.data = {1, 2, 3, 4, 5, 6};
  const auto out = nn::dense_forward(x, std::vector<double>(2, 0.0), 2, 1);
  for (double v : out.data) EXPECT_EQ(v, 0.0);
}

TEST(Dense, DotProductPerTimestep) {
  nn::Tensor2 x(1, 2);
  x.data = {1, 2};
  const auto out = nn::dense_forward(x, {3, 4}, 2, 1);
  EXPECT_EQ(out.data[0], 11.0);
}

TEST(DenseBackward, MatchesFiniteDifferences) {
  Rng rng(34);
  nn::Tensor2 x(4, 3);
  fill_random(x.data, rng);
  std::vector<double> w(3 * 2);
  fill_random(w, rng);
  const auto loss = [&] { return sum_squares(nn::dense_forward(x, w, 3, 2)); };
  const auto g = nn::dense_backward(x, w, 3, 2, doubled(nn::dense_forward(x, w, 3, 2)));
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double fd = testutil::central_difference(loss, w[i], 1e-5);
    EXPECT_LT(testutil::relative_error(g.grad_w[i], fd), 1e-6);
  }
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double fd = testutil::central_difference(loss, x.data[i], 1e-5);
    EXPECT_LT(testutil::relative_error(g.grad_x.data[i], fd), 1e-6);
  }
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

TEST(Activations, ReluAndSigmoidValues) {
  const auto relu = nn::activation_forward(make_tensor({-2, 3}), nn::Activation::Relu);
  EXPECT_EQ(relu.data[0], 0.0);
  EXPECT_EQ(relu.data[1], 3.0);
  const auto sig = nn::activation_forward(make_tensor({0}), nn::Activation::Sigmoid);
  EXPECT_DOUBLE_EQ(sig.data[0], 0.5);
}

TEST(Activations, SigmoidDerivativeAtZero) {
  nn::Tensor2 x = make_tensor({0});
  const auto loss = [&] {
    // plain sigmoid value, not squared: derivative at 0 should be 0.25
    return nn::activation_forward(x, nn::Activation::Sigmoid).data[0];
  };
  const double fd = testutil::central_difference(loss, x.data[0], 1e-4);
  const auto out = nn::activation_forward(x, nn::Activation::Sigmoid);
  nn::Tensor2 ones = make_tensor({1.0});
  const auto g = nn::activation_backward(out, ones, nn::Activation::Sigmoid);
  EXPECT_NEAR(g.data[0], 0.25, 1e-12);
  EXPECT_NEAR(fd, 0.25, 1e-8);
}

TEST(Activations, BackwardMatchesFiniteDifferences) {
  Rng rng(35);
  for (nn::Activation kind : {nn::Activation::Relu, nn::Activation::Sigmoid}) {
    nn::Tensor2 x(10, 2);
    fill_random(x.data, rng, -2.0, 2.0);
    const auto loss = [&] { return sum_squares(nn::activation_forward(x, kind)); };
    const auto out = nn::activation_forward(x, kind);
    const auto g = nn::activation_backward(out, doubled(out), kind);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      if (kind == nn::Activation::Relu && std::abs(x.data[i]) < 1e-3) continue;  // kink
      const double fd = testutil::central_difference(loss, x.data[i], 1e-5);
      EXPECT_LT(testutil::relative_error(g.data[i], fd), 1e-5);
    }
  }
}

// ---------------------------------------------------------------------------
// parameter counting and shape laws
// ---------------------------------------------------------------------------

TEST(CountParameters, ReferenceRows) {
  nn::LayerSpec conv;
  conv.kind = nn::LayerKind::Conv1d;
  conv.kernel_size = 3;
  conv.in_channels = 1;
  conv.out_channels = 32;
  EXPECT_EQ(nn::count_parameters(conv), 96);

  nn::LayerSpec bn;
  bn.kind = nn::LayerKind::BatchNorm;
  bn.in_channels = bn.out_channels = 32;
  EXPECT_EQ(nn::count_parameters(bn), 128);

  nn::LayerSpec dense;
  dense.kind = nn::LayerKind::Dense;
  dense.in_channels = 32;
  dense.out_channels = 1;
  EXPECT_EQ(nn::count_parameters(dense), 32);

  nn::LayerSpec pool;
  pool.kind = nn::LayerKind::MaxPool;
  pool.in_channels = pool.out_channels = 32;
  EXPECT_EQ(nn::count_parameters(pool), 0);
}

TEST(ShapeLaws, SamePaddingAndPoolUpsample) {
  Rng rng(36);
  for (int len : {1, 2, 7, 30, 9000}) {
    nn::Tensor2 x(len, 1);
    fill_random(x.data, rng);
    nn::ConvKernel k(3, 1, 4);
    fill_random(k.w, rng);
    EXPECT_EQ(nn::conv1d_forward(x, k).length, len);
    EXPECT_EQ(nn::maxpool1d_forward(x).out.length, (len + 1) / 2);
    EXPECT_EQ(nn::upsample1d_forward(x).length, len * 2);
  }
}
