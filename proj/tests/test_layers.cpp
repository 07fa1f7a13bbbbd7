#include <gtest/gtest.h>

#include <cmath>

#include "hsia/layers.hpp"
#include "hsia/oracles.hpp"

using namespace hsia;

namespace {

Layer<float> dense_identity(std::size_t n) {
  auto l = Layer<float>::make(DenseSpec{n, n});
  for (std::size_t i = 0; i < n; ++i) l.weight.at(i, i) = 1.0f;
  return l;
}

}  // namespace

TEST(Relu, ForwardAndBackward) {
  const auto relu = Layer<float>::make(ReluSpec{});
  EXPECT_EQ(layer_forward(relu, Tensor(Shape{3}, {-1, 0, 2})), Tensor(Shape{3}, {0, 0, 2}));
  LayerCache<float> cache;
  layer_forward(relu, Tensor(Shape{2}, {-1, 2}), &cache);
  EXPECT_EQ(layer_backward(relu, cache, Tensor(Shape{2}, {1, 1})), Tensor(Shape{2}, {0, 1}));
}

TEST(Relu, SubgradientAtZeroIsZero) {
  const auto relu = Layer<float>::make(ReluSpec{});
  LayerCache<float> cache;
  layer_forward(relu, Tensor(Shape{1}, {0.0f}), &cache);
  EXPECT_EQ(layer_backward(relu, cache, Tensor(Shape{1}, {1.0f}))[0], 0.0f);
}

TEST(Dense, IdentityWeightsPassThrough) {
  const auto l = dense_identity(4);
  const Tensor v(Shape{4}, {0.5f, -1.0f, 2.0f, 3.0f});
  EXPECT_EQ(layer_forward(l, v), v);
  LayerCache<float> cache;
  layer_forward(l, v, &cache);
  const Tensor g(Shape{4}, {1, 2, 3, 4});
  EXPECT_EQ(layer_backward(l, cache, g), g);
}

TEST(Conv2D, OnesKernelOnConstantInput) {
  auto l = Layer<float>::make(Conv2DSpec{1, 1, 3, 3, 1});
  l.weight.fill(1.0f);
  const Tensor out = layer_forward(l, Tensor(Shape{1, 5, 5}, 1.0f));
  EXPECT_EQ(out.shape(), Shape({1, 3, 3}));
  for (float v : out.values()) EXPECT_FLOAT_EQ(v, 9.0f);
}

TEST(Conv2D, MatchesNestedLoopConvolution) {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const Conv2DSpec spec{1 + rng.below(3), 1 + rng.below(3), 1 + rng.below(3), 1 + rng.below(3), 1 + rng.below(2)};
    auto l = Layer<float>::make(spec);
    l.weight = oracle::random_tensor(rng, l.weight.shape());
    l.bias = oracle::random_tensor(rng, l.bias.shape());
    const Tensor x = oracle::random_tensor(rng, Shape{spec.in_channels, spec.kernel_h + rng.below(4),
                                                      spec.kernel_w + rng.below(4)});
    const Tensor y = layer_forward(l, x);
    for (std::size_t o = 0; o < y.dim(0); ++o) {
      for (std::size_t i = 0; i < y.dim(1); ++i) {
        for (std::size_t j = 0; j < y.dim(2); ++j) {
          double acc = l.bias[o];
          for (std::size_t c = 0; c < spec.in_channels; ++c)
            for (std::size_t a = 0; a < spec.kernel_h; ++a)
              for (std::size_t b = 0; b < spec.kernel_w; ++b)
                acc += static_cast<double>(l.weight[((o * spec.in_channels + c) * spec.kernel_h + a) * spec.kernel_w + b]) *
                       x.at(c, i * spec.stride + a, j * spec.stride + b);
          ASSERT_NEAR(y.at(o, i, j), acc, 1e-5);
        }
      }
    }
  }
}

TEST(MaxPool2D, PicksBlockMaximumAndRoutesGradient) {
  const auto l = Layer<float>::make(MaxPool2DSpec{2, 2});
  const Tensor x(Shape{1, 2, 4}, {1, 5, 2, 0, 3, 4, 7, 6});
  LayerCache<float> cache;
  EXPECT_EQ(layer_forward(l, x, &cache), Tensor(Shape{1, 1, 2}, {5, 7}));
  EXPECT_EQ(layer_backward(l, cache, Tensor(Shape{1, 1, 2}, {1, 2})), Tensor(Shape{1, 2, 4}, {0, 1, 0, 0, 0, 0, 2, 0}));
}

TEST(Flatten, RoundTripsShape) {
  const auto l = Layer<float>::make(FlattenSpec{});
  const Tensor x(Shape{2, 1, 3}, {1, 2, 3, 4, 5, 6});
  LayerCache<float> cache;
  const Tensor y = layer_forward(l, x, &cache);
  EXPECT_EQ(y.shape(), Shape({6}));
  EXPECT_EQ(layer_backward(l, cache, y).shape(), x.shape());
}

TEST(Layers, ShapeMismatchNamesBothShapes) {
  const auto l = Layer<float>::make(DenseSpec{4, 2});
  try {
    layer_forward(l, Tensor(Shape{5}));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("[4]"), std::string::npos) << what;
    EXPECT_NE(what.find("[5]"), std::string::npos) << what;
  }
}

TEST(Layers, BackwardWithoutCacheIsUsageError) {
  const auto l = Layer<float>::make(ReluSpec{});
  LayerCache<float> empty;
  EXPECT_THROW(layer_backward(l, empty, Tensor(Shape{2})), UsageError);
}

TEST(Layers, OutputShapeChain) {
  Shape s{20, 11, 11};
  s = output_shape(Conv2DSpec{20, 16, 3, 3, 1}, s);
  EXPECT_EQ(s, Shape({16, 9, 9}));
  s = output_shape(MaxPool2DSpec{2, 2}, s);
  EXPECT_EQ(s, Shape({16, 4, 4}));
  s = output_shape(FlattenSpec{}, s);
  EXPECT_EQ(s, Shape({256}));
  EXPECT_EQ(output_shape(DenseSpec{256, 4}, s), Shape({4}));
}

class LayerGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(LayerGradient, MatchesCentralDifferences) {
  const auto check = oracle::check_layer_gradients(GetParam(), 100, 1000 + GetParam());
  EXPECT_LT(check.max_input_error, 1e-4) << check.name;
  EXPECT_LT(check.max_param_error, 1e-4) << check.name;
}

std::string kind_name(const ::testing::TestParamInfo<std::size_t>& info) {
  return std::vector<std::string>{"Conv2D", "ReLU", "MaxPool2D", "Flatten", "Dense"}.at(info.param);
}

INSTANTIATE_TEST_SUITE_P(AllKinds, LayerGradient, ::testing::Values(0u, 1u, 2u, 3u, 4u), kind_name);

TEST(SoftmaxCrossEntropy, UniformLogits) {
  const auto r = softmax_cross_entropy(Tensor(Shape{4}), 2);
  EXPECT_NEAR(r.loss, std::log(4.0), 1e-6);
}

TEST(SoftmaxCrossEntropy, SaturatedCorrectClass) {
  const auto r = softmax_cross_entropy(Tensor(Shape{2}, {1000.0f, 0.0f}), 0);
  EXPECT_NEAR(r.loss, 0.0, 1e-6);
  EXPECT_TRUE(r.gradient.all_finite());
}

TEST(SoftmaxCrossEntropy, GradientSumsToZeroAndMatchesDifferences) {
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const std::size_t c = 2 + rng.below(5);
    const Tensor logits = oracle::random_tensor(rng, Shape{c}, -5, 5);
    const std::size_t label = rng.below(c);
    const auto r = softmax_cross_entropy(logits, label);
    EXPECT_GE(r.loss, 0.0f);
    double sum = 0;
    for (float g : r.gradient.values()) sum += g;
    EXPECT_NEAR(sum, 0.0, 1e-6);

    BasicTensor<double> z = logits.cast<double>();
    const auto exact = softmax_cross_entropy(z, label);
    std::vector<double> analytic, numeric;
    for (std::size_t i = 0; i < c; ++i) {
      auto fd = oracle::central_difference(z[i], [&] { return softmax_cross_entropy(z, label).loss; });
      ASSERT_TRUE(fd.has_value());
      analytic.push_back(exact.gradient[i]);
      numeric.push_back(*fd);
    }
    EXPECT_LT(oracle::relative_error(analytic, numeric), 1e-4);
  }
}

TEST(SoftmaxCrossEntropy, LabelOutOfRange) {
  EXPECT_THROW(softmax_cross_entropy(Tensor(Shape{3}), 3), ArgumentError);
}
