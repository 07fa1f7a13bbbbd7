#include <gtest/gtest.h>

#include "hsia/oracles.hpp"
#include "hsia/random.hpp"
#include "hsia/tensor.hpp"

using namespace hsia;

namespace {

Tensor plane(std::size_t h, std::size_t w, std::vector<float> v) { return Tensor(Shape{h, w}, std::move(v)); }

}  // namespace

TEST(Shape, RejectsZeroExtent) { EXPECT_THROW(Shape({3, 0}), ArgumentError); }

TEST(Tensor, DataLengthMustMatchShape) { EXPECT_THROW(Tensor(Shape{2, 2}, {1, 2, 3}), ArgumentError); }

TEST(Tensor, AddAndSubtractCheckShapes) {
  Tensor a(Shape{2}, {1, 2}), b(Shape{2}, {3, 5});
  EXPECT_EQ((a + b), Tensor(Shape{2}, {4, 7}));
  EXPECT_EQ((b - a), Tensor(Shape{2}, {2, 3}));
  EXPECT_THROW(a + Tensor(Shape{3}), ConfigError);
}

TEST(ClipToRange, Examples) {
  Tensor t(Shape{3}, {-0.5f, 0.5f, 1.5f});
  EXPECT_EQ(clip_to_range(t, 0.0f, 1.0f), Tensor(Shape{3}, {0.0f, 0.5f, 1.0f}));
  Tensor in(Shape{2}, {0.25f, 0.75f});
  EXPECT_EQ(clip_to_range(in, 0.0f, 1.0f), in);
  EXPECT_EQ(clip_to_range(Tensor(Shape{4}, 2.0f), 0.0f, 1.0f), Tensor(Shape{4}, 1.0f));
  EXPECT_THROW(clip_to_range(t, 1.0f, 0.0f), ArgumentError);
}

TEST(BoxFilter, CenterSpikeExample) {
  Tensor f(Shape{3, 3});
  f.at(1, 1) = 9.0f;
  const Tensor out = box_filter_mean(f, 3);
  EXPECT_FLOAT_EQ(out.at(1, 1), 1.0f);
  EXPECT_FLOAT_EQ(out.at(0, 1), 1.5f);
  EXPECT_FLOAT_EQ(out.at(1, 0), 1.5f);
  EXPECT_FLOAT_EQ(out.at(0, 0), 2.25f);
  EXPECT_FLOAT_EQ(out.at(2, 2), 2.25f);
}

TEST(BoxFilter, WindowOneIsExactIdentity) {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const Tensor f = oracle::random_tensor(rng, Shape{1 + rng.below(7), 1 + rng.below(7)});
    EXPECT_EQ(box_filter_mean(f, 1), f);
  }
}

TEST(BoxFilter, PreservesConstantsIncludingCorners) {
  for (std::size_t k : {1u, 3u, 5u, 7u}) {
    const Tensor out = box_filter_mean(Tensor(Shape{5, 6}, 0.3f), k);
    for (float v : out.values()) EXPECT_NEAR(v, 0.3f, 1e-6);
  }
}

TEST(BoxFilter, EvenWindowRejected) { EXPECT_THROW(box_filter_mean(Tensor(Shape{3, 3}), 2), ArgumentError); }

TEST(BoxFilter, IsLinear) {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const Shape s{2 + rng.below(6), 2 + rng.below(6)};
    const Tensor f = oracle::random_tensor(rng, s), g = oracle::random_tensor(rng, s);
    const float a = static_cast<float>(rng.uniform(-2, 2)), b = static_cast<float>(rng.uniform(-2, 2));
    Tensor combo(s);
    for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = a * f[i] + b * g[i];
    const Tensor lhs = box_filter_mean(combo, 3), ff = box_filter_mean(f, 3), fg = box_filter_mean(g, 3);
    for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], a * ff[i] + b * fg[i], 1e-6);
  }
}

TEST(BoxFilter, MatchesWindowEnumerationOracle) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const Tensor f = oracle::random_tensor(rng, Shape{1 + rng.below(9), 1 + rng.below(9)});
    const std::size_t k = 1 + 2 * rng.below(4);
    const Tensor got = box_filter_mean(f, k);
    const auto want = oracle::box_filter(f, k);
    for (std::size_t i = 0; i < want.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-6);
  }
}

TEST(BoxFilter, PlanesFilterEachComponentSeparately) {
  Tensor t(Shape{2, 3, 3});
  t.at(0, 1, 1) = 9.0f;
  const Tensor out = box_filter_planes(t, 3);
  EXPECT_FLOAT_EQ(out.at(0, 0, 0), 2.25f);
  for (std::size_t i = 9; i < 18; ++i) EXPECT_EQ(out[i], 0.0f);
}

TEST(Downsample, Examples) {
  EXPECT_EQ(downsample(plane(2, 2, {1, 2, 3, 4}), 2), plane(1, 1, {2.5f}));
  const Tensor b = plane(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(downsample(b, 1), b);
  const Tensor c = downsample(Tensor(Shape{5, 5}, 0.7f), 2);
  EXPECT_EQ(c.shape(), Shape({3, 3}));
  for (float v : c.values()) EXPECT_NEAR(v, 0.7f, 1e-6);
  EXPECT_THROW(downsample(b, 0), ArgumentError);
}

TEST(Downsample, PreservesMeanOnMultiples) {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const std::size_t s = 1 + rng.below(3);
    const Tensor b = oracle::random_tensor(rng, Shape{s * (1 + rng.below(4)), s * (1 + rng.below(4))});
    const Tensor d = downsample(b, s);
    double mb = 0, md = 0;
    for (float v : b.values()) mb += v;
    for (float v : d.values()) md += v;
    EXPECT_NEAR(mb / b.size(), md / d.size(), 1e-6);
  }
}

TEST(Downsample, MatchesBlockOracle) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const Tensor b = oracle::random_tensor(rng, Shape{1 + rng.below(10), 1 + rng.below(10)});
    const std::size_t s = 1 + rng.below(4);
    const Tensor got = downsample(b, s);
    const auto want = oracle::downsample(b, s);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-6);
  }
}

TEST(Upsample, Examples) {
  EXPECT_EQ(upsample(plane(1, 1, {2.5f}), 2, 2), Tensor(Shape{2, 2}, 2.5f));
  const Tensor b = plane(2, 2, {1, 2, 3, 4});
  EXPECT_EQ(upsample(b, 2, 2), b);
  EXPECT_THROW(upsample(b, 1, 2), ArgumentError);
  const Tensor c = upsample(Tensor(Shape{2, 3}, 0.4f), 5, 7);
  for (float v : c.values()) EXPECT_EQ(v, 0.4f);
}

TEST(Upsample, MatchesNearestNeighbourOracle) {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const Tensor b = oracle::random_tensor(rng, Shape{1 + rng.below(5), 1 + rng.below(5)});
    const std::size_t h = b.dim(0) + rng.below(7), w = b.dim(1) + rng.below(7);
    const Tensor got = upsample(b, h, w);
    const auto want = oracle::upsample(b, h, w);
    for (std::size_t i = 0; i < want.size(); ++i) ASSERT_EQ(got[i], want[i]);
  }
}

TEST(Upsample, InvertsDownsampleOnBlockConstantImages) {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const std::size_t s = 1 + rng.below(4), bh = 1 + rng.below(4), bw = 1 + rng.below(4);
    const Tensor coarse = oracle::random_tensor(rng, Shape{bh, bw});
    Tensor img(Shape{bh * s, bw * s});
    for (std::size_t i = 0; i < bh * s; ++i)
      for (std::size_t j = 0; j < bw * s; ++j) img.at(i, j) = coarse.at(i / s, j / s);
    const Tensor back = upsample(downsample(img, s), bh * s, bw * s);
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(back[i], img[i], 1e-6);
  }
}
