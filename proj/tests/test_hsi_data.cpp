#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "hsia/cube_io.hpp"
#include "hsia/oracles.hpp"
#include "hsia/patches.hpp"
#include "hsia/pca.hpp"
#include "hsia/scene.hpp"

using namespace hsia;

namespace {

ReducedScene constant_scene(std::size_t k, std::size_t h, std::size_t w, float v) {
  ReducedScene r;
  r.planes = Tensor(Shape{k, h, w}, v);
  r.labels = LabelMap(h, w, 0);
  r.class_names = {"a"};
  return r;
}

}  // namespace

TEST(Scene, NoiselessPixelsEqualPrototypes) {
  const auto recipe = brain_recipe(5, 32, 32, 16, 0.0);
  const auto scene = generate_scene(recipe);
  for (std::size_t p = 0; p < scene.labels.size(); ++p) {
    const auto& proto = recipe.classes[scene.labels.labels[p]].prototype;
    for (std::size_t d = 0; d < 16; ++d) ASSERT_EQ(scene.cube[p * 16 + d], proto[d]);
  }
}

TEST(Scene, DeterministicForFixedSeed) {
  const auto a = generate_scene(brain_recipe(9, 32, 32, 12));
  const auto b = generate_scene(brain_recipe(9, 32, 32, 12));
  EXPECT_EQ(a.cube, b.cube);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(generate_scene(brain_recipe(10, 32, 32, 12)).cube, a.cube);
}

TEST(Scene, EveryClassCoversOnePercent) {
  for (std::uint64_t seed : {1u, 2u, 3u, 42u}) {
    const auto scene = generate_scene(brain_recipe(seed));
    scene.validate();
    std::vector<std::size_t> counts(scene.num_classes(), 0);
    for (ClassId l : scene.labels.labels) ++counts[l];
    for (auto n : counts) EXPECT_GE(n * 100, scene.labels.size());
  }
}

TEST(Scene, MdcPresetHasTwoClasses) { EXPECT_EQ(generate_scene(mdc_recipe(3, 32, 32, 10)).num_classes(), 2u); }

TEST(Scene, RejectsDuplicatePrototypes) {
  auto r = brain_recipe(1, 16, 16, 8);
  r.classes[1].prototype = r.classes[0].prototype;
  EXPECT_THROW(generate_scene(r), ArgumentError);
}

TEST(Scene, ImpossibleLayoutIsGenerationError) {
  auto r = brain_recipe(1, 16, 16, 8);
  r.classes[1].blobs.host = ClassId{2};
  r.classes[2].blobs.count = 0;
  r.max_attempts = 4;
  EXPECT_THROW(generate_scene(r), GenerationError);
}

TEST(Pca, RankOneDataRecoversAxis) {
  Rng rng(1);
  const std::vector<float> axis{0.6f, 0.0f, 0.8f};
  Tensor x(Shape{50, 3});
  for (std::size_t n = 0; n < 50; ++n) {
    const float t = static_cast<float>(rng.uniform(-1, 1));
    for (std::size_t d = 0; d < 3; ++d) x.at(n, d) = 2.0f + t * axis[d];
  }
  const auto pca = pca_fit(x, 1);
  for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(pca.components.at(0, d), axis[d], 1e-5);
}

TEST(Pca, ComponentsOrthonormalAndVarianceNonincreasing) {
  Rng rng(2);
  const Tensor x = oracle::random_tensor(rng, Shape{200, 8});
  const auto pca = pca_fit(x, 5);
  for (std::size_t a = 0; a < 5; ++a) {
    for (std::size_t b = 0; b < 5; ++b) {
      double dot = 0;
      for (std::size_t d = 0; d < 8; ++d) dot += pca.components.at(a, d) * pca.components.at(b, d);
      EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-5);
    }
    if (a > 0) {
      EXPECT_LE(pca.explained_variance[a], pca.explained_variance[a - 1]);
    }
  }
}

TEST(Pca, FullRankIsIsometryAndInvertible) {
  Rng rng(3);
  HsiScene scene;
  scene.cube = oracle::random_tensor(rng, Shape{6, 5, 4}, 0, 1);
  scene.labels = LabelMap(6, 5, 0);
  scene.class_names = {"a"};
  const auto pca = pca_fit(scene.cube.reshaped(Shape{30, 4}), 4);
  const auto reduced = pca_transform(pca, scene);
  const Tensor back = pca_inverse(pca, reduced.planes);
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_NEAR(back[i], scene.cube[i], 1e-5);
  for (std::size_t a = 0; a < 30; ++a) {
    for (std::size_t b = a + 1; b < 30; b += 7) {
      double din = 0, dout = 0;
      for (std::size_t d = 0; d < 4; ++d) {
        din += std::pow(scene.cube[a * 4 + d] - scene.cube[b * 4 + d], 2);
        dout += std::pow(reduced.planes[d * 30 + a] - reduced.planes[d * 30 + b], 2);
      }
      EXPECT_NEAR(std::sqrt(din), std::sqrt(dout), 1e-5);
    }
  }
}

TEST(Pca, ProjectingTheMeanGivesZero) {
  Rng rng(4);
  const Tensor x = oracle::random_tensor(rng, Shape{40, 6});
  const auto pca = pca_fit(x, 3);
  for (float v : pca_project(pca, pca.mean.values())) EXPECT_NEAR(v, 0.0f, 1e-6);
}

TEST(Pca, RejectsTooManyComponents) { EXPECT_THROW(pca_fit(Tensor(Shape{10, 3}), 4), ArgumentError); }

TEST(Scaling, FitsPerComponentRangeOnChosenPixels) {
  ReducedScene r = constant_scene(2, 2, 2, 0.0f);
  const std::vector<float> vals{1, 3, 5, 100, -2, 0, 2, -50};
  for (std::size_t i = 0; i < 8; ++i) r.planes[i] = vals[i];
  const std::vector<std::size_t> pixels{0, 1, 2};
  const auto s = fit_scaling(r, pixels);
  const auto out = apply_scaling(s, r);
  EXPECT_FLOAT_EQ(out.planes[0], 0.0f);
  EXPECT_FLOAT_EQ(out.planes[1], 0.5f);
  EXPECT_FLOAT_EQ(out.planes[2], 1.0f);
  EXPECT_FLOAT_EQ(out.planes[3], 1.0f);
  EXPECT_FLOAT_EQ(out.planes[4], 0.0f);
  EXPECT_FLOAT_EQ(out.planes[6], 1.0f);
  EXPECT_FLOAT_EQ(out.planes[7], 0.0f);
}

TEST(Patches, OnePatchPerPixelWithCentreLabel) {
  ReducedScene r = constant_scene(3, 5, 5, 1.0f);
  r.labels.at(2, 3) = 1;
  const auto set = extract_patches(r, 3);
  ASSERT_EQ(set.size(), 25u);
  EXPECT_EQ(set.labels[2 * 5 + 3], 1);
  EXPECT_EQ(set.origins[2 * 5 + 3].row, 2u);
  EXPECT_EQ(set.origins[2 * 5 + 3].col, 3u);
}

TEST(Patches, CornerPatchIsZeroPadded) {
  const auto set = extract_patches(constant_scene(2, 20, 20, 1.0f), 11);
  const Tensor& corner = set.patches[0];
  std::size_t zeros = 0;
  for (std::size_t y = 0; y < 11; ++y)
    for (std::size_t x = 0; x < 11; ++x) zeros += corner.at(0, y, x) == 0.0f;
  EXPECT_EQ(zeros, 85u);
  const Tensor& interior = set.patches[10 * 20 + 10];
  for (float v : interior.values()) EXPECT_EQ(v, 1.0f);
}

TEST(Patches, CentreMatchesScene) {
  Rng rng(5);
  ReducedScene r = constant_scene(3, 7, 6, 0.0f);
  r.planes = oracle::random_tensor(rng, r.planes.shape());
  const auto set = extract_patches(r, 5);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(set.patches[i * 6 + j].at(c, 2, 2), r.planes.at(c, i, j));
}

TEST(Patches, EvenWindowRejected) { EXPECT_THROW(extract_patches(constant_scene(1, 4, 4, 0), 4), ArgumentError); }

TEST(Split, StratifiedCounts) {
  std::vector<ClassId> labels;
  for (ClassId c = 0; c < 3; ++c) labels.insert(labels.end(), 100, c);
  const auto s = stratified_split(labels, 0.8, 7);
  std::vector<int> train(3), test(3);
  for (auto i : s.train) ++train[labels[i]];
  for (auto i : s.test) ++test[labels[i]];
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(train[c], 80);
    EXPECT_EQ(test[c], 20);
  }
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  for (auto i : s.test) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), labels.size());
}

TEST(Split, TwoPerClassSplitsEvenly) {
  const std::vector<ClassId> labels{0, 0, 1, 1};
  const auto s = stratified_split(labels, 0.5, 1);
  EXPECT_EQ(s.train.size(), 2u);
  EXPECT_EQ(s.test.size(), 2u);
}

TEST(Split, Deterministic) {
  std::vector<ClassId> labels;
  for (int i = 0; i < 60; ++i) labels.push_back(static_cast<ClassId>(i % 4));
  const auto a = stratified_split(labels, 0.8, 3), b = stratified_split(labels, 0.8, 3);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
}

TEST(Split, SingletonClassIsSplitError) {
  const std::vector<ClassId> labels{0, 0, 0, 1};
  EXPECT_THROW(stratified_split(labels, 0.8, 1), SplitError);
}

TEST(CubeIo, RoundTrip) {
  const auto scene = generate_scene(brain_recipe(4, 16, 16, 8));
  const auto path = (std::filesystem::temp_directory_path() / "hsia_cube_io_test.hsc").string();
  write_cube(scene, path);
  const auto back = read_cube(path);
  EXPECT_EQ(back.cube, scene.cube);
  EXPECT_EQ(back.labels, scene.labels);
  std::filesystem::remove(path);
}

TEST(CubeIo, CorruptionAndTruncationAreFormatErrors) {
  auto bytes = encode_cube(to_cube_file(generate_scene(brain_recipe(4, 16, 16, 8))));
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  EXPECT_THROW(decode_cube(flipped), FormatError);
  std::vector<std::uint8_t> header(bytes.begin(), bytes.begin() + 16);
  EXPECT_THROW(decode_cube(header), FormatError);
  std::vector<std::uint8_t> bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_cube(bad_magic), FormatError);
}

TEST(ClassMap, SingleColourImage) {
  const LabelMap map(2, 3, 1);
  const auto bytes = render_class_map(map, default_palette(4));
  const std::string head = "P6\n3 2\n255\n";
  ASSERT_EQ(bytes.size(), head.size() + 18);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(head.size())), head);
  const Rgb c = default_palette(4)[1];
  for (std::size_t p = 0; p < 6; ++p)
    for (int k = 0; k < 3; ++k) EXPECT_EQ(bytes[head.size() + 3 * p + k], c[k]);
}

TEST(ClassMap, DeterministicAndDistinctColours) {
  LabelMap map(2, 2);
  map.labels = {0, 1, 2, 3};
  EXPECT_EQ(render_class_map(map, default_palette(4)), render_class_map(map, default_palette(4)));
  const auto palette = default_palette(4);
  EXPECT_EQ(std::set<Rgb>(palette.begin(), palette.end()).size(), 4u);
  EXPECT_THROW(render_class_map(map, default_palette(2)), ArgumentError);
}

TEST(ClassMap, UnassessedPixelsAreBlack) {
  LabelMap map(1, 1, kUnassessed);
  const auto bytes = render_class_map(map, default_palette(2));
  EXPECT_EQ(bytes[bytes.size() - 1], 0);
  EXPECT_EQ(bytes[bytes.size() - 3], 0);
}
