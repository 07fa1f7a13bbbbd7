#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hsia/attacks.hpp"
#include "hsia/oracles.hpp"
#include "hsia/verify.hpp"

using namespace hsia;

namespace {

struct Case {
  PatchClassifier model;
  Tensor x;
  ClassId y;
};

Case random_case(Rng& rng) {
  Case c{oracle::random_small_classifier(rng), {}, 0};
  c.x = oracle::random_tensor(rng, c.model.contract().patch_shape(), 0.0, 1.0);
  c.y = static_cast<ClassId>(rng.below(c.model.num_classes()));
  return c;
}

PatchClassifier zero_model(const Case& c) { return make_zero_classifier(c.model.contract(), c.model.num_classes()); }

}  // namespace

TEST(Lpda, WindowOneEqualsNormalizedGradientSteps) {
  Rng rng(1);
  for (int t = 0; t < 15; ++t) {
    const Case c = random_case(rng);
    AttackConfig cfg;
    cfg.window = 1;
    cfg.iterations = 1 + rng.below(5);
    EXPECT_EQ(lpda(c.x, c.y, c.model, cfg).adversarial,
              oracle::normalized_gradient_steps(c.x, c.y, c.model, cfg.epsilon, cfg.iterations));
  }
}

TEST(Lpda, LossHistoryHasOneEntryPerIterateAndStaysInRange) {
  Rng rng(2);
  const Case c = random_case(rng);
  AttackConfig cfg;
  cfg.iterations = 7;
  const auto r = lpda(c.x, c.y, c.model, cfg);
  EXPECT_EQ(r.loss_history.size(), 8u);
  for (float v : r.adversarial.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  EXPECT_LE(r.perturbation.budget.linf, cfg.iterations * cfg.epsilon + 1e-6);
}

TEST(Lpda, ZeroModelStallsEveryStep) {
  Rng rng(3);
  const Case c = random_case(rng);
  AttackConfig cfg;
  cfg.iterations = 4;
  const auto r = lpda(c.x, c.y, zero_model(c), cfg);
  EXPECT_EQ(r.adversarial, c.x);
  EXPECT_EQ(r.stalled_steps, 4u);
}

TEST(Lpda, ZeroEpsilonReturnsInput) {
  Rng rng(4);
  const Case c = random_case(rng);
  AttackConfig cfg;
  cfg.epsilon = 0.0f;
  EXPECT_EQ(lpda(c.x, c.y, c.model, cfg).adversarial, c.x);
  EXPECT_EQ(mia(c.x, c.y, c.model, cfg).adversarial, c.x);
  EXPECT_EQ(sign_gradient_baseline(c.x, c.y, c.model, 0.0f).adversarial, c.x);
}

TEST(Lpda, TargetedSmallStepsDoNotLowerTargetProbability) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const Case c = random_case(rng);
    const ClassId target = static_cast<ClassId>(rng.below(c.model.num_classes()));
    AttackConfig cfg;
    cfg.window = 1;
    cfg.epsilon = 1e-4f;
    cfg.iterations = 3;
    const auto r = lpda_targeted(c.x, target, c.model, cfg);
    const float before = c.model.forward(c.x).probabilities[target];
    const float after = c.model.forward(r.adversarial).probabilities[target];
    EXPECT_GE(after, before - 1e-6f);
  }
}

TEST(Lpda, TargetingTheCurrentArgmaxKeepsIt) {
  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    const Case c = random_case(rng);
    const ClassId top = c.model.predict(c.x);
    AttackConfig cfg;
    cfg.iterations = 5;
    EXPECT_EQ(c.model.predict(lpda_targeted(c.x, top, c.model, cfg).adversarial), top);
  }
}

TEST(Lpda, UntargetedHelperRejectsTargetedConfig) {
  Rng rng(7);
  const Case c = random_case(rng);
  AttackConfig cfg;
  cfg.direction = Direction::Targeted;
  cfg.target_class = 0;
  EXPECT_THROW(lpda_untargeted(c.x, c.y, c.model, cfg), ArgumentError);
}

TEST(Lpda, InputOutsideClipRangeRejected) {
  Rng rng(8);
  Case c = random_case(rng);
  c.x[0] = 1.5f;
  EXPECT_THROW(lpda(c.x, c.y, c.model, AttackConfig{}), ArgumentError);
}

TEST(Mia, SingleScaleFlatModelEqualsNormalizedGradientStep) {
  Rng rng(9);
  std::vector<Layer<float>> layers{Layer<float>::make(FlattenSpec{}), Layer<float>::make(DenseSpec{36, 3})};
  layers[1].weight = oracle::random_tensor(rng, layers[1].weight.shape());
  const PatchClassifier model(ModelContract{1, 6, 6}, 3, std::move(layers));
  const Tensor x = oracle::random_tensor(rng, model.contract().patch_shape(), 0, 1);
  AttackConfig cfg;
  cfg.scales = {1};
  EXPECT_EQ(mia(x, 1, model, cfg).adversarial, oracle::normalized_gradient_steps(x, 1, model, cfg.epsilon, 1));
}

TEST(Mia, AggregateMatchesOracleOnSmallPatch) {
  Rng rng(10);
  const Tensor x = oracle::random_tensor(rng, Shape{2, 4, 4}, 0, 1);
  const Tensor g = oracle::random_tensor(rng, Shape{2, 4, 4});
  for (MiaMode mode : {MiaMode::Residual, MiaMode::Literal}) {
    AttackConfig cfg;
    cfg.scales = {1, 2};
    cfg.mia_mode = mode;
    const Tensor got = mia_aggregate(x, g, cfg);
    const auto want = oracle::mia_aggregate(x, g, cfg);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-6);
  }
}

TEST(Mia, ResidualPerturbationIsBroadcastAndBounded) {
  Rng rng(11);
  for (int t = 0; t < 10; ++t) {
    const Case c = random_case(rng);
    AttackConfig cfg;
    cfg.scales = {1, 2, 4};
    const auto r = mia(c.x, c.y, c.model, cfg);
    const Tensor& d = r.perturbation.delta;
    EXPECT_NEAR(max_abs(d), cfg.epsilon, 1e-7);
    const std::size_t plane = d.dim(1) * d.dim(2);
    for (std::size_t k = 1; k < d.dim(0); ++k)
      for (std::size_t i = 0; i < plane; ++i) EXPECT_EQ(d[k * plane + i], d[i]);
  }
}

TEST(Mia, ZeroModelGivesZeroPerturbation) {
  Rng rng(12);
  const Case c = random_case(rng);
  const auto r = mia(c.x, c.y, zero_model(c), AttackConfig{});
  EXPECT_EQ(max_abs(r.perturbation.delta), 0.0f);
  EXPECT_EQ(r.adversarial, c.x);
}

TEST(Mia, ScaleLargerThanPatchRejected) {
  Rng rng(13);
  const Case c = random_case(rng);
  AttackConfig cfg;
  cfg.scales = {1, 16};
  EXPECT_THROW(mia(c.x, c.y, c.model, cfg), ArgumentError);
}

TEST(Combined, ZeroMultiscaleModelReducesToLpda) {
  Rng rng(14);
  for (int t = 0; t < 5; ++t) {
    const Case c = random_case(rng);
    AttackConfig cfg;
    cfg.iterations = 6;
    const auto r = combined_attack(c.x, c.y, c.model, zero_model(c), cfg);
    const Tensor local = lpda(c.x, c.y, c.model, cfg).adversarial;
    EXPECT_EQ(max_abs(r.multiscale->delta), 0.0f);
    for (std::size_t i = 0; i < local.size(); ++i) EXPECT_NEAR(r.adversarial[i], local[i], 1e-6);
  }
}

TEST(Combined, DeltaIsSumOfConstituents) {
  Rng rng(15);
  for (int t = 0; t < 10; ++t) {
    const Case c = random_case(rng);
    AttackConfig cfg;
    cfg.iterations = 5;
    const auto r = combined_attack(c.x, c.y, c.model, cfg);
    ASSERT_TRUE(r.local && r.multiscale);
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      EXPECT_EQ(r.perturbation.delta[i], r.local->delta[i] + r.multiscale->delta[i]);
      EXPECT_EQ(r.adversarial[i], std::clamp(c.x[i] + r.perturbation.delta[i], 0.0f, 1.0f));
    }
    EXPECT_LE(r.perturbation.budget.linf, cfg.iterations * cfg.epsilon + cfg.epsilon + 1e-6);
  }
}

TEST(Baseline, MovesEveryCoordinateByEpsilon) {
  Rng rng(16);
  const Case c = random_case(rng);
  Tensor x = c.x;
  for (float& v : x.values()) v = 0.25f + 0.5f * v;
  const auto r = sign_gradient_baseline(x, c.y, c.model, 0.01f);
  const auto g = c.model.loss_and_input_gradient(x, c.y).gradient;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float expect = g[i] > 0 ? 0.01f : (g[i] < 0 ? -0.01f : 0.0f);
    EXPECT_EQ(r.perturbation.delta[i], expect);
  }
  EXPECT_NEAR(r.perturbation.budget.linf, 0.01, 1e-6);
}

TEST(AttackScene, NoneKeepsMapsEqual) {
  Rng rng(17);
  const auto model = oracle::random_small_classifier(rng);
  PatchSet set;
  for (std::size_t i = 0; i < 12; ++i) {
    set.patches.push_back(oracle::random_tensor(rng, model.contract().patch_shape(), 0, 1));
    set.labels.push_back(static_cast<ClassId>(i % 3));
    set.origins.push_back({0, i / 4, i % 4});
  }
  const auto none = attack_scene(set, 3, 4, model, AttackConfig{}, AttackKind::None);
  EXPECT_EQ(none.clean_map, none.adv_map);
  EXPECT_EQ(none.clean_pred, none.adv_pred);
  EXPECT_EQ(none.total.linf, 0.0);

  AttackConfig cfg;
  cfg.iterations = 3;
  const auto a = attack_scene(set, 3, 4, model, cfg, AttackKind::Combined);
  const auto b = attack_scene(set, 3, 4, model, cfg, AttackKind::Combined);
  EXPECT_EQ(a.adv_pred, b.adv_pred);
  EXPECT_EQ(a.total, b.total);
  EXPECT_EQ(a.local.size(), set.size());
  EXPECT_TRUE(a.failures.empty());
}

TEST(AttackScene, ContractMismatchIsConfigError) {
  Rng rng(18);
  const auto model = oracle::random_small_classifier(rng);
  PatchSet set;
  set.patches.push_back(Tensor(Shape{3, 9, 9}));
  set.labels.push_back(0);
  set.origins.push_back({});
  EXPECT_THROW(attack_scene(set, 1, 1, model, AttackConfig{}, AttackKind::Lpda), ConfigError);
}

TEST(AttackConfig, Validation) {
  AttackConfig cfg;
  cfg.window = 2;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = {};
  cfg.iterations = 0;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = {};
  cfg.epsilon = -1.0f;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  EXPECT_EQ(parse_attack_kind("combined"), AttackKind::Combined);
  EXPECT_THROW(parse_attack_kind("fgsm"), ArgumentError);
}

TEST(Verify, DefaultImplementationsPass) {
  std::ostringstream out;
  const auto report = run_verify(out);
  EXPECT_TRUE(report.all_passed()) << out.str();
}

TEST(Verify, InjectedSignFlipIsNamed) {
  VerifyHooks hooks;
  hooks.box_filter = [](const Tensor& f, std::size_t k) {
    Tensor out = box_filter_mean(f, k);
    out[0] = -out[0];
    return out;
  };
  std::ostringstream out;
  const auto report = run_verify(out, hooks);
  EXPECT_FALSE(report.all_passed());
  EXPECT_NE(out.str().find("FAIL oracle/box_filter_mean"), std::string::npos) << out.str();
  EXPECT_NE(out.str().find("PASS oracle/downsample"), std::string::npos);
}
