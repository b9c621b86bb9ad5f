#include <gtest/gtest.h>

#include <cmath>

#include "dense_oracle.hpp"
#include "stability_lab/certify.hpp"

using namespace stability_lab;

TEST(ReplaceOne, Definition) {
  const auto p = ConstructionParams::make(2, 4.0, 16.0);
  const TrainingSet s = {LabeledExample::of({3, Sign::plus}), LabeledExample::of({10, Sign::minus})};
  const TrainingSet r = replace_one(s, 1, LabeledExample::of({7, Sign::plus}));
  EXPECT_EQ(r, (TrainingSet{LabeledExample::of({7, Sign::plus}), LabeledExample::of({10, Sign::minus})}));
  EXPECT_EQ(s[0], LabeledExample::of({3, Sign::plus}));
  EXPECT_EQ(replace_one(s, 2, s[1]), s);
  EXPECT_THROW(replace_one(s, 0, s[0]), std::domain_error);
  EXPECT_THROW(replace_one(s, 3, s[0]), std::domain_error);
  RandomStream rng(1);
  for (int i = 0; i < 50; ++i) {
    const TrainingSet t = sample_training_set(p, rng);
    EXPECT_EQ(replace_one(t, 1 + static_cast<std::int64_t>(rng.below(2)), s[0]).size(), t.size());
  }
}

TEST(StabilityExhaustive, SingleSampleAttainsFourG) {
  const auto p = ConstructionParams::make(1, 4.0, 16.0);  // g = 1, d = 4
  const StabilityCertificate c = certify_stability_exhaustive(p, 1);
  EXPECT_EQ(c.mode, CertificateMode::exhaustive);
  EXPECT_NEAR(c.supremum_found, 4.0, 1e-12);
  EXPECT_EQ(c.budget_inspected, 8u * 1u * 8u * 8u);
  ASSERT_TRUE(c.witness.has_value());
  const auto& w = *c.witness;
  // first maximiser in enumeration order
  EXPECT_EQ(w.train, (TrainingSet{LabeledExample::of({1, Sign::plus})}));
  EXPECT_EQ(w.position, 1);
  EXPECT_EQ(w.replacement, LabeledExample::of({3, Sign::minus}));
  EXPECT_EQ(w.evaluation.x.index, 3);
  EXPECT_EQ(scale_factor(3, p), 2);
  // witness replays through the dense oracle
  const TrainingSet replaced = replace_one(w.train, w.position, w.replacement);
  EXPECT_NEAR(std::abs(dense::loss_at(w.train, w.evaluation.x, p) - dense::loss_at(replaced, w.evaluation.x, p)), 4.0,
              1e-12);
}

TEST(StabilityExhaustive, TwoSamples) {
  const auto p = ConstructionParams::make(2, 2.0, 2.0);  // g = 0.5, d = 16
  const StabilityCertificate c = certify_stability_exhaustive(p);
  EXPECT_NEAR(c.supremum_found, 2.0, 1e-12);
  EXPECT_LE(c.supremum_found, p.gamma_target() + 1e-12);
  EXPECT_EQ(c.budget_inspected, 32u * 32u * 2u * 32u * 32u);
}

TEST(StabilityExhaustive, WorkerCountDoesNotChangeResult) {
  const auto p = ConstructionParams::make(2, 1.0, 3.0);
  const auto a = certify_stability_exhaustive(p, 1);
  const auto b = certify_stability_exhaustive(p, 4);
  EXPECT_EQ(a.supremum_found, b.supremum_found);
  EXPECT_EQ(a.budget_inspected, b.budget_inspected);
  ASSERT_TRUE(a.witness && b.witness);
  EXPECT_EQ(a.witness->train, b.witness->train);
  EXPECT_EQ(a.witness->replacement, b.witness->replacement);
  EXPECT_EQ(a.witness->evaluation, b.witness->evaluation);
}

TEST(StabilityExhaustive, GuardRedirectsToRandomized) {
  EXPECT_GT(exhaustive_tuple_count(ConstructionParams::make(3, 1.0, 1.0)), kMaxExhaustiveTuples);
  EXPECT_THROW(certify_stability_exhaustive(ConstructionParams::make(3, 1.0, 1.0)), std::domain_error);
}

TEST(StabilityExhaustive, ConstantRuleIsPerfectlyStable) {
  const auto p = ConstructionParams::make(2, 1.0, 1.0);
  const auto c = certify_stability_exhaustive(ConstantRule{p}, p);
  EXPECT_EQ(c.supremum_found, 0.0);
}

TEST(StabilityRandom, AttainsFourGAtLargeN) {
  const auto p = ConstructionParams::make(100, 4.0, 4.0);  // g = 1
  RandomStream rng(17);
  const auto c = certify_stability_random(p, 100'000, rng);
  EXPECT_EQ(c.mode, CertificateMode::randomized);
  EXPECT_NEAR(c.supremum_found, 4.0, 1e-12);
  EXPECT_EQ(c.budget_inspected, 100'000u);
}

TEST(StabilityRandom, NeverExceedsExhaustive) {
  for (std::int64_t n : {1, 2}) {
    const auto p = ConstructionParams::make(n, 0.75, 2.0);
    const double exact = certify_stability_exhaustive(p).supremum_found;
    RandomStream rng(static_cast<std::uint64_t>(n));
    const auto c = certify_stability_random(p, 20'000, rng);
    EXPECT_LE(c.supremum_found, exact + 1e-12);
    EXPECT_NEAR(c.supremum_found, exact, 1e-12);
  }
  RandomStream rng(3);
  const auto one = certify_stability_random(ConstructionParams::make(5, 1.0, 1.0), 1, rng);
  EXPECT_GE(one.supremum_found, 0.0);
  EXPECT_THROW(certify_stability_random(ConstructionParams::make(5, 1.0, 1.0), 0, rng), std::domain_error);
}

TEST(StabilityRandom, LossDifferenceDecomposition) {
  // |dl| = sigma_i g |s - s'| at the evaluated coordinate.
  const auto p = ConstructionParams::make(6, 1.0, 2.0);
  RandomStream rng(55);
  for (int rep = 0; rep < 100'000; ++rep) {
    const TrainingSet s = sample_training_set(p, rng);
    // concentrate on a handful of coordinates so votes actually move
    TrainingSet crowded = s;
    for (auto& ex : crowded) ex = LabeledExample::of({p.d() / 2 + (ex.x.index % 3), ex.x.sign});
    const auto pos = 1 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(p.n())));
    const LabeledExample repl = LabeledExample::of({p.d() / 2 + static_cast<std::int64_t>(rng.below(3)),
                                                    rng.coin() ? Sign::plus : Sign::minus});
    const TrainingSet r = replace_one(crowded, pos, repl);
    const Instance z{p.d() / 2 + static_cast<std::int64_t>(rng.below(3)), rng.coin() ? Sign::plus : Sign::minus};
    const Prediction a = predict(crowded, z, p), b = predict(r, z, p);
    const double direct = std::abs(loss(a, z, p) - loss(b, z, p));
    const double decomposed = scale_factor(z.index, p) * p.g() * std::abs(to_int(a.sign_hat) - to_int(b.sign_hat));
    ASSERT_NEAR(direct, decomposed, 1e-12);
    ASSERT_LE(direct, 4.0 * p.g() + 1e-12);
  }
}

TEST(Boundedness, ClosedFormMaximum) {
  const auto a = certify_boundedness(ConstructionParams::make(2, 4.0, 16.0));
  EXPECT_DOUBLE_EQ(a.max_loss, 10.0);
  EXPECT_DOUBLE_EQ(a.bound, 16.0);
  EXPECT_TRUE(a.holds);
  const auto tight = certify_boundedness(ConstructionParams::make(3, 2.0, 2.0));
  EXPECT_DOUBLE_EQ(tight.max_loss, 2.0);
  EXPECT_TRUE(tight.holds);
  EXPECT_DOUBLE_EQ(max_same_coordinate_loss(0.0, 1.0), 2.0);
}
