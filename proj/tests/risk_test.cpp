#include <gtest/gtest.h>

#include <cmath>

#include "dense_oracle.hpp"
#include "stability_lab/risk.hpp"

using namespace stability_lab;

namespace {

ConstructionParams small() { return ConstructionParams::make(2, 4.0, 16.0); }  // g=1, lmax=4, d=16

TrainingSet set_of(std::initializer_list<std::pair<std::int64_t, int>> pts, const ConstructionParams& p) {
  TrainingSet s;
  for (auto [i, sg] : pts) s.push_back(LabeledExample::of(make_instance(i, sg, p)));
  return s;
}

double dense_population(const TrainingSet& s, const ConstructionParams& p) {
  double acc = 0.0;
  for (std::int64_t k = 0; k < p.support_size(); ++k) acc += dense::loss_at(s, instance_at(k, p), p);
  return acc / static_cast<double>(p.support_size());
}

}  // namespace

TEST(PopulationRisk, ClosedForm) {
  EXPECT_DOUBLE_EQ(population_risk_closed(small()), 6.0);
  EXPECT_DOUBLE_EQ(population_risk_closed(ConstructionParams::make(3, 0.5, 4.0)), 1.5);
}

TEST(PopulationRisk, BruteForceExamples) {
  const auto p = small();
  EXPECT_NEAR(population_risk_bruteforce(set_of({{3, +1}, {10, -1}}, p), p), 6.0, 6.0 * 1e-9);
  const auto q = ConstructionParams::make(1, 2.0, 4.0);  // lmax = 1, d = 4
  EXPECT_NEAR(population_risk_bruteforce(set_of({{1, +1}}, q), q), 1.5, 1.5 * 1e-9);
}

TEST(PopulationRisk, BruteForceAgreesWithDenseOracleAndClosedForm) {
  RandomStream rng(31);
  for (std::int64_t n : {1, 2, 3}) {
    const auto p = ConstructionParams::make(n, 0.7, 1.3);
    for (int rep = 0; rep < 25; ++rep) {
      const TrainingSet s = sample_training_set(p, rng);
      const double brute = population_risk_bruteforce(s, p);
      EXPECT_NEAR(brute, dense_population(s, p), 1e-12);
      EXPECT_NEAR(brute, population_risk_closed(p), 1e-9 * population_risk_closed(p));
      TrainingSet flipped = s;
      for (auto& ex : flipped) ex = LabeledExample::of({ex.x.index, flip(ex.x.sign)});
      EXPECT_DOUBLE_EQ(population_risk_bruteforce(flipped, p), brute);
    }
  }
}

TEST(PopulationRisk, BruteForceGuard) {
  const auto p = ConstructionParams::make(1200, 0.5, 1.0);  // 2d = 11.52e6
  const TrainingSet s(1200, LabeledExample::of({1, Sign::plus}));
  EXPECT_THROW(population_risk_bruteforce(s, p), EnumerationLimitError);
}

TEST(EmpiricalRisk, DistinctIndices) {
  const auto p = small();
  const auto s = set_of({{3, +1}, {10, -1}}, p);
  EXPECT_DOUBLE_EQ(empirical_risk(s, p), 4.5);
  EXPECT_DOUBLE_EQ(dense::empirical(s, p), 4.5);
  EXPECT_EQ(empirical_risk(s, p), empirical_risk_distinct_closed(3, 2, p));
}

TEST(EmpiricalRisk, DuplicateIndexOppositeSigns) {
  // Sum at index 3 cancels, the vote is +1: losses sigma*(lmax-g) = 3 and
  // sigma*(lmax+g) = 5 with sigma = 1.
  const auto p = small();
  const auto s = set_of({{3, +1}, {3, -1}}, p);
  EXPECT_DOUBLE_EQ(dense::empirical(s, p), 4.0);
  EXPECT_DOUBLE_EQ(empirical_risk(s, p), 4.0);
}

TEST(EmpiricalRisk, VanishesWhenGammaEqualsL) {
  const auto p = ConstructionParams::make(2, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(empirical_risk(set_of({{1, +1}, {16, -1}}, p), p), 0.0);
}

TEST(EmpiricalRisk, AgreesWithDenseOracleOnCrowdedSets) {
  const auto p = ConstructionParams::make(5, 0.9, 2.0);
  RandomStream rng(77);
  for (int rep = 0; rep < 300; ++rep) {
    TrainingSet s = sample_training_set(p, rng);
    if (rep % 2 == 0)
      for (auto& ex : s) ex = LabeledExample::of({1 + (ex.x.index % 4) * (p.d() / 4), ex.x.sign});
    EXPECT_NEAR(empirical_risk(s, p), dense::empirical(s, p), 1e-12);
  }
}

TEST(EmpiricalRisk, DistinctClosedFormIsBitExact) {
  const auto p = ConstructionParams::make(64, 0.125, 1.0);
  RandomStream rng(3);
  int checked = 0;
  for (int rep = 0; rep < 500; ++rep) {
    const TrainingSet s = sample_training_set(p, rng);
    const LossTally t = tally_training_losses(s, p);
    if (!t.distinct_indices) continue;
    ++checked;
    EXPECT_EQ(t.mismatched_sigma, 0);
    std::int64_t sigma_sum = 0;
    for (const auto& ex : s) sigma_sum += scale_factor(ex.x.index, p);
    EXPECT_EQ(empirical_risk(s, p), empirical_risk_distinct_closed(sigma_sum, p.n(), p));
  }
  EXPECT_GT(checked, 300);
}

TEST(GeneralizationGap, Example) {
  const auto p = small();
  const RiskBreakdown r = generalization_gap(set_of({{3, +1}, {10, -1}}, p), p);
  EXPECT_DOUBLE_EQ(r.population, 6.0);
  EXPECT_DOUBLE_EQ(r.empirical, 4.5);
  EXPECT_DOUBLE_EQ(r.gap, 1.5);
  EXPECT_EQ(r.gap, r.population - r.empirical);
  EXPECT_NEAR(gap_threshold(p), 1.0 + 4.0 / (8.0 * std::sqrt(2.0)), 1e-15);
  EXPECT_GT(r.gap, gap_threshold(p));
}

TEST(GeneralizationGap, ThresholdInBothUnits) {
  for (auto [n, gamma, l] : {std::tuple{16, 0.25, 1.0}, {3, 2.0, 5.0}, {100, 0.01, 7.0}}) {
    const auto p = ConstructionParams::make(n, gamma, l);
    EXPECT_NEAR(gap_threshold(p), p.g() + p.lmax() / (8.0 * std::sqrt(double(n))), 1e-15);
  }
}

TEST(GeneralizationGap, CanBeNegativeOnLongScaleSamples) {
  // all sigma = 2 with distinct indices: gap = 2g - lmax/2
  const auto p = ConstructionParams::make(2, 0.4, 4.0);  // g = 0.1, lmax = 1
  const RiskBreakdown r = generalization_gap(set_of({{9, +1}, {12, -1}}, p), p);
  EXPECT_NEAR(r.gap, 2 * p.g() - p.lmax() / 2, 1e-15);
  EXPECT_LT(r.gap, 0.0);
}
