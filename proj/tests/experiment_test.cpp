#include <gtest/gtest.h>

#include <cmath>

#include "stability_lab/experiment.hpp"

using namespace stability_lab;

namespace {

TrainingSet set_of(std::initializer_list<std::pair<std::int64_t, int>> pts, const ConstructionParams& p) {
  TrainingSet s;
  for (auto [i, sg] : pts) s.push_back(LabeledExample::of(make_instance(i, sg, p)));
  return s;
}

}  // namespace

TEST(DetectE1, Examples) {
  const auto p = ConstructionParams::make(2, 4.0, 16.0);
  EXPECT_TRUE(detect_e1(set_of({{3, +1}, {10, -1}}, p)));
  EXPECT_FALSE(detect_e1(set_of({{3, +1}, {3, -1}}, p)));
  EXPECT_FALSE(detect_e1(set_of({{3, +1}, {3, +1}}, p)));
  const auto q = ConstructionParams::make(1, 1.0, 1.0);
  for (std::int64_t i = 1; i <= q.d(); ++i) EXPECT_TRUE(detect_e1(set_of({{i, -1}}, q)));
}

TEST(DetectE2, Examples) {
  const auto p2 = ConstructionParams::make(2, 1.0, 1.0);  // d = 16
  EXPECT_TRUE(detect_e2(set_of({{1, +1}, {2, -1}}, p2), p2));
  EXPECT_FALSE(detect_e2(set_of({{1, +1}, {9, -1}}, p2), p2));
  EXPECT_FALSE(detect_e2(set_of({{10, +1}, {9, -1}}, p2), p2));
  const auto p4 = ConstructionParams::make(4, 1.0, 1.0);  // d = 64
  EXPECT_TRUE(detect_e2(set_of({{1, +1}, {2, +1}, {3, -1}, {40, +1}}, p4), p4));
  EXPECT_FALSE(detect_e2(set_of({{1, +1}, {2, +1}, {40, -1}, {41, +1}}, p4), p4));
  // margin exactly sqrt(n)/2 is not enough: n = 16, c1 - c2 = 2
  const auto p16 = ConstructionParams::make(16, 1.0, 1.0);
  TrainingSet s;
  for (int k = 0; k < 9; ++k) s.push_back(LabeledExample::of({1 + k, Sign::plus}));
  for (int k = 0; k < 7; ++k) s.push_back(LabeledExample::of({p16.d() - k, Sign::plus}));
  EXPECT_FALSE(detect_e2(s, p16));
  s[9] = LabeledExample::of({20, Sign::plus});  // c1 - c2 = 4
  EXPECT_TRUE(detect_e2(s, p16));
}

TEST(RunTrial, DeterministicAndConsistent) {
  const auto p = ConstructionParams::make(2, 4.0, 16.0);
  const TrialResult a = run_trial_seeded(p, 12345);
  const TrialResult b = run_trial_seeded(p, 12345);
  EXPECT_EQ(a.gap, b.gap);
  EXPECT_EQ(a.e1, b.e1);
  EXPECT_EQ(a.e2, b.e2);
  EXPECT_EQ(a.sigma_sum, b.sigma_sum);

  RandomStream rng(12345);
  const TrainingSet s = sample_training_set(p, rng);
  EXPECT_EQ(a.e1, detect_e1(s));
  EXPECT_EQ(a.e2, detect_e2(s, p));
  EXPECT_EQ(a.gap, generalization_gap(s, p).gap);
}

TEST(RunTrial, EventsImplyGap) {
  const auto p = ConstructionParams::make(2, 4.0, 16.0);  // g = 1, lmax = 4
  int both = 0;
  for (std::uint64_t seed = 0; seed < 20'000; ++seed) {
    const TrialResult r = run_trial_seeded(p, seed);
    if (r.e1 && r.e2) {
      ++both;
      EXPECT_GE(r.gap, 1.0 + 4.0 / (8.0 * std::sqrt(2.0)) - 1e-12);
      EXPECT_TRUE(r.gap_event);
    }
    if (r.e1) EXPECT_EQ(r.empirical, empirical_risk_distinct_closed(r.sigma_sum, p.n(), p));
  }
  EXPECT_GT(both, 1000);
}

TEST(RunTrial, MeanSigmaIsThreeHalves) {
  const auto p = ConstructionParams::make(8, 0.5, 1.0);
  double sum = 0.0, sum_sq = 0.0;
  const int trials = 100'000;
  RandomStream rng(4);
  for (int t = 0; t < trials; ++t) {
    const double v = static_cast<double>(run_trial(p, rng).sigma_sum) / 8.0;
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / trials;
  const double se = std::sqrt((sum_sq / trials - mean * mean) / trials);
  EXPECT_NEAR(mean, 1.5, 5.0 * se);
}

TEST(EstimateProbabilities, ReportRelations) {
  const auto p = ConstructionParams::make(16, 0.25, 1.0);
  const ExperimentReport r = estimate_probabilities(p, 20'000, 7);
  EXPECT_EQ(r.counts.trials, 20'000);
  EXPECT_LE(r.e1_and_e2.freq, std::min(r.e1.freq, r.e2.freq));
  EXPECT_GE(r.gap_event.freq, r.e1_and_e2.freq);
  EXPECT_LE(r.gap_event.ci_lo, r.gap_event.freq);
  EXPECT_GE(r.gap_event.ci_hi, r.gap_event.freq);
  EXPECT_TRUE(r.gap_event.at_least(kGapProbabilityFloor));
  EXPECT_TRUE(r.e2.at_least(3.0 / 32.0));
  EXPECT_TRUE(r.e1_given_e2.at_least(0.5));
  EXPECT_NEAR(r.e1.freq, e1_probability_exact(p), 5.0 * r.e1.std_error);
  EXPECT_DOUBLE_EQ(r.threshold, gap_threshold(p));
  EXPECT_THROW(estimate_probabilities(p, 999, 7), std::invalid_argument);
}

TEST(EstimateProbabilities, WorkerCountInvariant) {
  const auto p = ConstructionParams::make(16, 0.25, 1.0);
  const ExperimentReport one = estimate_probabilities(p, 10'000, 99, 1);
  const ExperimentReport many = estimate_probabilities(p, 10'000, 99, 5);
  EXPECT_EQ(one.counts, many.counts);
  EXPECT_EQ(one.mean_gap, many.mean_gap);
}

TEST(EstimateProbabilities, MeanGapIncreasesWithGamma) {
  double previous = -INFINITY;
  for (double gamma : {0.1, 0.4, 0.9}) {
    const ExperimentReport r = estimate_probabilities(ConstructionParams::make(16, gamma, 1.0), 20'000, 3);
    EXPECT_GT(r.mean_gap, previous);
    previous = r.mean_gap;
  }
}

TEST(BirthdayProduct, FrozenValues) {
  EXPECT_NEAR(e1_probability_exact(ConstructionParams::make(16, 1, 1)), 0.8888886633560478, 1e-14);
  EXPECT_NEAR(e1_probability_exact(ConstructionParams::make(64, 1, 1)), 0.8840813909780338, 1e-14);
  EXPECT_DOUBLE_EQ(e1_probability_exact(ConstructionParams::make(1, 1, 1)), 1.0);
  for (std::int64_t n : {1, 2, 16, 64, 256}) {
    const double lower = std::pow(1.0 - 1.0 / (2.0 * n), static_cast<double>(n));
    EXPECT_GE(e1_probability_exact(ConstructionParams::make(n, 1, 1)), lower);
    EXPECT_GE(lower, 0.5);
  }
}

TEST(UpperBoundReference, Examples) {
  const auto at_one = upper_bound_reference({1, 0.0, 1.0, std::exp(-1.0)});
  EXPECT_NEAR(at_one.sharpened, 1.0, 1e-15);
  EXPECT_NEAR(at_one.improved, 1.0, 1e-15);
  EXPECT_NEAR(at_one.original, 1.0, 1e-15);

  const auto no_gamma = upper_bound_reference({50, 0.0, 3.0, 0.2});
  const double sample_term = 3.0 / std::sqrt(50.0) * std::sqrt(std::log(5.0));
  EXPECT_NEAR(no_gamma.original, sample_term, 1e-15);
  EXPECT_NEAR(no_gamma.improved, sample_term, 1e-15);
  EXPECT_NEAR(no_gamma.sharpened, sample_term, 1e-15);

  const auto r = upper_bound_reference({100, 0.1, 1.0, 0.01});
  EXPECT_NEAR(r.original, 2.3605626289182817, 1e-12);
  EXPECT_NEAR(r.improved, 4.456115091011654, 1e-12);
  EXPECT_NEAR(r.sharpened, 2.335355846820294, 1e-12);

  EXPECT_THROW(upper_bound_reference({10, 0.1, 1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(upper_bound_reference({10, 0.1, 1.0, 0.0}), std::invalid_argument);
}

TEST(DeriveSeed, DistinctPerTrial) {
  EXPECT_NE(trial_seed(42, 0), trial_seed(42, 1));
  EXPECT_NE(trial_seed(42, 0), trial_seed(43, 0));
  EXPECT_EQ(trial_seed(42, 17), trial_seed(42, 17));
}
