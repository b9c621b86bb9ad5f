// Seeded Monte Carlo over training sets drawn from the hard distribution:
// event detection, per-trial invariant checks and aggregate frequencies.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stability_lab/construction.hpp"
#include "stability_lab/parallel.hpp"
#include "stability_lab/risk.hpp"
#include "stability_lab/rng.hpp"

namespace stability_lab {

inline constexpr double kGapProbabilityFloor = 3.0 / 64.0;
inline constexpr double kGapEventTolerance = 1e-12;
/// Trials per aggregation block. Fixed, so the floating-point reduction of
/// mean_gap does not depend on the worker count.
inline constexpr std::int64_t kTrialBlock = 4096;

/// A per-trial guarantee failed. Carries the seed that reproduces it.
class InvariantViolation : public std::logic_error {
 public:
  InvariantViolation(const std::string& what, std::uint64_t seed)
      : std::logic_error(what + " (trial seed " + std::to_string(seed) + ")"), seed_(seed) {}
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
};

/// All training inputs lie on pairwise distinct axes. Opposite signs on the
/// same axis are colinear, not orthogonal.
inline bool detect_e1(std::span<const LabeledExample> train) {
  std::vector<std::int64_t> idx;
  idx.reserve(train.size());
  for (const auto& ex : train) idx.push_back(ex.x.index);
  std::sort(idx.begin(), idx.end());
  return std::adjacent_find(idx.begin(), idx.end()) == idx.end();
}

/// Short-scale inputs outnumber long-scale ones by more than sqrt(n)/2,
/// decided in integers.
inline bool detect_e2(std::span<const LabeledExample> train, const ConstructionParams& params) {
  std::int64_t short_count = 0;
  std::int64_t long_count = 0;
  for (const auto& ex : train) (scale_factor(ex.x.index, params) == 1 ? short_count : long_count) += 1;
  const std::int64_t margin = short_count - long_count;
  const auto n = static_cast<std::int64_t>(train.size());
  return margin > 0 && 4 * margin * margin > n;
}

struct TrialResult {
  std::uint64_t seed = 0;
  double population = 0.0;
  double empirical = 0.0;
  double gap = 0.0;
  bool e1 = false;
  bool e2 = false;
  bool gap_event = false;
  std::int64_t sigma_sum = 0;
};

/// One draw of S and its generalization gap. Throws InvariantViolation if
/// the distinct-index empirical risk formula or the implication
/// e1 && e2 => gap_event fails.
inline TrialResult run_trial(const ConstructionParams& params, RandomStream& rng) {
  const TrainingSet train = sample_training_set(params, rng);
  const LossTally tally = tally_training_losses(train, params);

  TrialResult r;
  r.seed = rng.seed();
  r.population = population_risk_closed(params);
  r.empirical = empirical_risk_from_tally(tally, params.n(), params);
  r.gap = r.population - r.empirical;
  r.e1 = tally.distinct_indices;
  r.e2 = detect_e2(train, params);
  r.sigma_sum = tally.matched_sigma + tally.mismatched_sigma;
  r.gap_event = r.gap >= gap_threshold(params) - kGapEventTolerance;

  if (r.e1 && r.empirical != empirical_risk_distinct_closed(r.sigma_sum, params.n(), params))
    throw InvariantViolation("empirical risk differs from ((lmax - g)/n) * sigma_sum with distinct indices", r.seed);
  if (r.e1 && r.e2 && !r.gap_event)
    throw InvariantViolation("gap " + std::to_string(r.gap) + " below threshold " +
                                 std::to_string(gap_threshold(params)) + " although e1 and e2 hold",
                             r.seed);
  return r;
}

inline TrialResult run_trial_seeded(const ConstructionParams& params, std::uint64_t seed) {
  RandomStream rng(seed);
  return run_trial(params, rng);
}

/// Seed of trial k under a master seed.
inline std::uint64_t trial_seed(std::uint64_t master_seed, std::int64_t k) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(k));
}

/// Binomial frequency with its standard error and a 95% normal-approximation
/// interval clipped to [0, 1].
struct Proportion {
  std::int64_t successes = 0;
  std::int64_t total = 0;
  double freq = 0.0;
  double std_error = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;

  static Proportion of(std::int64_t successes, std::int64_t total) {
    Proportion p;
    p.successes = successes;
    p.total = total;
    if (total <= 0) return p;
    p.freq = static_cast<double>(successes) / static_cast<double>(total);
    p.std_error = std::sqrt(p.freq * (1.0 - p.freq) / static_cast<double>(total));
    p.ci_lo = std::max(0.0, p.freq - 1.96 * p.std_error);
    p.ci_hi = std::min(1.0, p.freq + 1.96 * p.std_error);
    return p;
  }

  /// freq >= target - sigmas * stderr.
  bool at_least(double target, double sigmas = 5.0) const { return freq >= target - sigmas * std_error; }
};

struct EventCounts {
  std::int64_t trials = 0;
  std::int64_t gap_event = 0;
  std::int64_t e1 = 0;
  std::int64_t e2 = 0;
  std::int64_t e1_and_e2 = 0;

  friend bool operator==(const EventCounts&, const EventCounts&) = default;
};

struct ExperimentReport {
  std::int64_t n = 0;
  double gamma = 0.0;
  double l = 0.0;
  std::uint64_t seed = 0;
  EventCounts counts;
  Proportion gap_event;
  Proportion e1;
  Proportion e2;
  Proportion e1_and_e2;
  Proportion e1_given_e2;
  double mean_gap = 0.0;
  double threshold = 0.0;
  double e1_exact = 0.0;  // birthday product
};

/// P(n uniform draws from d axes are pairwise distinct) = prod_{k<n} (1 - k/d).
inline double e1_probability_exact(const ConstructionParams& params) {
  const auto d = static_cast<double>(params.d());
  double p = 1.0;
  for (std::int64_t k = 0; k < params.n(); ++k) p *= 1.0 - static_cast<double>(k) / d;
  return p;
}

/// Runs `trials` independent trials; trial k uses trial_seed(master_seed, k).
/// Counters are integers and block sums of the gap are reduced in block
/// order, so the report is bit-identical for any worker count.
inline ExperimentReport estimate_probabilities(const ConstructionParams& params, std::int64_t trials,
                                               std::uint64_t master_seed, unsigned workers = 0) {
  if (trials < 1000) throw std::invalid_argument("estimate_probabilities needs at least 1000 trials");

  const std::int64_t blocks = (trials + kTrialBlock - 1) / kTrialBlock;
  struct Block {
    EventCounts counts;
    double gap_sum = 0.0;
  };
  std::vector<Block> partial(static_cast<std::size_t>(blocks));

  for_each_partition(blocks, resolve_worker_count(workers), [&](std::int64_t b) {
    Block& out = partial[static_cast<std::size_t>(b)];
    const std::int64_t end = std::min(trials, (b + 1) * kTrialBlock);
    for (std::int64_t k = b * kTrialBlock; k < end; ++k) {
      const TrialResult r = run_trial_seeded(params, trial_seed(master_seed, k));
      ++out.counts.trials;
      out.counts.gap_event += r.gap_event;
      out.counts.e1 += r.e1;
      out.counts.e2 += r.e2;
      out.counts.e1_and_e2 += (r.e1 && r.e2);
      out.gap_sum += r.gap;
    }
  });

  ExperimentReport rep;
  rep.n = params.n();
  rep.gamma = params.gamma_target();
  rep.l = params.l_target();
  rep.seed = master_seed;
  double gap_sum = 0.0;
  for (const auto& b : partial) {
    rep.counts.trials += b.counts.trials;
    rep.counts.gap_event += b.counts.gap_event;
    rep.counts.e1 += b.counts.e1;
    rep.counts.e2 += b.counts.e2;
    rep.counts.e1_and_e2 += b.counts.e1_and_e2;
    gap_sum += b.gap_sum;
  }
  const auto& c = rep.counts;
  rep.gap_event = Proportion::of(c.gap_event, c.trials);
  rep.e1 = Proportion::of(c.e1, c.trials);
  rep.e2 = Proportion::of(c.e2, c.trials);
  rep.e1_and_e2 = Proportion::of(c.e1_and_e2, c.trials);
  rep.e1_given_e2 = Proportion::of(c.e1_and_e2, c.e2);
  rep.mean_gap = gap_sum / static_cast<double>(c.trials);
  rep.threshold = gap_threshold(params);
  rep.e1_exact = e1_probability_exact(params);
  return rep;
}

struct UpperBoundQuery {
  std::int64_t n;
  double gamma;
  double l;
  double delta;
};

/// Published stability upper bounds on the gap with every hidden constant
/// set to 1. Shape-only overlays: the true constants are unknown.
struct UpperBoundReference {
  double original;   // sqrt(n) g sqrt(log 1/d) + (L/sqrt n) sqrt(log 1/d)
  double improved;   // g log^2 n + g log n log(1/d) + (L/sqrt n) sqrt(log 1/d)
  double sharpened;  // g log n log(1/d) + (L/sqrt n) sqrt(log 1/d)
};

inline UpperBoundReference upper_bound_reference(const UpperBoundQuery& q) {
  if (q.n < 1) throw std::invalid_argument("n must be >= 1");
  if (!(q.delta > 0.0 && q.delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (!(q.gamma >= 0.0) || !(q.l >= 0.0)) throw std::invalid_argument("gamma and l must be non-negative");
  const auto n = static_cast<double>(q.n);
  const double log_inv_delta = std::log(1.0 / q.delta);
  const double log_n = std::log(n);
  const double sample_term = q.l / std::sqrt(n) * std::sqrt(log_inv_delta);
  return {
      std::sqrt(n) * q.gamma * std::sqrt(log_inv_delta) + sample_term,
      q.gamma * log_n * log_n + q.gamma * log_n * log_inv_delta + sample_term,
      q.gamma * log_n * log_inv_delta + sample_term,
  };
}

}  // namespace stability_lab
