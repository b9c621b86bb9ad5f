// Population risk, empirical risk and generalization gap of the
// majority-vote rule.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stability_lab/construction.hpp"

namespace stability_lab {

/// Support sizes above this are refused by the enumeration oracle.
inline constexpr std::int64_t kMaxEnumerableSupport = 10'000'000;

class EnumerationLimitError : public std::length_error {
 public:
  using std::length_error::length_error;
};

struct RiskBreakdown {
  double population;
  double empirical;
  double gap;
};

/// The population risk does not depend on the training set: on each
/// coordinate the two +/- losses sum to 2 * lmax * sigma(i), and sigma
/// averages to 3/2.
inline double population_risk_closed(const ConstructionParams& params) { return 1.5 * params.lmax(); }

/// Exact expectation over all 2d support points, evaluating the rule
/// point by point. Cross-check for the closed form at small d.
inline double population_risk_bruteforce(std::span<const LabeledExample> train, const ConstructionParams& params) {
  const std::int64_t support = params.support_size();
  if (support > kMaxEnumerableSupport)
    throw EnumerationLimitError("support of " + std::to_string(support) +
                                " points is too large to enumerate; use population_risk_closed");
  double total = 0.0;
  for (std::int64_t k = 0; k < support; ++k) {
    const Instance x = instance_at(k, params);
    total += loss(predict(train, x, params), x, params);
  }
  return total / static_cast<double>(support);
}

/// Training losses grouped by outcome. Every same-coordinate loss is
/// sigma * (lmax - g) when the prediction sign matches the label and
/// sigma * (lmax + g) otherwise, so integer sigma totals determine the
/// empirical risk.
struct LossTally {
  std::int64_t matched_sigma = 0;
  std::int64_t mismatched_sigma = 0;
  bool distinct_indices = true;
};

inline LossTally tally_training_losses(std::span<const LabeledExample> train, const ConstructionParams& params) {
  std::vector<std::pair<std::int64_t, int>> entries;
  entries.reserve(train.size());
  for (const auto& ex : train) {
    check_index(ex.x.index, params);
    entries.emplace_back(ex.x.index, to_int(ex.x.sign));
  }
  std::sort(entries.begin(), entries.end());

  LossTally tally;
  for (std::size_t lo = 0; lo < entries.size();) {
    std::size_t hi = lo;
    std::int64_t count = 0;
    while (hi < entries.size() && entries[hi].first == entries[lo].first) count += entries[hi++].second;
    if (hi - lo > 1) tally.distinct_indices = false;
    const int vote = count < 0 ? -1 : 1;
    const std::int64_t sigma = scale_factor(entries[lo].first, params);
    for (std::size_t j = lo; j < hi; ++j) (entries[j].second == vote ? tally.matched_sigma : tally.mismatched_sigma) += sigma;
    lo = hi;
  }
  return tally;
}

inline double empirical_risk_from_tally(const LossTally& tally, std::int64_t n, const ConstructionParams& params) {
  const double below = params.lmax() - params.g();
  const double above = params.lmax() + params.g();
  return (below * static_cast<double>(tally.matched_sigma) + above * static_cast<double>(tally.mismatched_sigma)) /
         static_cast<double>(n);
}

/// (1/n) * sum of training losses. Evaluated through the integer tally, so
/// with distinct indices the result is bit-identical to
/// empirical_risk_distinct_closed.
inline double empirical_risk(std::span<const LabeledExample> train, const ConstructionParams& params) {
  if (train.empty()) throw std::invalid_argument("empirical risk of an empty training set");
  return empirical_risk_from_tally(tally_training_losses(train, params), static_cast<std::int64_t>(train.size()),
                                   params);
}

/// ((lmax - g) / n) * sum of sigma over the training inputs; the empirical
/// risk whenever all training indices are distinct.
inline double empirical_risk_distinct_closed(std::int64_t sigma_sum, std::int64_t n, const ConstructionParams& params) {
  return ((params.lmax() - params.g()) * static_cast<double>(sigma_sum)) / static_cast<double>(n);
}

inline RiskBreakdown generalization_gap(std::span<const LabeledExample> train, const ConstructionParams& params) {
  const double pop = population_risk_closed(params);
  const double emp = empirical_risk(train, params);
  return {pop, emp, pop - emp};
}

/// gamma/4 + L/(32 sqrt(n)) in target units; equals g + lmax/(8 sqrt(n)).
inline double gap_threshold(const ConstructionParams& params) {
  return params.gamma_target() / 4.0 + params.l_target() / (32.0 * std::sqrt(static_cast<double>(params.n())));
}

}  // namespace stability_lab
