// Numerical certificates for uniform stability and loss boundedness.
//
// Any type satisfying LearningRule can be certified; the majority-vote rule
// of the construction and a constant rule are provided.
#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stability_lab/construction.hpp"
#include "stability_lab/parallel.hpp"
#include "stability_lab/rng.hpp"

namespace stability_lab {

/// A deterministic rule mapping (training set, input) to a prediction on
/// the construction's domain, with its loss against a label.
template <class R>
concept LearningRule = requires(const R& rule, std::span<const LabeledExample> train, const Instance& x,
                                const Prediction& pred) {
  { rule.predict(train, x) } -> std::same_as<Prediction>;
  { rule.loss(pred, x) } -> std::convertible_to<double>;
};

struct MajorityVoteRule {
  ConstructionParams params;

  Prediction predict(std::span<const LabeledExample> train, const Instance& x) const {
    return stability_lab::predict(train, x, params);
  }
  double loss(const Prediction& pred, const Instance& y) const { return stability_lab::loss(pred, y, params); }
};

/// Ignores the training set and always votes +1.
struct ConstantRule {
  ConstructionParams params;

  Prediction predict(std::span<const LabeledExample>, const Instance& x) const {
    check_index(x.index, params);
    return {x.index, Sign::plus};
  }
  double loss(const Prediction& pred, const Instance& y) const { return stability_lab::loss(pred, y, params); }
};

static_assert(LearningRule<MajorityVoteRule>);
static_assert(LearningRule<ConstantRule>);

/// Copy of `train` with the example at 1-based `position` replaced.
inline TrainingSet replace_one(std::span<const LabeledExample> train, std::int64_t position,
                               const LabeledExample& replacement) {
  if (position < 1 || position > static_cast<std::int64_t>(train.size()))
    throw std::domain_error("replacement position " + std::to_string(position) + " outside [1, " +
                            std::to_string(train.size()) + "]");
  TrainingSet out(train.begin(), train.end());
  out[static_cast<std::size_t>(position - 1)] = replacement;
  return out;
}

enum class CertificateMode { exhaustive, randomized };

inline const char* to_string(CertificateMode m) { return m == CertificateMode::exhaustive ? "exhaustive" : "randomized"; }

/// The (S, i, z', z) tuple attaining the reported supremum.
struct StabilityWitness {
  TrainingSet train;
  std::int64_t position = 0;  // 1-based
  LabeledExample replacement{};
  LabeledExample evaluation{};
  double loss_original = 0.0;
  double loss_replaced = 0.0;
};

struct StabilityCertificate {
  double supremum_found = 0.0;
  CertificateMode mode = CertificateMode::exhaustive;
  std::uint64_t budget_inspected = 0;
  std::optional<StabilityWitness> witness;
};

/// Tuples inspected by the exhaustive search are capped at this count.
inline constexpr double kMaxExhaustiveTuples = 1e9;

/// (2d)^n * n * (2d)^2, as a double to survive overflow.
inline double exhaustive_tuple_count(const ConstructionParams& params) {
  const auto support = static_cast<double>(params.support_size());
  return std::pow(support, static_cast<double>(params.n())) * static_cast<double>(params.n()) * support * support;
}

/// Supremum of |l(A_S(x), y) - l(A_{S^i}(x), y)| over every S in Z^n
/// (duplicates included), every position i, every replacement z' in Z and
/// every evaluation point z = (x, y) in Z. Work is split by the first
/// element of S; partitions are reduced in order with a strict comparison,
/// so the witness is the first maximizer in enumeration order whatever the
/// worker count.
template <LearningRule Rule>
StabilityCertificate certify_stability_exhaustive(const Rule& rule, const ConstructionParams& params,
                                                  unsigned workers = 0) {
  if (exhaustive_tuple_count(params) > kMaxExhaustiveTuples)
    throw std::domain_error("exhaustive stability search over " + std::to_string(exhaustive_tuple_count(params)) +
                            " tuples exceeds the 1e9 limit; use certify_stability_random");

  const std::int64_t support = params.support_size();
  const std::int64_t n = params.n();
  std::int64_t per_partition = 1;  // training sets sharing a first element
  for (std::int64_t j = 1; j < n; ++j) per_partition *= support;

  struct Partial {
    double best = -1.0;
    std::uint64_t inspected = 0;
    StabilityWitness witness;
  };
  std::vector<Partial> partials(static_cast<std::size_t>(support));

  for_each_partition(support, resolve_worker_count(workers), [&](std::int64_t first) {
    Partial& out = partials[static_cast<std::size_t>(first)];
    std::vector<Instance> points(static_cast<std::size_t>(support));
    for (std::int64_t e = 0; e < support; ++e) points[static_cast<std::size_t>(e)] = instance_at(e, params);

    TrainingSet train(static_cast<std::size_t>(n));
    std::vector<double> base_loss(static_cast<std::size_t>(support));
    for (std::int64_t rest = 0; rest < per_partition; ++rest) {
      train[0] = LabeledExample::of(points[static_cast<std::size_t>(first)]);
      std::int64_t code = rest;
      for (std::int64_t j = n - 1; j >= 1; --j) {
        train[static_cast<std::size_t>(j)] = LabeledExample::of(points[static_cast<std::size_t>(code % support)]);
        code /= support;
      }
      for (std::int64_t e = 0; e < support; ++e) {
        const Instance& z = points[static_cast<std::size_t>(e)];
        base_loss[static_cast<std::size_t>(e)] = rule.loss(rule.predict(train, z), z);
      }
      for (std::int64_t pos = 1; pos <= n; ++pos) {
        for (std::int64_t r = 0; r < support; ++r) {
          const LabeledExample replacement = LabeledExample::of(points[static_cast<std::size_t>(r)]);
          const TrainingSet replaced = replace_one(train, pos, replacement);
          for (std::int64_t e = 0; e < support; ++e) {
            const Instance& z = points[static_cast<std::size_t>(e)];
            const double after = rule.loss(rule.predict(replaced, z), z);
            const double before = base_loss[static_cast<std::size_t>(e)];
            const double delta = std::abs(after - before);
            ++out.inspected;
            if (delta > out.best) {
              out.best = delta;
              out.witness = {train, pos, replacement, LabeledExample::of(z), before, after};
            }
          }
        }
      }
    }
  });

  StabilityCertificate cert;
  cert.mode = CertificateMode::exhaustive;
  cert.supremum_found = -1.0;
  for (auto& p : partials) {
    cert.budget_inspected += p.inspected;
    if (p.best > cert.supremum_found) {
      cert.supremum_found = p.best;
      cert.witness = std::move(p.witness);
    }
  }
  return cert;
}

inline StabilityCertificate certify_stability_exhaustive(const ConstructionParams& params, unsigned workers = 0) {
  return certify_stability_exhaustive(MajorityVoteRule{params}, params, workers);
}

/// Randomized search for large changes in loss. Training sets are drawn
/// from P; replacements favour the informative cases (the removed point
/// with its sign flipped, or an index already present in S) and the
/// evaluation point favours the coordinates touched by the replacement.
/// The result is a lower bound on the true supremum.
template <LearningRule Rule>
StabilityCertificate certify_stability_random(const Rule& rule, const ConstructionParams& params, std::int64_t trials,
                                              RandomStream& rng) {
  if (trials < 1) throw std::domain_error("trials must be >= 1");
  const auto n = static_cast<std::uint64_t>(params.n());
  auto random_sign = [&] { return rng.coin() ? Sign::plus : Sign::minus; };

  StabilityCertificate cert;
  cert.mode = CertificateMode::randomized;
  cert.supremum_found = -1.0;
  for (std::int64_t t = 0; t < trials; ++t) {
    const TrainingSet train = sample_training_set(params, rng);
    const auto slot = rng.below(n);
    const Instance removed = train[slot].x;

    Instance added{};
    switch (rng.below(3)) {
      case 0: added = {removed.index, flip(removed.sign)}; break;
      case 1: added = {train[rng.below(n)].x.index, random_sign()}; break;
      default: added = sample_instance(params, rng); break;
    }
    Instance probe{};
    switch (rng.below(3)) {
      case 0: probe = {removed.index, random_sign()}; break;
      case 1: probe = {added.index, random_sign()}; break;
      default: probe = sample_instance(params, rng); break;
    }

    const auto position = static_cast<std::int64_t>(slot) + 1;
    const LabeledExample replacement = LabeledExample::of(added);
    const TrainingSet replaced = replace_one(train, position, replacement);
    const double before = rule.loss(rule.predict(train, probe), probe);
    const double after = rule.loss(rule.predict(replaced, probe), probe);
    const double delta = std::abs(after - before);
    ++cert.budget_inspected;
    if (delta > cert.supremum_found) {
      cert.supremum_found = delta;
      cert.witness = StabilityWitness{train, position, replacement, LabeledExample::of(probe), before, after};
    }
  }
  return cert;
}

inline StabilityCertificate certify_stability_random(const ConstructionParams& params, std::int64_t trials,
                                                     RandomStream& rng) {
  return certify_stability_random(MajorityVoteRule{params}, params, trials, rng);
}

struct BoundednessCertificate {
  double max_loss;  // over same-coordinate (prediction, label) pairs
  double bound;     // L
  bool holds;
};

/// Maximum same-coordinate loss, found by evaluating the loss on every
/// (sigma, predicted sign, label sign) class, checked against L = 4 lmax.
inline BoundednessCertificate certify_boundedness(const ConstructionParams& params) {
  double worst = 0.0;
  for (const std::int64_t index : {std::int64_t{1}, params.d()})
    for (const Sign predicted : {Sign::plus, Sign::minus})
      for (const Sign label : {Sign::plus, Sign::minus})
        worst = std::max(worst, loss(Prediction{index, predicted}, Instance{index, label}, params));
  return {worst, params.l_target(), worst <= params.l_target() + 1e-12};
}

}  // namespace stability_lab
