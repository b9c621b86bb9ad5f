// Paley-Zygmund and the Rademacher-sum tail bound P(S > sqrt(n)/2) >= 3/32,
// checked exactly and by sampling.
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "stability_lab/rng.hpp"

namespace stability_lab {

inline constexpr double kRademacherTailBound = 3.0 / 32.0;
inline constexpr std::int64_t kRademacherExactRationalMaxN = 64;
inline constexpr std::int64_t kRademacherExactMaxN = 1'000'000;

/// Finitely supported non-negative random variable.
class DiscreteDistribution {
 public:
  struct Atom {
    double value;
    double probability;
  };

  explicit DiscreteDistribution(std::vector<Atom> support) : support_(std::move(support)) {
    if (support_.empty()) throw std::domain_error("distribution needs at least one atom");
    double total = 0.0;
    for (const auto& a : support_) {
      if (!(a.value >= 0.0) || !std::isfinite(a.value)) throw std::domain_error("values must be finite and >= 0");
      if (!(a.probability >= 0.0)) throw std::domain_error("probabilities must be >= 0");
      total += a.probability;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw std::domain_error("probabilities sum to " + std::to_string(total) + ", expected 1");
  }

  const std::vector<Atom>& support() const noexcept { return support_; }

  double mean() const {
    double m = 0.0;
    for (const auto& a : support_) m += a.probability * a.value;
    return m;
  }

  double second_moment() const {
    double m = 0.0;
    for (const auto& a : support_) m += a.probability * a.value * a.value;
    return m;
  }

  /// P(Z > threshold), strict.
  double tail_above(double threshold) const {
    double p = 0.0;
    for (const auto& a : support_)
      if (a.value > threshold) p += a.probability;
    return p;
  }

 private:
  std::vector<Atom> support_;
};

/// (1 - theta)^2 E[Z]^2 / E[Z^2].
inline double paley_zygmund_bound(double mean, double second_moment, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw std::domain_error("theta must lie in [0, 1]");
  if (!(second_moment > 0.0)) throw std::domain_error("second moment must be positive");
  if (!(mean >= 0.0)) throw std::domain_error("mean must be non-negative");
  const double slack = 1.0 - theta;
  return slack * slack * mean * mean / second_moment;
}

struct PaleyZygmundCheck {
  double mean;
  double second_moment;
  double tail;   // P(Z > theta * E[Z])
  double bound;  // (1 - theta)^2 E[Z]^2 / E[Z^2]
  bool holds;
};

/// Exact tail against the bound. Z = 0 almost surely makes the bound 0/0;
/// it is reported as 0, which the tail trivially meets.
inline PaleyZygmundCheck verify_paley_zygmund(const DiscreteDistribution& dist, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw std::domain_error("theta must lie in [0, 1]");
  PaleyZygmundCheck check{};
  check.mean = dist.mean();
  check.second_moment = dist.second_moment();
  check.tail = dist.tail_above(theta * check.mean);
  check.bound = check.second_moment > 0.0 ? paley_zygmund_bound(check.mean, check.second_moment, theta) : 0.0;
  // Equality cases (point masses, theta = 0 on two-point laws) differ only by rounding.
  check.holds = check.tail + 1e-12 >= check.bound;
  return check;
}

/// s > sqrt(n)/2 decided in integers: s > 0 and 4 s^2 > n.
constexpr bool exceeds_half_sqrt(std::int64_t s, std::int64_t n) noexcept { return s > 0 && 4 * s * s > n; }

/// Smallest count k of +1 signs among n with 2k - n > sqrt(n)/2.
inline std::int64_t rademacher_tail_min_plus_count(std::int64_t n) {
  std::int64_t k = n / 2;
  while (!exceeds_half_sqrt(2 * k - n, n)) ++k;
  return k;
}

struct TailReport {
  std::int64_t n;
  double exact_tail;
  double bound = kRademacherTailBound;
  bool satisfied;
};

/// P(S > sqrt(n)/2) as an exact fraction. n <= 64.
inline boost::multiprecision::cpp_rational rademacher_tail_rational(std::int64_t n) {
  using boost::multiprecision::cpp_int;
  if (n < 1 || n > kRademacherExactRationalMaxN)
    throw std::domain_error("exact rational tail requires 1 <= n <= 64");
  cpp_int binom = 1;  // C(n, k) for the running k
  cpp_int numerator = 0;
  const std::int64_t kmin = rademacher_tail_min_plus_count(n);
  for (std::int64_t k = 0; k <= n; ++k) {
    if (k >= kmin) numerator += binom;
    binom = binom * (n - k) / (k + 1);
  }
  return boost::multiprecision::cpp_rational(numerator, cpp_int(1) << static_cast<unsigned>(n));
}

namespace detail {

/// Sum of C(n, k) / 2^n for k >= kmin. Starts from the log of the first
/// term and walks upward by the ratio (n - k) / (k + 1) in extended
/// precision; relative error stays near n * epsilon(long double).
inline double binomial_upper_tail_half(std::int64_t n, std::int64_t kmin) {
  if (kmin > n) return 0.0;
  const long double ln2 = 0.693147180559945309417232121458176568L;
  long double log_first = std::lgamma(static_cast<long double>(n) + 1) -
                          std::lgamma(static_cast<long double>(kmin) + 1) -
                          std::lgamma(static_cast<long double>(n - kmin) + 1) - static_cast<long double>(n) * ln2;
  long double term = std::exp(log_first);
  long double sum = 0.0L;
  for (std::int64_t k = kmin; k <= n; ++k) {
    sum += term;
    term *= static_cast<long double>(n - k) / static_cast<long double>(k + 1);
    if (term < sum * 1e-22L) break;
  }
  return static_cast<double>(sum);
}

}  // namespace detail

/// Exact P(sum of n Rademacher signs > sqrt(n)/2). Exact rationals up to
/// n = 64, extended-precision binomial summation (relative error below
/// 1e-12) above.
inline TailReport rademacher_tail_exact(std::int64_t n) {
  if (n < 1) throw std::domain_error("n must be >= 1");
  if (n > kRademacherExactMaxN)
    throw std::domain_error("n = " + std::to_string(n) +
                            " exceeds the exact-summation limit; use rademacher_tail_montecarlo");
  TailReport report{};
  report.n = n;
  report.exact_tail = n <= kRademacherExactRationalMaxN
                          ? rademacher_tail_rational(n).convert_to<double>()
                          : detail::binomial_upper_tail_half(n, rademacher_tail_min_plus_count(n));
  report.satisfied = report.exact_tail >= report.bound;
  return report;
}

inline constexpr std::int64_t kRademacherEnumerationMaxN = 24;

/// P(S > sqrt(n)/2) by visiting all 2^n sign patterns. Independent of the
/// binomial route; n <= 24.
inline double rademacher_tail_by_enumeration(std::int64_t n) {
  if (n < 1 || n > kRademacherEnumerationMaxN) throw std::domain_error("enumeration requires 1 <= n <= 24");
  const std::uint64_t patterns = std::uint64_t{1} << n;
  std::uint64_t hits = 0;
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    const std::int64_t s = 2 * static_cast<std::int64_t>(std::popcount(mask)) - n;
    hits += exceeds_half_sqrt(s, n) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(patterns);
}

/// Sum of n independent Rademacher signs from one stream, 64 at a time.
inline std::int64_t rademacher_sum(std::int64_t n, RandomStream& rng) {
  std::int64_t plus = 0;
  std::int64_t left = n;
  for (; left >= 64; left -= 64) plus += std::popcount(rng.bits64());
  if (left > 0) plus += std::popcount(rng.bits64() >> (64 - left));
  return 2 * plus - n;
}

struct MonteCarloEstimate {
  std::int64_t hits;
  std::int64_t trials;
  double estimate;
  double standard_error;
};

inline MonteCarloEstimate rademacher_tail_montecarlo(std::int64_t n, std::int64_t trials, RandomStream& rng) {
  if (n < 1) throw std::domain_error("n must be >= 1");
  if (trials < 1000) throw std::domain_error("at least 1000 trials required");
  std::int64_t hits = 0;
  for (std::int64_t t = 0; t < trials; ++t) hits += exceeds_half_sqrt(rademacher_sum(n, rng), n) ? 1 : 0;
  const double p = static_cast<double>(hits) / static_cast<double>(trials);
  return {hits, trials, p, std::sqrt(p * (1.0 - p) / static_cast<double>(trials))};
}

struct MomentEstimate {
  double exact;
  double mean;
  double standard_error;
  double z_score;  // 0 when the sample is constant and matches exactly
};

struct MomentReport {
  std::int64_t n;
  std::int64_t trials;
  MomentEstimate second;  // E[S^2] = n
  MomentEstimate fourth;  // E[S^4] = n + 3n(n-1)
};

namespace detail {

class RunningMoments {
 public:
  void push(double v) {
    ++count_;
    const double delta = v - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (v - mean_);
  }
  double mean() const { return mean_; }
  double standard_error() const {
    if (count_ < 2) return 0.0;
    return std::sqrt(m2_ / static_cast<double>(count_ - 1) / static_cast<double>(count_));
  }

 private:
  std::int64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

inline MomentEstimate finish(const RunningMoments& acc, double exact) {
  const double se = acc.standard_error();
  const double diff = acc.mean() - exact;
  return {exact, acc.mean(), se, se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff))};
}

}  // namespace detail

inline MomentReport rademacher_moment_check(std::int64_t n, std::int64_t trials, RandomStream& rng) {
  if (n < 1) throw std::domain_error("n must be >= 1");
  if (trials < 10'000) throw std::domain_error("at least 10^4 trials required");
  detail::RunningMoments s2;
  detail::RunningMoments s4;
  for (std::int64_t t = 0; t < trials; ++t) {
    const auto s = static_cast<double>(rademacher_sum(n, rng));
    const double sq = s * s;
    s2.push(sq);
    s4.push(sq * sq);
  }
  const auto nd = static_cast<double>(n);
  return {n, trials, detail::finish(s2, nd), detail::finish(s4, nd + 3.0 * nd * (nd - 1.0))};
}

}  // namespace stability_lab
