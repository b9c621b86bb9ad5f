// Hard-case domain, distribution, learning rule and l1 loss, kept in sparse
// form. An instance is one of the 2d points +/- lmax * sigma(i) * e_i; the
// dense d-dimensional vectors are never built.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stability_lab/rng.hpp"

namespace stability_lab {

enum class Sign : std::int8_t { minus = -1, plus = 1 };

constexpr int to_int(Sign s) noexcept { return static_cast<int>(s); }
constexpr Sign flip(Sign s) noexcept { return s == Sign::plus ? Sign::minus : Sign::plus; }

inline Sign sign_from_int(int v) {
  if (v == 1) return Sign::plus;
  if (v == -1) return Sign::minus;
  throw std::domain_error("sign must be +1 or -1, got " + std::to_string(v));
}

/// Theorem-level targets (gamma, L, n) and the quantities derived from them.
/// The construction runs at quarter scale (g = gamma/4, lmax = L/4) so the
/// certified stability and loss bound land exactly on the targets.
class ConstructionParams {
 public:
  static ConstructionParams make(std::int64_t n, double gamma_target, double l_target) {
    if (n < 1) throw std::invalid_argument("n must be >= 1, got " + std::to_string(n));
    if (!(gamma_target > 0.0) || !std::isfinite(gamma_target))
      throw std::invalid_argument("gamma must be a positive finite number");
    if (!std::isfinite(l_target) || !(gamma_target <= l_target))
      throw std::invalid_argument("gamma must satisfy 0 < gamma <= l (got gamma=" +
                                  std::to_string(gamma_target) + ", l=" + std::to_string(l_target) + ")");
    // d = 4n^2 must fit comfortably in int64 and in 2d index arithmetic.
    if (n > 1'000'000'000) throw std::invalid_argument("n too large");
    return ConstructionParams(n, gamma_target, l_target);
  }

  std::int64_t n() const noexcept { return n_; }
  double gamma_target() const noexcept { return gamma_; }
  double l_target() const noexcept { return l_; }
  double g() const noexcept { return gamma_ / 4.0; }
  double lmax() const noexcept { return l_ / 4.0; }
  std::int64_t d() const noexcept { return 4 * n_ * n_; }
  /// Number of points in the support of P, 2d.
  std::int64_t support_size() const noexcept { return 2 * d(); }

 private:
  ConstructionParams(std::int64_t n, double gamma, double l) : n_(n), gamma_(gamma), l_(l) {}

  std::int64_t n_;
  double gamma_;
  double l_;
};

struct Instance {
  std::int64_t index;  // 1-based coordinate
  Sign sign;

  friend bool operator==(const Instance&, const Instance&) = default;
};

/// Labels always equal inputs in this construction; y is kept explicit so
/// generic rules and the replacement operator see the usual (x, y) pair.
struct LabeledExample {
  Instance x;
  Instance y;

  static LabeledExample of(Instance x) { return {x, x}; }
  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

using TrainingSet = std::vector<LabeledExample>;

struct Prediction {
  std::int64_t index;
  Sign sign_hat;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

inline void check_index(std::int64_t index, const ConstructionParams& params) {
  if (index < 1 || index > params.d())
    throw std::domain_error("index " + std::to_string(index) + " outside [1, " +
                            std::to_string(params.d()) + "]");
}

inline Instance make_instance(std::int64_t index, int sign, const ConstructionParams& params) {
  check_index(index, params);
  return {index, sign_from_int(sign)};
}

/// sigma(i): 1 on the first half of the coordinates, 2 on the second half.
inline int scale_factor(std::int64_t index, const ConstructionParams& params) {
  check_index(index, params);
  return index > params.d() / 2 ? 2 : 1;
}

/// Point number k of the support in the fixed enumeration order
/// (index 1 +, index 1 -, index 2 +, ...). k in [0, 2d).
inline Instance instance_at(std::int64_t k, const ConstructionParams& params) {
  if (k < 0 || k >= params.support_size()) throw std::domain_error("support ordinal out of range");
  return {k / 2 + 1, (k % 2 == 0) ? Sign::plus : Sign::minus};
}

/// One draw from the uniform distribution on the 2d support points.
inline Instance sample_instance(const ConstructionParams& params, RandomStream& rng) {
  const auto k = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(params.support_size())));
  return instance_at(k, params);
}

inline TrainingSet sample_training_set(const ConstructionParams& params, RandomStream& rng) {
  TrainingSet train;
  train.reserve(static_cast<std::size_t>(params.n()));
  for (std::int64_t j = 0; j < params.n(); ++j) train.push_back(LabeledExample::of(sample_instance(params, rng)));
  return train;
}

/// Sign of the index-th coordinate of the sum of the training inputs.
/// A zero sum (absent coordinate or exact cancellation) maps to +1.
inline Sign coordinate_sign(std::span<const LabeledExample> train, std::int64_t index) {
  std::int64_t count = 0;
  for (const auto& ex : train)
    if (ex.x.index == index) count += to_int(ex.x.sign);
  return count < 0 ? Sign::minus : Sign::plus;
}

/// The majority-vote rule: output sign_hat * g * sigma(i) * e_i at the
/// queried coordinate. Only the index of x matters.
inline Prediction predict(std::span<const LabeledExample> train, const Instance& x,
                          const ConstructionParams& params) {
  check_index(x.index, params);
  return {x.index, coordinate_sign(train, x.index)};
}

/// l1 distance between the implied prediction vector and the implied label.
inline double loss(const Prediction& pred, const Instance& y, const ConstructionParams& params) {
  const double g = params.g();
  const double lmax = params.lmax();
  const int sp = scale_factor(pred.index, params);
  const int sy = scale_factor(y.index, params);
  if (pred.index != y.index) return g * sp + lmax * sy;
  return sp * std::abs(to_int(pred.sign_hat) * g - to_int(y.sign) * lmax);
}

/// Largest same-coordinate loss: sigma = 2 with opposite signs.
constexpr double max_same_coordinate_loss(double g, double lmax) noexcept { return 2.0 * (lmax + g); }

}  // namespace stability_lab
