#pragma once

// Multiplicative congruential generator modulo 10^6 used to build the
// benchmark instances:
//
//   r[k+1] = theta * r[k] mod 1'000'000
//   x[k]   = a + (b - a) * r[k] / 1'000'000
//
// The state is a plain value. Advancing returns a new state; there is no
// hidden mutable generator.

#include <cstdint>
#include <string>

#include "chainloc/errors.hpp"

namespace chainloc {

class LcgState {
 public:
  static constexpr std::int64_t kModulus = 1'000'000;
  static constexpr std::int64_t kDefaultMultiplier = 314'227;

  // Throws InvalidArgument unless 1 <= r <= 999'999, r % 5 != 0, and theta is
  // odd, positive and not divisible by 5.
  explicit LcgState(std::int64_t r, std::int64_t theta = kDefaultMultiplier) : r_(r), theta_(theta) {
    if (r < 1 || r >= kModulus) {
      throw InvalidArgument("LCG seed " + std::to_string(r) + " outside [1, 999999]");
    }
    if (r % 5 == 0) {
      throw InvalidArgument("LCG seed " + std::to_string(r) + " is divisible by 5");
    }
    if (theta < 1 || theta % 2 == 0 || theta % 5 == 0) {
      throw InvalidArgument("LCG multiplier " + std::to_string(theta) +
                            " must be positive, odd and not divisible by 5");
    }
  }

  std::int64_t r() const noexcept { return r_; }
  std::int64_t theta() const noexcept { return theta_; }

  friend bool operator==(const LcgState&, const LcgState&) = default;

 private:
  std::int64_t r_;
  std::int64_t theta_;
};

// theta * r < 2^63 for any theta below ~9.2e12, far beyond any sane multiplier.
inline LcgState lcg_next(const LcgState& state) {
  const std::int64_t product = state.theta() * state.r();
  return LcgState(product % LcgState::kModulus, state.theta());
}

struct UniformDraw {
  double value;
  LcgState next;
};

// Maps the current r into (a, b), then advances.
inline UniformDraw lcg_uniform(const LcgState& state, double a, double b) {
  if (!(a < b)) {
    throw InvalidArgument("lcg_uniform: invalid range [" + std::to_string(a) + ", " +
                          std::to_string(b) + "]");
  }
  const double value =
      a + (b - a) * static_cast<double>(state.r()) / static_cast<double>(LcgState::kModulus);
  return {value, lcg_next(state)};
}

// Local convenience cursor over a stream. Owned by one caller; not shared.
class LcgStream {
 public:
  explicit LcgStream(LcgState state) : state_(state) {}

  double uniform(double a, double b) {
    const UniformDraw draw = lcg_uniform(state_, a, b);
    state_ = draw.next;
    return draw.value;
  }

  const LcgState& state() const noexcept { return state_; }

 private:
  LcgState state_;
};

}  // namespace chainloc
