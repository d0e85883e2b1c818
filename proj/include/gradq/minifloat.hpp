#pragma once

// Round-to-nearest-even into small IEEE-style binary formats. Both formats
// reserve the all-ones exponent (no finite values there) and have gradual
// underflow. Out-of-range magnitudes saturate to the largest finite value.
//   binary16: 1 sign, 5 exponent, 10 mantissa bits, max 65504
//   fp8:      1 sign, 4 exponent,  3 mantissa bits, max 240

#include <cmath>
#include <cstdint>

#include "gradq/error.hpp"

namespace gradq::minifloat {

struct Format {
  int exponent_bits;
  int mantissa_bits;

  int bias() const { return (1 << (exponent_bits - 1)) - 1; }
  int min_normal_exponent() const { return 1 - bias(); }
  int max_exponent() const { return (1 << exponent_bits) - 2 - bias(); }
  int width() const { return 1 + exponent_bits + mantissa_bits; }
  double max_finite() const {
    return std::ldexp(2.0 - std::ldexp(1.0, -mantissa_bits), max_exponent());
  }
};

inline constexpr Format kBinary16{5, 10};
inline constexpr Format kFp8{4, 3};

inline Format format_for_width(int p) {
  if (p == 16) return kBinary16;
  if (p == 8) return kFp8;
  throw InvalidArgument("float width must be 16 or 8");
}

/// Bit pattern of the nearest representable value (ties to even).
inline std::uint32_t encode(double x, const Format& f) {
  if (!std::isfinite(x)) throw InvalidArgument("invalid input");
  const std::uint32_t sign = std::signbit(x) ? 1u : 0u;
  const double a = std::fabs(x);
  const std::uint32_t sign_bit = sign << (f.exponent_bits + f.mantissa_bits);
  if (a == 0.0) return sign_bit;

  int e = std::ilogb(a);
  if (e < f.min_normal_exponent()) e = f.min_normal_exponent();
  // Units of the spacing at exponent e; the scaling by a power of two is exact.
  double units = std::nearbyint(std::ldexp(a, f.mantissa_bits - e));
  const double implicit = std::ldexp(1.0, f.mantissa_bits);
  if (units >= 2.0 * implicit) {  // rounded up into the next binade
    units /= 2.0;
    ++e;
  }
  if (e > f.max_exponent()) {
    e = f.max_exponent();
    units = 2.0 * implicit - 1.0;
  }
  const auto u = static_cast<std::uint32_t>(units);
  std::uint32_t biased = 0;
  std::uint32_t mantissa = 0;
  if (u < static_cast<std::uint32_t>(implicit)) {  // subnormal or zero
    biased = 0;
    mantissa = u;
  } else {
    biased = static_cast<std::uint32_t>(e + f.bias());
    mantissa = u - static_cast<std::uint32_t>(implicit);
  }
  return sign_bit | (biased << f.mantissa_bits) | mantissa;
}

inline double decode(std::uint32_t bits, const Format& f) {
  const std::uint32_t mask = (1u << f.mantissa_bits) - 1u;
  const std::uint32_t mantissa = bits & mask;
  const std::uint32_t biased = (bits >> f.mantissa_bits) & ((1u << f.exponent_bits) - 1u);
  const bool negative = (bits >> (f.exponent_bits + f.mantissa_bits)) & 1u;
  if (biased == (1u << f.exponent_bits) - 1u) throw FormatError("corrupt blob");
  double v = 0.0;
  if (biased == 0) {
    v = std::ldexp(static_cast<double>(mantissa), f.min_normal_exponent() - f.mantissa_bits);
  } else {
    v = std::ldexp(static_cast<double>(mantissa | (mask + 1u)),
                   static_cast<int>(biased) - f.bias() - f.mantissa_bits);
  }
  return negative ? -v : v;
}

inline double round_to(double x, const Format& f) { return decode(encode(x, f), f); }

/// Nearest value representable with `p` in {16, 8} bits.
inline double float_truncate(double x, int p) { return round_to(x, format_for_width(p)); }

}  // namespace gradq::minifloat
