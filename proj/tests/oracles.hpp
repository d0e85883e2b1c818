#pragma once

// Independent reference computations used only by tests. Nothing here calls
// the quadrature, Lloyd, ranking or minifloat code paths under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_int.hpp>

namespace oracle {

/// Zero-mean GenNorm with scale alpha and shape beta.
struct Source {
  double alpha;
  double beta;

  static Source standardized(double beta) {
    return {std::sqrt(std::tgamma(1.0 / beta) / std::tgamma(3.0 / beta)), beta};
  }

  /// int_0^x g^n pdf(g) dg for x >= 0 (closed form via the lower incomplete
  /// gamma function).
  double half_moment(double n, double x) const {
    const double s = (n + 1.0) / beta;
    const double scale = std::pow(alpha, n) / (2.0 * std::tgamma(1.0 / beta));
    if (std::isinf(x)) return scale * std::tgamma(s);
    return scale * boost::math::tgamma_lower(s, std::pow(x / alpha, beta));
  }

  /// int_a^b |g|^M g^k pdf(g) dg, any a < b.
  double weighted_moment(double M, int k, double a, double b) const {
    auto signed_part = [&](double lo, double hi) {  // 0 <= lo <= hi
      return half_moment(M + k, hi) - half_moment(M + k, lo);
    };
    double total = 0.0;
    if (b > 0.0) total += signed_part(std::max(a, 0.0), b);
    if (a < 0.0) {
      const double part = signed_part(std::max(-b, 0.0), -a);
      total += (k % 2 == 0) ? part : -part;
    }
    return total;
  }

  /// Expected |g|^M (g - c)^2 over the cells of a scalar codebook.
  double expected_distortion(double M, const std::vector<double>& centroids) const {
    const double inf = std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (std::size_t i = 0; i < centroids.size(); ++i) {
      const double a = i == 0 ? -inf : 0.5 * (centroids[i - 1] + centroids[i]);
      const double b = i + 1 == centroids.size() ? inf : 0.5 * (centroids[i] + centroids[i + 1]);
      const double c = centroids[i];
      total += weighted_moment(M, 2, a, b) - 2.0 * c * weighted_moment(M, 1, a, b) +
               c * c * weighted_moment(M, 0, a, b);
    }
    return total;
  }
};

struct GridOptimum {
  double distortion = std::numeric_limits<double>::infinity();
  std::vector<double> positive_centroids;
};

/// Exhaustive search over symmetric codebooks with positive centroids on the
/// grid {0, step, ..., hi}. Supports 2 and 4 levels.
inline GridOptimum symmetric_grid_search(const Source& src, double M, int rate, double step = 1e-3,
                                         double hi = 4.0) {
  const auto n = static_cast<std::size_t>(std::llround(hi / step));
  // Cumulative weighted moments from 0 on the half-step lattice so that every
  // midpoint of two grid points is a lattice point.
  const std::size_t lattice = 2 * n + 1;
  std::vector<double> F0(lattice), F1(lattice), F2(lattice);
  for (std::size_t i = 0; i < lattice; ++i) {
    const double x = 0.5 * step * static_cast<double>(i);
    F0[i] = src.weighted_moment(M, 0, 0.0, x);
    F1[i] = src.weighted_moment(M, 1, 0.0, x);
    F2[i] = src.weighted_moment(M, 2, 0.0, x);
  }
  const double inf = std::numeric_limits<double>::infinity();
  const double T0 = src.weighted_moment(M, 0, 0.0, inf);
  const double T1 = src.weighted_moment(M, 1, 0.0, inf);
  const double T2 = src.weighted_moment(M, 2, 0.0, inf);
  auto cell = [&](double m0, double m1, double m2, double c) { return m2 - 2.0 * c * m1 + c * c * m0; };

  GridOptimum best;
  if (rate == 1) {
    for (std::size_t i = 0; i <= n; ++i) {
      const double c = step * static_cast<double>(i);
      const double dist = 2.0 * cell(T0, T1, T2, c);
      if (dist < best.distortion) best = {dist, {c}};
    }
  } else if (rate == 2) {
    for (std::size_t i = 0; i <= n; ++i) {
      const double a = step * static_cast<double>(i);
      for (std::size_t j = i + 1; j <= n; ++j) {
        const double b = step * static_cast<double>(j);
        const std::size_t t = i + j;  // midpoint index on the half-step lattice
        const double inner = cell(F0[t], F1[t], F2[t], a);
        const double outer = cell(T0 - F0[t], T1 - F1[t], T2 - F2[t], b);
        const double dist = 2.0 * (inner + outer);
        if (dist < best.distortion) best = {dist, {a, b}};
      }
    }
  }
  return best;
}

/// All K-subsets of {0..d-1} in lexicographic order.
inline std::vector<std::vector<std::uint64_t>> all_subsets(std::uint64_t d, std::uint64_t K) {
  std::vector<std::vector<std::uint64_t>> out;
  std::vector<std::uint64_t> cur(K);
  for (std::uint64_t i = 0; i < K; ++i) cur[i] = i;
  if (K > d) return out;
  while (true) {
    out.push_back(cur);
    if (K == 0) break;
    std::int64_t i = static_cast<std::int64_t>(K) - 1;
    while (i >= 0 && cur[i] == d - K + static_cast<std::uint64_t>(i)) --i;
    if (i < 0) break;
    ++cur[i];
    for (std::uint64_t j = static_cast<std::uint64_t>(i) + 1; j < K; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

/// C(n, k) by the additive Pascal recurrence in arbitrary precision.
inline boost::multiprecision::cpp_int pascal_binomial(unsigned n, unsigned k) {
  std::vector<boost::multiprecision::cpp_int> row(n + 1, 0);
  row[0] = 1;
  for (unsigned i = 1; i <= n; ++i) {
    for (unsigned j = i; j > 0; --j) row[j] += row[j - 1];
  }
  return row[k];
}

/// log2 of a big integer via its top 64 bits.
inline double log2_big(const boost::multiprecision::cpp_int& v) {
  const auto msb = static_cast<long>(boost::multiprecision::msb(v));
  if (msb < 63) return std::log2(static_cast<double>(v.convert_to<std::uint64_t>()));
  const boost::multiprecision::cpp_int top = v >> (msb - 62);
  return std::log2(static_cast<double>(top.convert_to<std::uint64_t>())) + static_cast<double>(msb - 62);
}

/// Value of a binary16 bit pattern from its field definition.
inline double half_value(std::uint32_t bits) {
  const int s = (bits >> 15) & 1;
  const int e = (bits >> 10) & 0x1f;
  const int m = bits & 0x3ff;
  const double mag = e == 0 ? m * std::pow(2.0, -24) : (1.0 + m / 1024.0) * std::pow(2.0, e - 15);
  return s ? -mag : mag;
}

/// Nearest finite binary16 value, ties to the even pattern, by scanning every
/// finite pattern.
inline double nearest_half(double x) {
  double best = 0.0;
  double best_err = std::numeric_limits<double>::infinity();
  std::uint32_t best_bits = 0;
  for (std::uint32_t bits = 0; bits < 0x10000; ++bits) {
    if (((bits >> 10) & 0x1f) == 0x1f) continue;
    const double v = half_value(bits);
    const double err = std::fabs(v - x);
    if (err < best_err || (err == best_err && (bits & 1u) == 0 && (best_bits & 1u) == 1)) {
      best = v;
      best_err = err;
      best_bits = bits;
    }
  }
  return best;
}

}  // namespace oracle
