#pragma once

// topK selection, rate-budget arithmetic and enumerative (lexicographic)
// coding of the kept support.
//
// Bit budget per layer and round:
//   payload_plus_index:  log2 C(d, K) + K * per_entry_bits <= total_bits
//   payload_only:                       K * per_entry_bits <= total_bits

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "gradq/error.hpp"

namespace gradq {

using BigUint = boost::multiprecision::cpp_int;

enum class AccountingMode { kPayloadPlusIndex, kPayloadOnly };

inline std::string to_string(AccountingMode m) {
  return m == AccountingMode::kPayloadOnly ? "payload_only" : "payload_plus_index";
}

inline AccountingMode parse_accounting_mode(const std::string& s) {
  if (s == "payload_plus_index") return AccountingMode::kPayloadPlusIndex;
  if (s == "payload_only") return AccountingMode::kPayloadOnly;
  throw InvalidArgument("unknown accounting mode: " + s);
}

struct RateBudget {
  std::uint64_t d = 0;
  double total_bits = 0.0;
  double per_entry_bits = 1.0;
  AccountingMode mode = AccountingMode::kPayloadPlusIndex;

  void validate() const {
    if (d == 0) throw InvalidArgument("budget dimension must be positive");
    if (!std::isfinite(total_bits) || total_bits < 0.0) throw InvalidArgument("invalid total bits");
    if (!std::isfinite(per_entry_bits) || per_entry_bits <= 0.0) {
      throw InvalidArgument("invalid per-entry bits");
    }
  }

  /// Budget of `bits_per_dimension` * d total bits.
  static RateBudget per_dimension(std::uint64_t d, double bits_per_dimension, double per_entry_bits,
                                  AccountingMode mode) {
    return {d, bits_per_dimension * static_cast<double>(d), per_entry_bits, mode};
  }
};

/// Lexicographic rank of a K-subset of {0, ..., d - 1}.
struct SupportCode {
  BigUint rank;
  std::uint64_t d = 0;
  std::uint64_t K = 0;
};

struct TopK {
  std::vector<std::uint64_t> indices;  // ascending
  std::vector<double> values;
};

namespace sparsify {

/// Indices of the K largest |g_j| (ties to the lower index), returned ascending.
template <typename T>
TopK topk(std::span<const T> g, std::uint64_t K) {
  if (K < 1 || K > g.size()) throw InvalidArgument("invalid K");
  std::vector<std::uint64_t> order(g.size());
  std::iota(order.begin(), order.end(), std::uint64_t{0});
  auto before = [&g](std::uint64_t a, std::uint64_t b) {
    const double ma = std::fabs(static_cast<double>(g[a]));
    const double mb = std::fabs(static_cast<double>(g[b]));
    return ma > mb || (ma == mb && a < b);
  };
  if (K < g.size()) std::nth_element(order.begin(), order.begin() + K - 1, order.end(), before);
  order.resize(K);
  std::sort(order.begin(), order.end());
  TopK out;
  out.values.reserve(K);
  for (auto i : order) out.values.push_back(static_cast<double>(g[i]));
  out.indices = std::move(order);
  return out;
}

template <typename T>
TopK topk(const std::vector<T>& g, std::uint64_t K) {
  return topk(std::span<const T>(g), K);
}

/// Exact C(n, k).
inline BigUint binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  BigUint c = 1;
  for (std::uint64_t i = 0; i < k; ++i) {
    c *= n - i;
    c /= i + 1;
  }
  return c;
}

inline double log2_binomial(std::uint64_t d, std::uint64_t K) {
  if (K > d) throw InvalidArgument("invalid K");
  if (K == 0 || K == d) return 0.0;
  if (d <= 64) {
    // Fits in 64 bits: C(64, 32) < 2^63.
    std::uint64_t c = 1;
    const std::uint64_t k = std::min(K, d - K);
    for (std::uint64_t i = 0; i < k; ++i) c = c / (i + 1) * (d - i) + c % (i + 1) * (d - i) / (i + 1);
    return std::log2(static_cast<double>(c));
  }
  const double nats = std::lgamma(static_cast<double>(d) + 1.0) -
                      std::lgamma(static_cast<double>(K) + 1.0) -
                      std::lgamma(static_cast<double>(d - K) + 1.0);
  return std::max(0.0, nats / std::log(2.0));
}

/// Exact serialized length of a support code: bit length of C(d, K) - 1,
/// i.e. ceil(log2 C(d, K)).
inline std::uint64_t support_bits(std::uint64_t d, std::uint64_t K) {
  const BigUint c = binomial(d, K);
  if (c <= 1) return 0;
  return static_cast<std::uint64_t>(boost::multiprecision::msb(BigUint(c - 1))) + 1;
}

inline double cost(const RateBudget& b, std::uint64_t K) {
  const double payload = static_cast<double>(K) * b.per_entry_bits;
  return b.mode == AccountingMode::kPayloadOnly ? payload : payload + log2_binomial(b.d, K);
}

/// Largest K in [1, min(d, floor(total / per_entry))] whose cost fits the
/// budget. Feasible K form a prefix of that range, so a binary search over it
/// is exact.
inline std::uint64_t solve_k(const RateBudget& b) {
  b.validate();
  const double by_payload = std::floor(b.total_bits / b.per_entry_bits);
  const std::uint64_t k_max =
      by_payload >= static_cast<double>(b.d) ? b.d : static_cast<std::uint64_t>(by_payload);
  if (k_max < 1 || cost(b, 1) > b.total_bits) throw InvalidArgument("budget too small");
  if (cost(b, k_max) <= b.total_bits) return k_max;
  std::uint64_t lo = 1;      // feasible
  std::uint64_t hi = k_max;  // infeasible
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    (cost(b, mid) <= b.total_bits ? lo : hi) = mid;
  }
  return lo;
}

namespace detail {

inline void check_support(std::span<const std::uint64_t> indices, std::uint64_t d) {
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= d || (i > 0 && indices[i] <= indices[i - 1])) {
      throw InvalidArgument("invalid support");
    }
  }
}

}  // namespace detail

/// Number of K-subsets lexicographically before `indices`. Walks positions
/// once, carrying C(remaining, k - 1) with exact small-integer updates.
inline SupportCode rank_support(std::span<const std::uint64_t> indices, std::uint64_t d,
                                std::uint64_t K) {
  if (indices.size() != K || K > d) throw InvalidArgument("invalid support");
  detail::check_support(indices, d);
  SupportCode code{0, d, K};
  if (K == 0) return code;

  std::uint64_t k = K;
  BigUint completions = binomial(d - 1, k - 1);  // subsets choosing x = 0 next
  std::size_t next = 0;
  for (std::uint64_t x = 0; k > 0; ++x) {
    const std::uint64_t r = d - 1 - x;
    if (indices[next] == x) {
      ++next;
      --k;
      if (k == 0) break;
      completions *= k;  // C(r - 1, k - 1) = C(r, k) * k / r
      completions /= r;
    } else {
      code.rank += completions;
      completions *= r - k + 1;  // C(r - 1, k - 1) = C(r, k - 1) * (r - k + 1) / r
      completions /= r;
    }
  }
  return code;
}

inline SupportCode rank_support(const std::vector<std::uint64_t>& indices, std::uint64_t d,
                                std::uint64_t K) {
  return rank_support(std::span<const std::uint64_t>(indices), d, K);
}

inline std::vector<std::uint64_t> unrank_support(const SupportCode& code) {
  if (code.K > code.d || code.rank < 0 || code.rank >= binomial(code.d, code.K)) {
    throw InvalidArgument("invalid support");
  }
  std::vector<std::uint64_t> out;
  out.reserve(code.K);
  if (code.K == 0) return out;

  BigUint rest = code.rank;
  std::uint64_t k = code.K;
  BigUint completions = binomial(code.d - 1, k - 1);
  for (std::uint64_t x = 0; k > 0; ++x) {
    const std::uint64_t r = code.d - 1 - x;
    if (rest < completions) {
      out.push_back(x);
      --k;
      if (k == 0) break;
      completions *= k;
      completions /= r;
    } else {
      rest -= completions;
      completions *= r - k + 1;
      completions /= r;
    }
  }
  return out;
}

}  // namespace sparsify
}  // namespace gradq
