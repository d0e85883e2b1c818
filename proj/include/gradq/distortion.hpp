#pragma once

// M-magnitude weighted L2 distortion
//   d(g, ghat) = (1/d) sum_j |g_j|^M (g_j - ghat_j)^2
// and its expectation under a GenNorm source for a scalar codebook.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "gradq/codebook.hpp"
#include "gradq/error.hpp"
#include "gradq/gennorm.hpp"
#include "gradq/quadrature.hpp"

namespace gradq {

struct DistortionSpec {
  double M = 0.0;

  void validate() const {
    if (!std::isfinite(M) || M < 0.0) throw InvalidArgument("M must be finite and non-negative");
  }

  double weight(double g) const { return M == 0.0 ? 1.0 : std::pow(std::fabs(g), M); }
};

template <typename T, typename U>
double mw_l2(std::span<const T> g, std::span<const U> ghat, const DistortionSpec& spec) {
  spec.validate();
  if (g.size() != ghat.size() || g.empty()) throw InvalidArgument("dimension mismatch");
  double acc = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double gj = static_cast<double>(g[j]);
    const double e = gj - static_cast<double>(ghat[j]);
    acc += spec.weight(gj) * e * e;
  }
  return acc / static_cast<double>(g.size());
}

template <typename T, typename U>
double mw_l2(const std::vector<T>& g, const std::vector<U>& ghat, const DistortionSpec& spec) {
  return mw_l2(std::span<const T>(g), std::span<const U>(ghat), spec);
}

namespace distortion {

inline constexpr double kTailMass = 1e-12;

/// Integration support [lo, hi] for a source under M-weighting.
struct Support {
  double lo;
  double hi;
};

inline Support truncated_support(const GenNormParams& p, const DistortionSpec& spec) {
  const double c = gennorm::truncation_radius(p, kTailMass, spec.M + 2.0);
  return {p.mu - c * p.alpha, p.mu + c * p.alpha};
}

/// Weighted moments over [a, b] about `center`:
///   {int w pdf, int w (g - center) pdf, int w (g - center)^2 pdf},  w = |g|^M.
/// The interval is split at 0 and at mu, where the integrand may have a cusp.
inline std::array<double, 3> cell_moments(const GenNormParams& p, const DistortionSpec& spec,
                                          double a, double b, double center = 0.0,
                                          const quadrature::SimpsonOptions& opts = {}) {
  std::array<double, 3> total{};
  if (!(a < b)) return total;
  const double log_norm = gennorm::log_normalizer(p);
  auto integrand = [&](double g) {
    const double z = std::fabs(g - p.mu) / p.alpha;
    const double w = spec.weight(g) * std::exp(log_norm - std::pow(z, p.beta));
    const double e = g - center;
    return std::array<double, 3>{w, w * e, w * e * e};
  };
  std::array<double, 4> cuts{a, std::min(0.0, p.mu), std::max(0.0, p.mu), b};
  double left = a;
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    const double right = std::clamp(cuts[k], a, b);
    if (right > left) {
      const auto part = quadrature::integrate<3>(integrand, left, right, opts);
      for (std::size_t i = 0; i < 3; ++i) total[i] += part[i];
      left = right;
    }
  }
  return total;
}

/// sum_i int_{cell i} |g|^M (g - c_i)^2 pdf(g) dg, outer cells closed at the
/// truncated support.
inline double expected_distortion(const GenNormParams& p, const std::vector<double>& centroids,
                                  const std::vector<double>& thresholds, const DistortionSpec& spec,
                                  const quadrature::SimpsonOptions& opts = {}) {
  p.validate();
  spec.validate();
  if (centroids.empty() || thresholds.size() + 1 != centroids.size()) {
    throw InvalidArgument("invalid codebook: size");
  }
  const Support s = truncated_support(p, spec);
  const double log_norm = gennorm::log_normalizer(p);
  double total = 0.0;
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    const double a = i == 0 ? s.lo : std::max(s.lo, thresholds[i - 1]);
    const double b = i + 1 == centroids.size() ? s.hi : std::min(s.hi, thresholds[i]);
    if (!(a < b)) continue;
    const double c = centroids[i];
    auto integrand = [&](double g) {
      const double z = std::fabs(g - p.mu) / p.alpha;
      const double e = g - c;
      return std::array<double, 1>{spec.weight(g) * e * e * std::exp(log_norm - std::pow(z, p.beta))};
    };
    std::array<double, 4> cuts{a, std::min(0.0, p.mu), std::max(0.0, p.mu), b};
    double left = a;
    for (std::size_t k = 1; k < cuts.size(); ++k) {
      const double right = std::clamp(cuts[k], a, b);
      if (right > left) {
        total += quadrature::integrate<1>(integrand, left, right, opts)[0];
        left = right;
      }
    }
  }
  return total;
}

inline double expected_distortion(const GenNormParams& p, const Codebook& codebook,
                                  const DistortionSpec& spec,
                                  const quadrature::SimpsonOptions& opts = {}) {
  codebook.validate();
  return expected_distortion(p, codebook.centroids, codebook.thresholds, spec, opts);
}

}  // namespace distortion
}  // namespace gradq
