#pragma once

// Generalized normal (GenNorm) source model:
//   f(x) = beta / (2 alpha Gamma(1/beta)) * exp(-(|x - mu| / alpha)^beta)
// beta = 2 is a normal density with variance alpha^2 / 2, beta = 1 a Laplace
// density with scale alpha.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "gradq/error.hpp"

namespace gradq {

struct GenNormParams {
  double mu = 0.0;
  double alpha = 1.0;
  double beta = 2.0;

  void validate() const {
    if (!std::isfinite(mu) || !std::isfinite(alpha) || !std::isfinite(beta) || alpha <= 0.0 ||
        beta <= 0.0) {
      throw InvalidArgument("invalid GenNorm parameters");
    }
  }

  friend bool operator==(const GenNormParams&, const GenNormParams&) = default;
};

struct FitReport {
  GenNormParams params;
  double sample_mean = 0.0;
  double sample_variance = 0.0;
  double sample_abs_mean = 0.0;
  int bisection_iterations = 0;
  bool converged = false;
};

namespace gennorm {

inline constexpr double kFitBetaMin = 0.1;
inline constexpr double kFitBetaMax = 10.0;
inline constexpr double kFitTolerance = 1e-10;
inline constexpr int kFitMaxIterations = 200;
inline constexpr std::size_t kFitMinSamples = 16;

inline double log_normalizer(const GenNormParams& p) {
  return std::log(p.beta) - std::log(2.0 * p.alpha) - std::lgamma(1.0 / p.beta);
}

inline double pdf(const GenNormParams& p, double x) {
  p.validate();
  if (!std::isfinite(x)) throw InvalidArgument("invalid input");
  const double z = std::fabs(x - p.mu) / p.alpha;
  return std::exp(log_normalizer(p) - std::pow(z, p.beta));
}

inline double log_pdf(const GenNormParams& p, double x) {
  p.validate();
  if (!std::isfinite(x)) throw InvalidArgument("invalid input");
  const double z = std::fabs(x - p.mu) / p.alpha;
  return log_normalizer(p) - std::pow(z, p.beta);
}

inline double variance(const GenNormParams& p) {
  p.validate();
  return p.alpha * p.alpha * std::exp(std::lgamma(3.0 / p.beta) - std::lgamma(1.0 / p.beta));
}

/// E|X - mu|^n.
inline double abs_central_moment(const GenNormParams& p, double n) {
  p.validate();
  return std::pow(p.alpha, n) * std::exp(std::lgamma((n + 1.0) / p.beta) - std::lgamma(1.0 / p.beta));
}

/// Zero-mean, unit-variance parameters for shape `beta`.
inline GenNormParams standardized(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be positive");
  const double alpha = std::exp(0.5 * (std::lgamma(1.0 / beta) - std::lgamma(3.0 / beta)));
  return {0.0, alpha, beta};
}

inline double cdf(const GenNormParams& p, double x) {
  p.validate();
  if (std::isnan(x)) throw InvalidArgument("invalid input");
  if (x == p.mu) return 0.5;
  const double z = std::fabs(x - p.mu) / p.alpha;
  const double half = 0.5 * boost::math::gamma_p(1.0 / p.beta, std::pow(z, p.beta));
  return x > p.mu ? 0.5 + half : 0.5 - half;
}

inline double quantile(const GenNormParams& p, double prob) {
  p.validate();
  if (!(prob > 0.0 && prob < 1.0)) throw InvalidArgument("probability must be in (0, 1)");
  if (prob == 0.5) return p.mu;
  const double g = boost::math::gamma_p_inv(1.0 / p.beta, std::fabs(2.0 * prob - 1.0));
  const double r = p.alpha * std::pow(g, 1.0 / p.beta);
  return prob > 0.5 ? p.mu + r : p.mu - r;
}

/// P(|X - mu| > c * alpha).
inline double two_sided_tail(const GenNormParams& p, double c) {
  p.validate();
  return boost::math::gamma_q(1.0 / p.beta, std::pow(c, p.beta));
}

/// Half-width, in units of alpha, beyond which both the probability mass
/// and the |x - mu|^moment_order contribution are below `tail`.
inline double truncation_radius(const GenNormParams& p, double tail, double moment_order = 0.0) {
  p.validate();
  const double a0 = 1.0 / p.beta;
  double c = std::pow(boost::math::gamma_q_inv(a0, tail), a0);
  if (moment_order > 0.0) {
    const double an = (moment_order + 1.0) / p.beta;
    // Tail of E|X - mu|^n relative to alpha^n is Gamma(an)/Gamma(a0) * Q(an, c^beta).
    const double scale = std::exp(std::lgamma(an) - std::lgamma(a0));
    const double target = std::fmin(tail / scale, 0.5);
    c = std::fmax(c, std::pow(boost::math::gamma_q_inv(an, target), 1.0 / p.beta));
  }
  return c;
}

/// (E|X - mu|)^2 / E(X - mu)^2 as a function of the shape; increasing in beta.
inline double moment_ratio(double beta) {
  return std::exp(2.0 * std::lgamma(2.0 / beta) - std::lgamma(1.0 / beta) - std::lgamma(3.0 / beta));
}

/// Moment-ratio fit: mu is the sample mean, beta solves
/// moment_ratio(beta) = mean|x - mu|^2 / var by bisection on [0.1, 10], alpha
/// follows from the variance.
template <typename T>
FitReport fit(std::span<const T> samples) {
  if (samples.size() < kFitMinSamples) throw InvalidArgument("at least 16 samples required");
  const double n = static_cast<double>(samples.size());
  double sum = 0.0;
  for (T s : samples) {
    if (!std::isfinite(static_cast<double>(s))) throw InvalidArgument("invalid input");
    sum += static_cast<double>(s);
  }
  const double mean = sum / n;
  double sq = 0.0;
  double ab = 0.0;
  for (T s : samples) {
    const double c = static_cast<double>(s) - mean;
    sq += c * c;
    ab += std::fabs(c);
  }
  FitReport report;
  report.sample_mean = mean;
  report.sample_variance = sq / n;
  report.sample_abs_mean = ab / n;
  if (!(report.sample_variance > 0.0)) throw InvalidArgument("degenerate sample");

  const double target = report.sample_abs_mean * report.sample_abs_mean / report.sample_variance;
  double beta = 0.0;
  if (target <= moment_ratio(kFitBetaMin)) {
    beta = kFitBetaMin;
  } else if (target >= moment_ratio(kFitBetaMax)) {
    beta = kFitBetaMax;
  } else {
    double lo = kFitBetaMin;
    double hi = kFitBetaMax;
    beta = 0.5 * (lo + hi);
    for (int it = 0; it < kFitMaxIterations; ++it) {
      beta = 0.5 * (lo + hi);
      report.bisection_iterations = it + 1;
      const double residual = moment_ratio(beta) - target;
      if (std::fabs(residual) < kFitTolerance) {
        report.converged = true;
        break;
      }
      (residual < 0.0 ? lo : hi) = beta;
    }
  }
  const double alpha =
      std::sqrt(report.sample_variance * std::exp(std::lgamma(1.0 / beta) - std::lgamma(3.0 / beta)));
  report.params = {mean, alpha, beta};
  return report;
}

template <typename T>
FitReport fit(const std::vector<T>& samples) {
  return fit(std::span<const T>(samples));
}

/// Inverse-CDF sampling: |X - mu|^beta / alpha^beta ~ Gamma(1/beta, 1) with a
/// fair random sign. Deterministic in (params, n, seed).
inline std::vector<double> sample(const GenNormParams& p, std::size_t n, std::uint64_t seed) {
  p.validate();
  if (n == 0) throw InvalidArgument("n must be positive");
  std::mt19937_64 rng(seed);
  const double shape = 1.0 / p.beta;
  std::vector<double> out(n);
  for (auto& x : out) {
    const std::uint64_t bits = rng();
    // 53 bits for the magnitude draw, strictly inside (0, 1); bit 0 for the sign.
    const double u = (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
    const double g = boost::math::gamma_p_inv(shape, u);
    const double r = p.alpha * std::pow(g, shape);
    x = (bits & 1u) ? p.mu + r : p.mu - r;
  }
  return out;
}

}  // namespace gennorm
}  // namespace gradq
