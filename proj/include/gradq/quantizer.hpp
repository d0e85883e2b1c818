#pragma once

// Lloyd/LBG design of scalar quantizers for a GenNorm source under the
// M-magnitude weighted L2 distortion.
//
// Each iteration places thresholds at centroid midpoints and then moves every
// centroid to the |g|^M-weighted conditional mean of its cell:
//   c(i) = int_cell |g|^M g pdf(g) dg / int_cell |g|^M pdf(g) dg
// Both half-steps cannot increase the expected distortion, so the recorded
// trace is non-increasing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "gradq/codebook.hpp"
#include "gradq/distortion.hpp"
#include "gradq/error.hpp"
#include "gradq/gennorm.hpp"
#include "gradq/quadrature.hpp"

namespace gradq {

struct LloydReport {
  int iterations = 0;
  std::vector<double> distortion_trace;
  bool converged = false;
  bool empty_cell = false;
};

struct DesignOptions {
  int max_iterations = 1000;
  // Stop when the largest centroid move, in units of the source scale alpha,
  // drops below this.
  double tolerance = 1e-6;
  quadrature::SimpsonOptions quadrature{};
};

namespace quantizer {

inline constexpr int kMinRate = 1;
inline constexpr int kMaxRate = 8;
inline constexpr double kEmptyCellMass = 1e-300;

/// Equiprobable start: centroid i at the (2i + 1) / (2L) quantile.
inline std::vector<double> quantile_init(const GenNormParams& source, std::size_t levels) {
  std::vector<double> c(levels);
  for (std::size_t i = 0; i < levels; ++i) {
    const double prob = static_cast<double>(2 * i + 1) / static_cast<double>(2 * levels);
    c[i] = gennorm::quantile(source, prob);
  }
  return c;
}

struct CellStats {
  std::vector<std::array<double, 3>> moments;
  double distortion = 0.0;
};

/// Weighted moments of every cell induced by `centroids` (midpoint thresholds),
/// taken about the cell's centroid, together with the expected distortion of
/// that codebook.
inline CellStats cell_stats(const GenNormParams& source, const DistortionSpec& spec,
                            const std::vector<double>& centroids,
                            const quadrature::SimpsonOptions& quad) {
  const auto support = distortion::truncated_support(source, spec);
  const auto thresholds = Codebook::midpoints(centroids);
  CellStats out;
  out.moments.resize(centroids.size());
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    const double a = i == 0 ? support.lo : std::max(support.lo, thresholds[i - 1]);
    const double b = i + 1 == centroids.size() ? support.hi : std::min(support.hi, thresholds[i]);
    out.moments[i] = distortion::cell_moments(source, spec, a, b, centroids[i], quad);
    out.distortion += out.moments[i][2];
  }
  return out;
}

inline std::pair<Codebook, LloydReport> design(const GenNormParams& source, int rate,
                                               const DistortionSpec& spec,
                                               const DesignOptions& opts = {}) {
  source.validate();
  spec.validate();
  if (rate < kMinRate || rate > kMaxRate) throw InvalidArgument("rate must be in [1, 8]");

  const std::size_t levels = std::size_t{1} << rate;
  std::vector<double> c = quantile_init(source, levels);
  LloydReport report;

  for (int it = 0; it < opts.max_iterations; ++it) {
    const CellStats stats = cell_stats(source, spec, c, opts.quadrature);
    report.distortion_trace.push_back(stats.distortion);
    const auto thresholds = Codebook::midpoints(c);
    const auto support = distortion::truncated_support(source, spec);

    std::vector<double> next(levels);
    double move = 0.0;
    for (std::size_t i = 0; i < levels; ++i) {
      const auto& m = stats.moments[i];
      if (m[0] < kEmptyCellMass) {
        const double a = i == 0 ? support.lo : thresholds[i - 1];
        const double b = i + 1 == levels ? support.hi : thresholds[i];
        next[i] = Codebook::midpoint(a, b);
        report.empty_cell = true;
      } else {
        next[i] = c[i] + m[1] / m[0];
      }
      if (!std::isfinite(next[i])) throw NumericalError("quadrature failure");
      move = std::max(move, std::fabs(next[i] - c[i]));
    }
    c = std::move(next);
    report.iterations = it + 1;
    if (move / source.alpha < opts.tolerance) {
      report.converged = !report.empty_cell;
      break;
    }
  }
  report.distortion_trace.push_back(cell_stats(source, spec, c, opts.quadrature).distortion);

  Codebook cb;
  cb.thresholds = Codebook::midpoints(c);
  cb.centroids = std::move(c);
  cb.rate = rate;
  cb.M = spec.M;
  cb.source = source;
  cb.validate();
  return {std::move(cb), std::move(report)};
}

/// Cell index of x; a value exactly on a threshold goes to the upper cell.
inline std::size_t quantize(double x, const Codebook& cb) {
  const auto it = std::upper_bound(cb.thresholds.begin(), cb.thresholds.end(), x);
  return static_cast<std::size_t>(it - cb.thresholds.begin());
}

inline double dequantize(std::size_t index, const Codebook& cb) {
  if (index >= cb.centroids.size()) throw InvalidArgument("invalid codeword");
  return cb.centroids[index];
}

struct SweepRow {
  double beta = 0.0;
  Codebook codebook;
  LloydReport report;
};

/// One codebook per shape, each for the zero-mean unit-variance source.
inline std::vector<SweepRow> sweep_beta(const std::vector<double>& betas, int rate,
                                        const DistortionSpec& spec, const DesignOptions& opts = {}) {
  std::vector<SweepRow> rows;
  rows.reserve(betas.size());
  for (double beta : betas) {
    if (!(beta >= 0.3 && beta <= 4.0)) {
      throw InvalidArgument("beta=" + std::to_string(beta) + ": beta must be in [0.3, 4]");
    }
    try {
      auto [cb, rep] = design(gennorm::standardized(beta), rate, spec, opts);
      rows.push_back({beta, std::move(cb), std::move(rep)});
    } catch (const NumericalError& e) {
      throw NumericalError("beta=" + std::to_string(beta) + ": " + e.what());
    }
  }
  return rows;
}

/// Thread-safe memo of standardized-source codebooks keyed by the exact
/// single-precision shape, weight exponent and rate. Encoder and decoder both
/// key on the 32-bit shape stored in the blob header, so they agree.
class CodebookCache {
 public:
  std::shared_ptr<const Codebook> get(float beta, double M, int rate) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &beta, sizeof bits);
    const Key key{bits, M, rate};
    {
      std::lock_guard lock(mutex_);
      if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    }
    auto designed = design(gennorm::standardized(static_cast<double>(beta)), rate, DistortionSpec{M});
    auto ptr = std::make_shared<const Codebook>(std::move(designed.first));
    std::lock_guard lock(mutex_);
    return entries_.emplace(key, std::move(ptr)).first->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

 private:
  using Key = std::tuple<std::uint32_t, double, int>;
  mutable std::mutex mutex_;
  std::map<Key, std::shared_ptr<const Codebook>> entries_;
};

inline CodebookCache& default_codebook_cache() {
  static CodebookCache cache;
  return cache;
}

}  // namespace quantizer
}  // namespace gradq
