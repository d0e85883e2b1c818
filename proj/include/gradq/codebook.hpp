#pragma once

#include <cmath>
#include <vector>

#include "gradq/error.hpp"
#include "gradq/gennorm.hpp"

namespace gradq {

/// Scalar quantizer: L = 2^rate sorted reconstruction levels and the L - 1
/// decision thresholds between them.
struct Codebook {
  std::vector<double> centroids;
  std::vector<double> thresholds;
  int rate = 1;
  double M = 0.0;
  GenNormParams source;

  std::size_t levels() const { return centroids.size(); }

  /// Checks the structural invariants: sizes, strict ordering, interleaving
  /// and the midpoint rule for every threshold.
  void validate() const {
    if (rate < 1 || rate > 16 || centroids.size() != (std::size_t{1} << rate) ||
        thresholds.size() + 1 != centroids.size()) {
      throw InvalidArgument("invalid codebook: size");
    }
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      if (!(centroids[i] < thresholds[i] && thresholds[i] < centroids[i + 1])) {
        throw InvalidArgument("invalid codebook: ordering");
      }
      if (thresholds[i] != midpoint(centroids[i], centroids[i + 1])) {
        throw InvalidArgument("invalid codebook: threshold is not a midpoint");
      }
    }
  }

  static double midpoint(double a, double b) { return 0.5 * (a + b); }

  static std::vector<double> midpoints(const std::vector<double>& c) {
    std::vector<double> t(c.empty() ? 0 : c.size() - 1);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = midpoint(c[i], c[i + 1]);
    return t;
  }
};

}  // namespace gradq
