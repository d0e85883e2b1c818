#pragma once

// Fully-connected ReLU network with a softmax cross-entropy head. Parameters
// live in one flat vector; every weight matrix and every bias vector is its
// own layer block (W0, b0, W1, b1, ...), W stored row-major as out x in.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gradq/dataset.hpp"
#include "gradq/error.hpp"

namespace gradq {

struct LayerBlock {
  std::size_t offset = 0;
  std::size_t size = 0;
};

template <typename Real>
struct Mlp {
  std::vector<std::size_t> widths;  // input, hidden..., classes
  std::vector<Real> w;
  std::vector<LayerBlock> blocks;

  explicit Mlp(std::vector<std::size_t> layer_widths) : widths(std::move(layer_widths)) {
    if (widths.size() < 2) throw InvalidArgument("model needs at least input and output widths");
    for (auto width : widths) {
      if (width == 0) throw InvalidArgument("layer width must be positive");
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      blocks.push_back({offset, widths[l] * widths[l + 1]});
      offset += widths[l] * widths[l + 1];
      blocks.push_back({offset, widths[l + 1]});
      offset += widths[l + 1];
    }
    w.assign(offset, Real(0));
  }

  std::size_t dim() const { return w.size(); }
  std::size_t dense_layers() const { return widths.size() - 1; }

  /// Glorot-uniform weights scaled by `scale`, zero biases; scale 0 gives the
  /// all-zero start.
  void init(double scale, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::fill(w.begin(), w.end(), Real(0));
    for (std::size_t l = 0; l < dense_layers(); ++l) {
      const double limit = scale * std::sqrt(6.0 / static_cast<double>(widths[l] + widths[l + 1]));
      std::uniform_real_distribution<double> u(-limit, limit);
      const auto& b = blocks[2 * l];
      for (std::size_t i = 0; i < b.size; ++i) w[b.offset + i] = static_cast<Real>(limit > 0 ? u(rng) : 0.0);
    }
  }
};

namespace mlp {

namespace detail {

template <typename Real>
struct Activations {
  std::vector<std::vector<double>> a;  // a[0] = input, a[L] = logits
};

template <typename Real>
Activations<Real> forward(const Mlp<Real>& m, std::span<const float> x) {
  Activations<Real> act;
  act.a.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < m.dense_layers(); ++l) {
    const std::size_t in = m.widths[l];
    const std::size_t out = m.widths[l + 1];
    const Real* W = m.w.data() + m.blocks[2 * l].offset;
    const Real* b = m.w.data() + m.blocks[2 * l + 1].offset;
    const auto& prev = act.a.back();
    std::vector<double> next(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = static_cast<double>(b[o]);
      for (std::size_t i = 0; i < in; ++i) s += static_cast<double>(W[o * in + i]) * prev[i];
      next[o] = (l + 1 < m.dense_layers()) ? std::max(0.0, s) : s;
    }
    act.a.push_back(std::move(next));
  }
  return act;
}

/// Softmax probabilities and -log p[label].
inline double softmax_xent(const std::vector<double>& logits, std::size_t label, std::vector<double>& p) {
  const double top = *std::max_element(logits.begin(), logits.end());
  p.resize(logits.size());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) z += (p[k] = std::exp(logits[k] - top));
  for (auto& v : p) v /= z;
  return std::log(z) + top - logits[label];
}

}  // namespace detail

/// Gradient of the mean cross-entropy over `batch` (indices into `data`).
template <typename Real>
std::vector<Real> local_gradient(const Mlp<Real>& m, const Dataset& data,
                                 std::span<const std::size_t> batch) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  if (data.features != m.widths.front() || data.classes != m.widths.back()) {
    throw InvalidArgument("dataset does not match model widths");
  }
  std::vector<double> grad(m.dim(), 0.0);
  std::vector<double> p;
  for (auto idx : batch) {
    if (idx >= data.size()) throw InvalidArgument("batch index out of range");
    auto act = detail::forward(m, data.row(idx));
    detail::softmax_xent(act.a.back(), data.y[idx], p);
    std::vector<double> delta = p;
    delta[data.y[idx]] -= 1.0;
    for (std::size_t l = m.dense_layers(); l-- > 0;) {
      const std::size_t in = m.widths[l];
      const std::size_t out = m.widths[l + 1];
      const auto& prev = act.a[l];
      double* gW = grad.data() + m.blocks[2 * l].offset;
      double* gb = grad.data() + m.blocks[2 * l + 1].offset;
      for (std::size_t o = 0; o < out; ++o) {
        gb[o] += delta[o];
        for (std::size_t i = 0; i < in; ++i) gW[o * in + i] += delta[o] * prev[i];
      }
      if (l == 0) break;
      const Real* W = m.w.data() + m.blocks[2 * l].offset;
      std::vector<double> back(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        for (std::size_t i = 0; i < in; ++i) back[i] += static_cast<double>(W[o * in + i]) * delta[o];
      }
      for (std::size_t i = 0; i < in; ++i) back[i] = prev[i] > 0.0 ? back[i] : 0.0;
      delta = std::move(back);
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  std::vector<Real> out(m.dim());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = static_cast<Real>(grad[j] * inv);
  return out;
}

template <typename Real>
double mean_loss(const Mlp<Real>& m, const Dataset& data) {
  std::vector<double> p;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total += detail::softmax_xent(detail::forward(m, data.row(i)).a.back(), data.y[i], p);
  }
  return data.size() ? total / static_cast<double>(data.size()) : 0.0;
}

template <typename Real>
double accuracy(const Mlp<Real>& m, const Dataset& data) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto logits = detail::forward(m, data.row(i)).a.back();
    const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
    hits += static_cast<std::size_t>(best) == data.y[i];
  }
  return data.size() ? static_cast<double>(hits) / static_cast<double>(data.size()) : 0.0;
}

}  // namespace mlp
}  // namespace gradq
