#pragma once

// Deterministic federated-averaging simulator. Each round the parameter
// server broadcasts w; every client computes a minibatch gradient on its
// shard, compresses it layer by layer and uploads the blobs; the server
// decodes, averages in fixed client order and takes an SGD step.

#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gradq/codec.hpp"
#include "gradq/dataset.hpp"
#include "gradq/error.hpp"
#include "gradq/gennorm.hpp"
#include "gradq/mlp.hpp"
#include "gradq/sparsify.hpp"

namespace gradq {

enum class LocalMode { kGradient, kDelta };

struct TrainingConfig {
  std::size_t clients = 4;
  std::size_t rounds = 10;
  std::vector<double> eta{0.05};  // one entry = constant schedule
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  CompressorKind compressor = CompressorKind::identity();
  double rate = 2.0;  // budget bits per gradient dimension, per layer
  AccountingMode mode = AccountingMode::kPayloadPlusIndex;
  std::size_t adaptive_warmup_rounds = 1;  // MwL2Fixed: rounds before fits freeze
  std::vector<std::size_t> widths{64, 32, 10};
  std::string dataset_path;  // empty: synthetic blobs
  SyntheticSpec synthetic{};
  std::size_t local_epochs = 1;
  LocalMode local_mode = LocalMode::kGradient;
  double init_scale = 1.0;
  double train_fraction = 0.8;

  double eta_at(std::size_t t) const { return eta.size() == 1 ? eta[0] : eta.at(t); }

  void validate() const {
    if (clients < 1) throw InvalidArgument("clients must be >= 1");
    if (rounds < 1) throw InvalidArgument("rounds must be >= 1");
    if (eta.empty() || (eta.size() != 1 && eta.size() < rounds)) {
      throw InvalidArgument("eta needs one value or one per round");
    }
    for (double e : eta) {
      if (!(e > 0.0) || !std::isfinite(e)) throw InvalidArgument("eta must be positive");
    }
    if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
    if (widths.size() < 2) throw InvalidArgument("model needs at least two widths");
    if (local_epochs < 1) throw InvalidArgument("local_epochs must be >= 1");
    compressor.validate();
    if (compressor.tag == CodecTag::kMwL2Fixed && compressor.frozen.empty() && adaptive_warmup_rounds < 1) {
      throw InvalidArgument("non-adaptive codec needs frozen fits or adaptive_warmup_rounds >= 1");
    }
  }
};

struct LayerFit {
  GenNormParams params;
  double variance = 0.0;
  bool inherited = false;
  bool fallback = false;
  bool converged = false;
};

struct RoundMetrics {
  std::size_t round = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  std::uint64_t uplink_bits = 0;
  std::vector<std::uint64_t> layer_bits;
  std::vector<LayerFit> fits;
};

struct Metrics {
  std::vector<RoundMetrics> rounds;
  bool any_fallback = false;
  std::vector<float> final_weights;
};

namespace flsim {

/// Coordinate-wise mean, accumulated in the given client order.
template <typename Real>
std::vector<Real> aggregate(std::span<const std::vector<Real>> gradients) {
  if (gradients.empty()) throw InvalidArgument("no gradients to aggregate");
  const std::size_t d = gradients.front().size();
  std::vector<double> acc(d, 0.0);
  for (const auto& g : gradients) {
    if (g.size() != d) throw InvalidArgument("dimension mismatch");
    for (std::size_t j = 0; j < d; ++j) acc[j] += static_cast<double>(g[j]);
  }
  const double n = static_cast<double>(gradients.size());
  std::vector<Real> out(d);
  for (std::size_t j = 0; j < d; ++j) out[j] = static_cast<Real>(acc[j] / n);
  return out;
}

template <typename Real>
std::vector<Real> aggregate(const std::vector<std::vector<Real>>& gradients) {
  return aggregate(std::span<const std::vector<Real>>(gradients));
}

/// w - eta * g.
template <typename Real>
std::vector<Real> step(std::span<const Real> w, double eta, std::span<const Real> g) {
  if (w.size() != g.size()) throw InvalidArgument("dimension mismatch");
  std::vector<Real> out(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    out[j] = static_cast<Real>(static_cast<double>(w[j]) - eta * static_cast<double>(g[j]));
  }
  return out;
}

template <typename Real>
std::vector<Real> step(const std::vector<Real>& w, double eta, const std::vector<Real>& g) {
  return step(std::span<const Real>(w), eta, std::span<const Real>(g));
}

/// One GenNorm fit per layer block. Blocks with fewer than 16 entries take
/// the fit of the nearest block (by position) that has enough; a degenerate
/// block falls back to a beta = 2 fit of the whole vector.
template <typename Real>
std::vector<LayerFit> fit_layers(std::span<const Real> g, std::span<const LayerBlock> blocks) {
  std::size_t covered = 0;
  for (const auto& b : blocks) {
    if (b.offset != covered) throw InvalidArgument("layer blocks do not partition the vector");
    covered += b.size;
  }
  if (covered != g.size()) throw InvalidArgument("layer blocks do not partition the vector");

  auto whole_vector_fallback = [&g]() {
    double sum = 0.0;
    for (auto v : g) sum += static_cast<double>(v);
    const double mean = sum / static_cast<double>(g.size());
    double sq = 0.0;
    for (auto v : g) sq += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
    const double var = sq / static_cast<double>(g.size());
    LayerFit f;
    f.params = var > 0.0 ? GenNormParams{mean, std::sqrt(2.0 * var), 2.0} : gennorm::standardized(2.0);
    f.variance = var > 0.0 ? var : 1.0;
    f.fallback = true;
    return f;
  };

  std::vector<std::optional<LayerFit>> own(blocks.size());
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    if (blocks[l].size < gennorm::kFitMinSamples) continue;
    const auto slice = g.subspan(blocks[l].offset, blocks[l].size);
    try {
      const auto report = gennorm::fit(slice);
      own[l] = LayerFit{report.params, report.sample_variance, false, false, report.converged};
    } catch (const InvalidArgument&) {
      own[l] = whole_vector_fallback();
    }
  }

  std::vector<LayerFit> out(blocks.size());
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    if (own[l]) {
      out[l] = *own[l];
      continue;
    }
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      if (!own[k]) continue;
      const auto dist = [l](std::size_t x) { return x > l ? x - l : l - x; };
      if (!best || dist(k) < dist(*best)) best = k;
    }
    if (best) {
      out[l] = *own[*best];
      out[l].inherited = true;
    } else {
      out[l] = whole_vector_fallback();
    }
  }
  return out;
}

template <typename Real>
std::vector<LayerFit> fit_layers(const std::vector<Real>& g, const Mlp<Real>& model) {
  return fit_layers(std::span<const Real>(g), std::span<const LayerBlock>(model.blocks));
}

/// Seeded minibatch of up to `batch_size` distinct shard members.
inline std::vector<std::size_t> sample_batch(std::span<const std::size_t> shard, std::size_t batch_size,
                                             std::uint64_t seed, std::size_t round, std::size_t client) {
  std::vector<std::size_t> pool(shard.begin(), shard.end());
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(round), static_cast<std::uint32_t>(client)};
  std::mt19937_64 rng(seq);
  const std::size_t take = std::min(batch_size, pool.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(take);
  return pool;
}

struct Environment {
  Dataset train;
  Dataset test;
  std::vector<std::vector<std::size_t>> shards;
  Mlp<float> initial;
};

inline Environment make_environment(const TrainingConfig& cfg) {
  Dataset full = cfg.dataset_path.empty()
                     ? dataset::synthetic_blobs(cfg.synthetic, cfg.widths.front(), cfg.widths.back(), cfg.seed)
                     : dataset::load(cfg.dataset_path);
  full.validate();
  auto [train, test] = dataset::split(full, cfg.train_fraction, cfg.seed);
  auto parts = dataset::shards(train.size(), cfg.clients);
  Mlp<float> model(cfg.widths);
  model.init(cfg.init_scale, cfg.seed + 0x9e3779b97f4a7c15ull);
  return {std::move(train), std::move(test), std::move(parts), std::move(model)};
}

/// Upload of one client: either a minibatch gradient or, in delta mode, the
/// model change over `local_epochs` passes divided by eta.
inline std::vector<float> client_update(const Mlp<float>& model, const Environment& env,
                                        const TrainingConfig& cfg, std::size_t t, std::size_t n) {
  const auto& shard = env.shards[n];
  if (cfg.local_mode == LocalMode::kGradient) {
    const auto batch = sample_batch(shard, cfg.batch_size, cfg.seed, t, n);
    return mlp::local_gradient(model, env.train, batch);
  }
  const double eta = cfg.eta_at(t);
  Mlp<float> local = model;
  for (std::size_t e = 0; e < cfg.local_epochs; ++e) {
    const auto order = sample_batch(shard, shard.size(), cfg.seed, t * cfg.local_epochs + e, n);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::span<const std::size_t> batch(order.data() + start,
                                               std::min(cfg.batch_size, order.size() - start));
      local.w = step(local.w, eta, mlp::local_gradient(local, env.train, batch));
    }
  }
  std::vector<float> delta(model.dim());
  for (std::size_t j = 0; j < delta.size(); ++j) {
    delta[j] = static_cast<float>((static_cast<double>(model.w[j]) - local.w[j]) / eta);
  }
  return delta;
}

[[noreturn]] inline void rethrow_with_context(std::size_t t, std::size_t n, std::size_t l) {
  const std::string where = "round " + std::to_string(t) + ", client " + std::to_string(n) +
                            ", layer " + std::to_string(l) + ": ";
  try {
    throw;
  } catch (const FormatError& e) {
    throw FormatError(where + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(where + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(where + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(where + e.what());
  }
}

/// Runs the simulator. An MwL2Fixed compressor without frozen fits runs
/// adaptively for cfg.adaptive_warmup_rounds rounds, then freezes the
/// per-layer fits of the last warm-up round for the rest of training.
inline Metrics run(const TrainingConfig& cfg) {
  cfg.validate();
  Environment env = make_environment(cfg);
  Mlp<float> model = env.initial;
  const auto& blocks = model.blocks;

  std::vector<RateBudget> budgets;
  for (const auto& b : blocks) {
    budgets.push_back(RateBudget::per_dimension(b.size, cfg.rate, cfg.compressor.per_entry_bits(), cfg.mode));
  }

  Metrics metrics;
  CompressorKind kind = cfg.compressor;
  const bool warmup = kind.tag == CodecTag::kMwL2Fixed && kind.frozen.empty();
  if (warmup) kind = CompressorKind::mwl2_adaptive(cfg.compressor.M, cfg.compressor.rate);
  if (kind.tag == CodecTag::kMwL2Fixed && kind.frozen.size() != blocks.size()) {
    throw InvalidArgument("frozen fits do not match the layer count");
  }
  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    RoundMetrics row;
    row.round = t;
    row.layer_bits.assign(blocks.size(), 0);

    std::vector<std::vector<float>> raw(cfg.clients);
    std::vector<std::vector<float>> decoded(cfg.clients, std::vector<float>(model.dim(), 0.0f));
    for (std::size_t n = 0; n < cfg.clients; ++n) {
      raw[n] = client_update(model, env, cfg, t, n);
      std::vector<LayerFit> client_fits;
      if (kind.tag == CodecTag::kMwL2Adaptive) client_fits = fit_layers(raw[n], model);
      for (std::size_t l = 0; l < blocks.size(); ++l) {
        try {
          const std::span<const float> slice(raw[n].data() + blocks[l].offset, blocks[l].size);
          CompressOptions opts{static_cast<std::uint32_t>(l), std::nullopt};
          if (!client_fits.empty()) opts.beta = client_fits[l].params.beta;
          const auto bytes = compress(slice, kind, budgets[l], opts).to_bytes();
          // Server side: only the bytes cross the link.
          const auto blob = CompressedBlob::from_bytes(bytes);
          const auto values = decompress(blob);
          row.layer_bits[l] += blob.bit_length();
          std::copy(values.begin(), values.end(), decoded[n].begin() + static_cast<std::ptrdiff_t>(blocks[l].offset));
        } catch (...) {
          rethrow_with_context(t, n, l);
        }
      }
    }
    for (auto bits : row.layer_bits) row.uplink_bits += bits;

    const auto g_hat = aggregate(decoded);
    model.w = step(model.w, cfg.eta_at(t), g_hat);

    row.fits = fit_layers(aggregate(raw), model);
    for (const auto& f : row.fits) metrics.any_fallback = metrics.any_fallback || f.fallback;
    row.train_loss = mlp::mean_loss(model, env.train);
    row.test_accuracy = mlp::accuracy(model, env.test);

    if (warmup && t + 1 == cfg.adaptive_warmup_rounds) {
      std::vector<GenNormParams> frozen;
      for (const auto& f : row.fits) frozen.push_back(f.params);
      kind = CompressorKind::mwl2_fixed(cfg.compressor.M, cfg.compressor.rate, std::move(frozen));
    }
    metrics.rounds.push_back(std::move(row));
  }
  metrics.final_weights = std::move(model.w);
  return metrics;
}

}  // namespace flsim
}  // namespace gradq
