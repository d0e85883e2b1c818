#pragma once

// Labelled feature matrices, a seeded synthetic Gaussian-blob generator and
// the dataset file format:
//   "DSET" | u8 version (1) | u64 samples | u64 features | u64 classes |
//   samples x features f32 (row-major) | samples x u8 labels

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gradq/error.hpp"
#include "gradq/io.hpp"

namespace gradq {

struct Dataset {
  std::size_t features = 0;
  std::size_t classes = 0;
  std::vector<float> x;  // row-major, size() * features
  std::vector<std::uint8_t> y;

  std::size_t size() const { return y.size(); }
  std::span<const float> row(std::size_t i) const { return {x.data() + i * features, features}; }

  void validate() const {
    if (features == 0 || classes < 2 || classes > 256) throw InvalidArgument("invalid dataset shape");
    if (x.size() != y.size() * features) throw InvalidArgument("invalid dataset shape");
    for (auto label : y) {
      if (label >= classes) throw InvalidArgument("label out of range");
    }
  }

  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset out{features, classes, {}, {}};
    out.x.reserve(idx.size() * features);
    out.y.reserve(idx.size());
    for (auto i : idx) {
      const auto r = row(i);
      out.x.insert(out.x.end(), r.begin(), r.end());
      out.y.push_back(y[i]);
    }
    return out;
  }
};

struct SyntheticSpec {
  std::size_t samples = 2000;
  double separation = 1.0;  // std of the class centres relative to unit noise
};

namespace dataset {

/// Class centres ~ N(0, separation^2 I); each sample = centre + N(0, I).
/// Labels cycle through the classes so every class is equally represented.
inline Dataset synthetic_blobs(const SyntheticSpec& spec, std::size_t features, std::size_t classes,
                               std::uint64_t seed) {
  if (spec.samples < classes) throw InvalidArgument("too few samples");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> centres(classes * features);
  for (auto& c : centres) c = spec.separation * normal(rng);

  Dataset ds{features, classes, {}, {}};
  ds.x.resize(spec.samples * features);
  ds.y.resize(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const std::size_t label = i % classes;
    ds.y[i] = static_cast<std::uint8_t>(label);
    for (std::size_t f = 0; f < features; ++f) {
      ds.x[i * features + f] = static_cast<float>(centres[label * features + f] + normal(rng));
    }
  }
  return ds;
}

/// Deterministic shuffled split; the first `train_fraction` goes to training.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ 0x5bd1e995u);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  const auto n_train = static_cast<std::size_t>(train_fraction * static_cast<double>(ds.size()));
  const std::span<const std::size_t> all(order);
  return {ds.subset(all.first(n_train)), ds.subset(all.subspan(n_train))};
}

/// Contiguous near-equal partition of [0, n) into `parts` shards.
inline std::vector<std::vector<std::size_t>> shards(std::size_t n, std::size_t parts) {
  if (parts == 0 || parts > n) throw InvalidArgument("cannot shard dataset");
  std::vector<std::vector<std::size_t>> out(parts);
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t begin = p * n / parts;
    const std::size_t end = (p + 1) * n / parts;
    out[p].resize(end - begin);
    std::iota(out[p].begin(), out[p].end(), begin);
  }
  return out;
}

inline constexpr char kMagic[4] = {'D', 'S', 'E', 'T'};
inline constexpr std::uint8_t kVersion = 1;

inline std::vector<std::uint8_t> encode(const Dataset& ds) {
  ds.validate();
  io::ByteWriter w;
  w.put_raw(kMagic, 4);
  w.put(kVersion);
  w.put(static_cast<std::uint64_t>(ds.size()));
  w.put(static_cast<std::uint64_t>(ds.features));
  w.put(static_cast<std::uint64_t>(ds.classes));
  for (float v : ds.x) w.put(v);
  for (auto label : ds.y) w.put(label);
  return std::move(w.bytes());
}

inline Dataset decode(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "dataset file");
  r.expect_magic(kMagic);
  if (r.get<std::uint8_t>() != kVersion) throw FormatError("unsupported dataset version");
  const auto n = r.get<std::uint64_t>();
  const auto f = r.get<std::uint64_t>();
  const auto c = r.get<std::uint64_t>();
  if (f == 0 || c < 2 || c > 256) throw FormatError("invalid dataset header");
  if (r.remaining() != n * f * sizeof(float) + n) throw FormatError("truncated dataset file");
  Dataset ds{f, c, std::vector<float>(n * f), std::vector<std::uint8_t>(n)};
  for (auto& v : ds.x) v = r.get<float>();
  for (auto& label : ds.y) label = r.get<std::uint8_t>();
  for (auto label : ds.y) {
    if (label >= c) throw FormatError("label out of range in dataset file");
  }
  return ds;
}

inline Dataset load(const std::string& path) { return decode(io::read_file(path)); }
inline void save(const std::string& path, const Dataset& ds) { io::write_file(path, encode(ds)); }

}  // namespace dataset
}  // namespace gradq
