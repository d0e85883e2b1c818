#pragma once

// Per-layer gradient compressor: normalize, topK, code the kept values,
// enumerative-code the support, and pack everything into a bitstream.
//
// Blob layout (MSB-first, zero-padded to a byte boundary):
//   magic "GBLB"        32
//   version              8
//   codec tag            8
//   bits per entry       8
//   layer id            32
//   d                   64
//   K                   64
//   mean (f32)          32
//   std (f32)           32
//   crc32               32   over the whole blob with this field zeroed
//   descriptor           0 or 64: mw-L2 {beta, M} / uniform {min, max} as f32
//   support rank         ceil(log2 C(d, K))
//   payload              K x bits-per-entry

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/crc.hpp>

#include "gradq/bitstream.hpp"
#include "gradq/error.hpp"
#include "gradq/gennorm.hpp"
#include "gradq/minifloat.hpp"
#include "gradq/quantizer.hpp"
#include "gradq/sparsify.hpp"

namespace gradq {

enum class CodecTag : std::uint8_t {
  kIdentity = 0,
  kMwL2Adaptive = 1,
  kMwL2Fixed = 2,
  kUniformMinMax = 3,
  kFloatTrunc = 4,
};

struct CompressorKind {
  CodecTag tag = CodecTag::kIdentity;
  double M = 0.0;
  int rate = 0;        // R_mw or R_u
  int float_bits = 0;  // p
  std::vector<GenNormParams> frozen;  // per layer, MwL2Fixed only

  static CompressorKind identity() { return {}; }
  static CompressorKind mwl2_adaptive(double M, int rate) {
    return {CodecTag::kMwL2Adaptive, M, rate, 0, {}};
  }
  static CompressorKind mwl2_fixed(double M, int rate, std::vector<GenNormParams> frozen) {
    return {CodecTag::kMwL2Fixed, M, rate, 0, std::move(frozen)};
  }
  static CompressorKind uniform(int rate) { return {CodecTag::kUniformMinMax, 0.0, rate, 0, {}}; }
  static CompressorKind float_trunc(int p) { return {CodecTag::kFloatTrunc, 0.0, 0, p, {}}; }

  int per_entry_bits() const {
    switch (tag) {
      case CodecTag::kIdentity: return 32;
      case CodecTag::kFloatTrunc: return float_bits;
      default: return rate;
    }
  }

  void validate() const {
    switch (tag) {
      case CodecTag::kIdentity: return;
      case CodecTag::kFloatTrunc:
        if (float_bits != 16 && float_bits != 8) throw InvalidArgument("float width must be 16 or 8");
        return;
      case CodecTag::kMwL2Adaptive:
      case CodecTag::kMwL2Fixed:
        DistortionSpec{M}.validate();
        [[fallthrough]];
      case CodecTag::kUniformMinMax:
        if (rate < quantizer::kMinRate || rate > quantizer::kMaxRate) {
          throw InvalidArgument("rate must be in [1, 8]");
        }
        return;
    }
    throw InvalidArgument("unsupported codec");
  }
};

inline std::string to_string(CodecTag t) {
  switch (t) {
    case CodecTag::kIdentity: return "identity";
    case CodecTag::kMwL2Adaptive: return "mwl2";
    case CodecTag::kMwL2Fixed: return "mwl2-fixed";
    case CodecTag::kUniformMinMax: return "uniform";
    case CodecTag::kFloatTrunc: return "float";
  }
  return "unknown";
}

struct BlobHeader {
  CodecTag tag = CodecTag::kIdentity;
  std::uint8_t entry_bits = 32;
  std::uint32_t layer_id = 0;
  std::uint64_t d = 0;
  std::uint64_t K = 0;
  float mean = 0.0f;
  float stddev = 1.0f;
  float desc0 = 0.0f;  // beta (mw-L2) or min (uniform)
  float desc1 = 0.0f;  // M (mw-L2) or max (uniform)
};

namespace codec {

inline constexpr std::uint32_t kBlobMagic = 0x47424C42;  // "GBLB"
inline constexpr std::uint8_t kBlobVersion = 1;
inline constexpr std::uint64_t kCommonHeaderBits = 32 + 8 + 8 + 8 + 32 + 64 + 64 + 32 + 32 + 32;
inline constexpr std::uint64_t kDescriptorBits = 64;
inline constexpr std::size_t kCrcByteOffset = (kCommonHeaderBits - 32) / 8;

inline bool has_descriptor(CodecTag t) {
  return t == CodecTag::kMwL2Adaptive || t == CodecTag::kMwL2Fixed || t == CodecTag::kUniformMinMax;
}

inline std::uint64_t header_bits(CodecTag t) {
  return kCommonHeaderBits + (has_descriptor(t) ? kDescriptorBits : 0);
}

}  // namespace codec

struct CompressedBlob {
  BlobHeader header;
  SupportCode support;
  std::vector<std::uint32_t> payload;

  /// Exact serialized length before byte padding.
  std::uint64_t bit_length() const {
    return codec::header_bits(header.tag) + sparsify::support_bits(header.d, header.K) +
           header.K * header.entry_bits;
  }

  std::vector<std::uint8_t> to_bytes() const;
  static CompressedBlob from_bytes(std::span<const std::uint8_t> bytes);
};

namespace codec {

inline std::uint32_t crc_with_zeroed_field(std::span<const std::uint8_t> bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), kCrcByteOffset);
  const std::uint8_t zeros[4] = {0, 0, 0, 0};
  crc.process_bytes(zeros, 4);
  if (bytes.size() > kCrcByteOffset + 4) {
    crc.process_bytes(bytes.data() + kCrcByteOffset + 4, bytes.size() - kCrcByteOffset - 4);
  }
  return crc.checksum();
}

}  // namespace codec

inline std::vector<std::uint8_t> CompressedBlob::to_bytes() const {
  BitWriter w;
  w.put(codec::kBlobMagic, 32);
  w.put(codec::kBlobVersion, 8);
  w.put(static_cast<std::uint8_t>(header.tag), 8);
  w.put(header.entry_bits, 8);
  w.put(header.layer_id, 32);
  w.put(header.d, 64);
  w.put(header.K, 64);
  w.put_f32(header.mean);
  w.put_f32(header.stddev);
  w.put(0, 32);
  if (codec::has_descriptor(header.tag)) {
    w.put_f32(header.desc0);
    w.put_f32(header.desc1);
  }
  w.put_big(support.rank, sparsify::support_bits(header.d, header.K));
  for (std::uint32_t v : payload) w.put(v, header.entry_bits);

  auto bytes = std::move(w.bytes());
  const std::uint32_t crc = codec::crc_with_zeroed_field(bytes);
  for (int i = 0; i < 4; ++i) {
    bytes[codec::kCrcByteOffset + i] = static_cast<std::uint8_t>(crc >> (24 - 8 * i));
  }
  return bytes;
}

inline CompressedBlob CompressedBlob::from_bytes(std::span<const std::uint8_t> bytes) {
  const FormatError corrupt("corrupt blob");
  if (bytes.size() * 8 < codec::kCommonHeaderBits) throw corrupt;
  BitReader r(bytes);
  if (r.get(32) != codec::kBlobMagic || r.get(8) != codec::kBlobVersion) throw corrupt;
  const auto tag = static_cast<std::uint8_t>(r.get(8));
  CompressedBlob blob;
  auto& h = blob.header;
  h.entry_bits = static_cast<std::uint8_t>(r.get(8));
  h.layer_id = static_cast<std::uint32_t>(r.get(32));
  h.d = r.get(64);
  h.K = r.get(64);
  h.mean = r.get_f32();
  h.stddev = r.get_f32();
  const auto stored_crc = static_cast<std::uint32_t>(r.get(32));
  if (stored_crc != codec::crc_with_zeroed_field(bytes)) throw corrupt;
  if (tag > static_cast<std::uint8_t>(CodecTag::kFloatTrunc)) throw FormatError("unsupported codec");
  h.tag = static_cast<CodecTag>(tag);

  switch (h.tag) {
    case CodecTag::kIdentity:
      if (h.entry_bits != 32 || h.K != h.d) throw corrupt;
      break;
    case CodecTag::kFloatTrunc:
      if (h.entry_bits != 16 && h.entry_bits != 8) throw corrupt;
      break;
    default:
      if (h.entry_bits < quantizer::kMinRate || h.entry_bits > quantizer::kMaxRate) throw corrupt;
  }
  if (h.d == 0 || h.K > h.d || !std::isfinite(h.mean) || !std::isfinite(h.stddev) || h.stddev < 0.0f) {
    throw corrupt;
  }
  if (codec::has_descriptor(h.tag)) {
    h.desc0 = r.get_f32();
    h.desc1 = r.get_f32();
    if (!std::isfinite(h.desc0) || !std::isfinite(h.desc1)) throw corrupt;
  }
  // Reject lengths that cannot match before touching the (possibly huge) support.
  const std::uint64_t max_payload = (bytes.size() * 8 - r.position());
  if (h.K > max_payload) throw corrupt;
  const std::uint64_t total = blob.bit_length();
  if ((total + 7) / 8 != bytes.size()) throw corrupt;

  const std::uint64_t sbits = sparsify::support_bits(h.d, h.K);
  blob.support = {r.get_big(sbits), h.d, h.K};
  if (blob.support.rank >= sparsify::binomial(h.d, h.K)) throw corrupt;
  blob.payload.resize(h.K);
  for (auto& v : blob.payload) v = static_cast<std::uint32_t>(r.get(h.entry_bits));
  while (r.position() < r.size_bits()) {
    if (r.get_bit()) throw corrupt;
  }
  return blob;
}

struct CompressOptions {
  std::uint32_t layer_id = 0;
  // Shape to design the mw-L2 codebook for; fitted from the layer when absent.
  std::optional<double> beta;
};

namespace codec {

inline constexpr double kFallbackBeta = 2.0;

/// 2^rate levels spanning [lo, hi] inclusive of both endpoints.
inline std::vector<double> uniform_levels(double lo, double hi, int rate) {
  const std::size_t n = std::size_t{1} << rate;
  std::vector<double> levels(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) levels[i] = i + 1 == n ? hi : lo + step * static_cast<double>(i);
  return levels;
}

inline std::uint32_t uniform_index(double x, double lo, double hi, int rate) {
  const double top = static_cast<double>((std::uint32_t{1} << rate) - 1);
  if (!(hi > lo)) return 0;
  const double pos = std::nearbyint((x - lo) / (hi - lo) * top);
  return static_cast<std::uint32_t>(std::clamp(pos, 0.0, top));
}

inline float beta_for_layer(std::span<const double> normalized) {
  if (normalized.size() < gennorm::kFitMinSamples) return static_cast<float>(kFallbackBeta);
  try {
    return static_cast<float>(gennorm::fit(normalized).params.beta);
  } catch (const InvalidArgument&) {
    return static_cast<float>(kFallbackBeta);
  }
}

inline std::shared_ptr<const Codebook> mwl2_codebook(float beta, float M, int rate) {
  return quantizer::default_codebook_cache().get(beta, static_cast<double>(M), rate);
}

/// Mean and population standard deviation of g.
inline std::pair<double, double> moments(std::span<const float> g) {
  double sum = 0.0;
  for (float v : g) sum += v;
  const double mean = sum / static_cast<double>(g.size());
  double sq = 0.0;
  for (float v : g) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(g.size()))};
}

}  // namespace codec

inline CompressedBlob compress(std::span<const float> g, const CompressorKind& kind,
                               const RateBudget& budget, const CompressOptions& opts = {}) {
  kind.validate();
  budget.validate();
  if (g.size() != budget.d) throw InvalidArgument("dimension mismatch");
  for (float v : g) {
    if (!std::isfinite(v)) throw InvalidArgument("invalid input");
  }

  CompressedBlob blob;
  auto& h = blob.header;
  h.tag = kind.tag;
  h.entry_bits = static_cast<std::uint8_t>(kind.per_entry_bits());
  h.layer_id = opts.layer_id;
  h.d = g.size();

  if (kind.tag == CodecTag::kIdentity) {
    h.K = h.d;
    blob.support = {0, h.d, h.K};
    blob.payload.reserve(g.size());
    for (float v : g) {
      std::uint32_t u = 0;
      std::memcpy(&u, &v, sizeof u);
      blob.payload.push_back(u);
    }
    return blob;
  }
  if (static_cast<int>(std::ceil(budget.per_entry_bits)) != kind.per_entry_bits()) {
    throw InvalidArgument("budget per-entry bits do not match the codec");
  }

  const auto [mean, stddev] = codec::moments(g);
  h.mean = static_cast<float>(mean);
  h.stddev = static_cast<float>(stddev);
  if (kind.tag == CodecTag::kMwL2Adaptive || kind.tag == CodecTag::kMwL2Fixed) {
    h.desc1 = static_cast<float>(kind.M);
  }
  if (!(h.stddev > 0.0f)) {
    // Constant layer: header only, the decoder fills every entry with the mean.
    h.stddev = 0.0f;
    h.K = 0;
    blob.support = {0, h.d, 0};
    if (kind.tag == CodecTag::kMwL2Adaptive || kind.tag == CodecTag::kMwL2Fixed) {
      h.desc0 = static_cast<float>(codec::kFallbackBeta);
    }
    return blob;
  }

  const std::uint64_t K = sparsify::solve_k(budget);
  const TopK kept = sparsify::topk(g, K);
  h.K = K;
  blob.support = sparsify::rank_support(kept.indices, h.d, K);

  const double mu = static_cast<double>(h.mean);
  const double sigma = static_cast<double>(h.stddev);
  std::vector<double> z(K);
  for (std::size_t i = 0; i < K; ++i) z[i] = (kept.values[i] - mu) / sigma;

  blob.payload.resize(K);
  switch (kind.tag) {
    case CodecTag::kMwL2Adaptive:
    case CodecTag::kMwL2Fixed: {
      float beta = 0.0f;
      if (kind.tag == CodecTag::kMwL2Fixed) {
        if (opts.layer_id >= kind.frozen.size()) throw InvalidArgument("no frozen fit for layer");
        beta = static_cast<float>(kind.frozen[opts.layer_id].beta);
      } else if (opts.beta) {
        beta = static_cast<float>(*opts.beta);
      } else {
        std::vector<double> all(g.size());
        for (std::size_t j = 0; j < g.size(); ++j) all[j] = (g[j] - mu) / sigma;
        beta = codec::beta_for_layer(all);
      }
      h.desc0 = beta;
      const auto cb = codec::mwl2_codebook(h.desc0, h.desc1, kind.rate);
      for (std::size_t i = 0; i < K; ++i) {
        blob.payload[i] = static_cast<std::uint32_t>(quantizer::quantize(z[i], *cb));
      }
      break;
    }
    case CodecTag::kUniformMinMax: {
      const auto [lo, hi] = std::minmax_element(z.begin(), z.end());
      h.desc0 = static_cast<float>(*lo);
      h.desc1 = static_cast<float>(*hi);
      for (std::size_t i = 0; i < K; ++i) {
        blob.payload[i] = codec::uniform_index(z[i], h.desc0, h.desc1, kind.rate);
      }
      break;
    }
    case CodecTag::kFloatTrunc: {
      const auto fmt = minifloat::format_for_width(kind.float_bits);
      for (std::size_t i = 0; i < K; ++i) blob.payload[i] = minifloat::encode(z[i], fmt);
      break;
    }
    default:
      throw InvalidArgument("unsupported codec");
  }
  return blob;
}

inline CompressedBlob compress(const std::vector<float>& g, const CompressorKind& kind,
                               const RateBudget& budget, const CompressOptions& opts = {}) {
  return compress(std::span<const float>(g), kind, budget, opts);
}

inline std::vector<float> decompress(const CompressedBlob& blob) {
  const auto& h = blob.header;
  const FormatError corrupt("corrupt blob");
  if (blob.payload.size() != h.K || blob.support.K != h.K || blob.support.d != h.d) throw corrupt;
  std::vector<float> out(h.d, 0.0f);

  if (h.tag == CodecTag::kIdentity) {
    for (std::size_t j = 0; j < h.d; ++j) std::memcpy(&out[j], &blob.payload[j], sizeof(float));
    return out;
  }
  if (h.K == 0) {
    if (h.stddev != 0.0f) throw corrupt;
    std::fill(out.begin(), out.end(), h.mean);
    return out;
  }

  std::vector<std::uint64_t> support;
  try {
    support = sparsify::unrank_support(blob.support);
  } catch (const InvalidArgument&) {
    throw corrupt;
  }
  const double mu = static_cast<double>(h.mean);
  const double sigma = static_cast<double>(h.stddev);
  auto place = [&](std::size_t i, double z) { out[support[i]] = static_cast<float>(z * sigma + mu); };

  switch (h.tag) {
    case CodecTag::kMwL2Adaptive:
    case CodecTag::kMwL2Fixed: {
      if (!(h.desc0 > 0.0f) || h.desc1 < 0.0f) throw corrupt;
      const auto cb = codec::mwl2_codebook(h.desc0, h.desc1, h.entry_bits);
      for (std::size_t i = 0; i < h.K; ++i) place(i, quantizer::dequantize(blob.payload[i], *cb));
      break;
    }
    case CodecTag::kUniformMinMax: {
      const auto levels = codec::uniform_levels(h.desc0, h.desc1, h.entry_bits);
      for (std::size_t i = 0; i < h.K; ++i) {
        if (blob.payload[i] >= levels.size()) throw FormatError("invalid codeword");
        place(i, levels[blob.payload[i]]);
      }
      break;
    }
    case CodecTag::kFloatTrunc: {
      const auto fmt = minifloat::format_for_width(h.entry_bits);
      for (std::size_t i = 0; i < h.K; ++i) place(i, minifloat::decode(blob.payload[i], fmt));
      break;
    }
    default:
      throw FormatError("unsupported codec");
  }
  return out;
}

}  // namespace gradq
