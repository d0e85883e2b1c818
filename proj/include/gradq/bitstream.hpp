#pragma once

// MSB-first bit packing over a byte vector.

#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "gradq/error.hpp"
#include "gradq/sparsify.hpp"

namespace gradq {

class BitWriter {
 public:
  void put(std::uint64_t value, unsigned width) {
    for (unsigned i = width; i-- > 0;) put_bit((value >> i) & 1u);
  }

  void put_bit(bool bit) {
    if (bits_ % 8 == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (bits_ % 8));
    ++bits_;
  }

  void put_f32(float v) {
    std::uint32_t u = 0;
    std::memcpy(&u, &v, sizeof u);
    put(u, 32);
  }

  /// `value` as exactly `width` bits, big-endian.
  void put_big(const BigUint& value, std::uint64_t width) {
    for (std::uint64_t i = width; i-- > 0;) put_bit(boost::multiprecision::bit_test(value, i));
  }

  std::uint64_t bit_count() const { return bits_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t bits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool get_bit() {
    if (pos_ >= bytes_.size() * 8) throw FormatError("corrupt blob");
    const bool bit = (bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
    ++pos_;
    return bit;
  }

  std::uint64_t get(unsigned width) {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < width; ++i) v = (v << 1) | static_cast<std::uint64_t>(get_bit());
    return v;
  }

  float get_f32() {
    const auto u = static_cast<std::uint32_t>(get(32));
    float v = 0.0f;
    std::memcpy(&v, &u, sizeof v);
    return v;
  }

  BigUint get_big(std::uint64_t width) {
    BigUint v = 0;
    for (std::uint64_t i = 0; i < width; ++i) {
      v <<= 1;
      if (get_bit()) v |= 1;
    }
    return v;
  }

  std::uint64_t position() const { return pos_; }
  std::uint64_t size_bits() const { return bytes_.size() * 8; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t pos_ = 0;
};

}  // namespace gradq
