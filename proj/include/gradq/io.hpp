#pragma once

// Little-endian binary file helpers and the gradient tensor format:
//   "GRDC" | u8 version (1) | u64 d | d x f32

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "gradq/error.hpp"

namespace gradq::io {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

inline constexpr char kTensorMagic[4] = {'G', 'R', 'D', 'C'};
inline constexpr std::uint8_t kTensorVersion = 1;

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("cannot write " + path);
}

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  template <typename T>
  T get() {
    T v{};
    if (bytes_.size() - pos_ < sizeof(T)) throw FormatError("truncated " + what_);
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void expect_magic(const char (&magic)[4]) {
    if (bytes_.size() < 4 || std::memcmp(bytes_.data(), magic, 4) != 0) {
      throw FormatError("bad magic in " + what_);
    }
    pos_ = 4;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_raw(const char* data, std::size_t n) {
    bytes_.insert(bytes_.end(), reinterpret_cast<const std::uint8_t*>(data),
                  reinterpret_cast<const std::uint8_t*>(data) + n);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

inline std::vector<std::uint8_t> encode_tensor(std::span<const float> values) {
  ByteWriter w;
  w.put_raw(kTensorMagic, 4);
  w.put(kTensorVersion);
  w.put(static_cast<std::uint64_t>(values.size()));
  for (float v : values) w.put(v);
  return std::move(w.bytes());
}

inline std::vector<float> decode_tensor(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "tensor file");
  r.expect_magic(kTensorMagic);
  if (r.get<std::uint8_t>() != kTensorVersion) throw FormatError("unsupported tensor version");
  const auto d = r.get<std::uint64_t>();
  if (r.remaining() / sizeof(float) < d) throw FormatError("truncated tensor file");
  std::vector<float> out(d);
  for (auto& v : out) v = r.get<float>();
  if (r.remaining() != 0) throw FormatError("trailing data in tensor file");
  return out;
}

inline std::vector<float> read_tensor(const std::string& path) { return decode_tensor(read_file(path)); }

inline void write_tensor(const std::string& path, std::span<const float> values) {
  write_file(path, encode_tensor(values));
}

}  // namespace gradq::io
