#pragma once

// Locale-independent number formatting for CSV output.

#include <charconv>
#include <cstdint>
#include <string>
#include <system_error>

namespace gradq::csv {

/// Shortest text that parses back to exactly `x`.
inline std::string num(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

/// `digits` significant digits.
inline std::string num(double x, int digits) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, digits);
  return {buf, res.ptr};
}

inline std::string num(std::uint64_t x) { return std::to_string(x); }

inline bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last && first != last;
}

inline bool parse_uint(const std::string& s, std::uint64_t& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && !s.empty();
}

}  // namespace gradq::csv
