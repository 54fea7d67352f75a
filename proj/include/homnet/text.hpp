#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "homnet/error.hpp"

namespace homnet::detail {

// Splits on `sep`; the last field keeps the remainder once max_fields is hit.
inline std::vector<std::string_view> split(std::string_view line, char sep,
                                           std::size_t max_fields = SIZE_MAX) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (out.size() + 1 < max_fields) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) break;
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  out.push_back(line.substr(start));
  return out;
}

inline std::vector<std::string_view> split_tabs(std::string_view line, std::size_t max_fields) {
  return split(line, '\t', max_fields);
}

inline std::string_view chomp(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::uint64_t parse_count(std::string_view field, std::size_t line_no) {
  std::uint64_t value = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ParseError("expected a nonnegative count, got '" + std::string(field) + "'", line_no);
  }
  return value;
}

inline double parse_real(std::string_view field, std::size_t line_no) {
  field = trim(field);
  double value = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty() || !std::isfinite(value)) {
    throw ParseError("expected a finite real, got '" + std::string(field) + "'", line_no);
  }
  return value;
}

// Shortest representation that round-trips.
inline std::string format_real(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace homnet::detail
