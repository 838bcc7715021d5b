#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace spamprop {

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

/// Splits a line on a single-character delimiter; no quoting.
std::vector<std::string_view> split(std::string_view line, char delim);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace spamprop
