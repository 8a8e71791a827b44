// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace overgen::text {

/// Splits UTF-8 into code points, each kept as its own byte string. Invalid
/// sequences are passed through byte by byte.
std::vector<std::string_view> code_points(std::string_view utf8);

std::size_t code_point_count(std::string_view utf8);

/// Strips ASCII whitespace, U+00A0 and U+3000 from both ends.
std::string_view trim(std::string_view s);

inline bool is_blank(std::string_view s) { return trim(s).empty(); }

/// "1,234,567"
std::string with_thousands(std::uint64_t value);

std::string to_hex(std::uint64_t value, int digits);

}  // namespace overgen::text
