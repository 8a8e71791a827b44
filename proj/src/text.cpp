// SPDX-License-Identifier: Apache-2.0

#include "overgen/text.hpp"

namespace overgen::text {

namespace {

std::size_t sequence_length(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead & 0xE0) == 0xC0) return 2;
    if ((lead & 0xF0) == 0xE0) return 3;
    if ((lead & 0xF8) == 0xF0) return 4;
    return 1;
}

bool continuation_ok(std::string_view s, std::size_t pos, std::size_t len) {
    if (pos + len > s.size()) return false;
    for (std::size_t i = 1; i < len; ++i) {
        if ((static_cast<unsigned char>(s[pos + i]) & 0xC0) != 0x80) return false;
    }
    return true;
}

constexpr std::string_view kNbsp = "\xC2\xA0";
constexpr std::string_view kIdeographicSpace = "\xE3\x80\x80";

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::vector<std::string_view> code_points(std::string_view utf8) {
    std::vector<std::string_view> out;
    out.reserve(utf8.size());
    std::size_t pos = 0;
    while (pos < utf8.size()) {
        std::size_t len = sequence_length(static_cast<unsigned char>(utf8[pos]));
        if (!continuation_ok(utf8, pos, len)) len = 1;
        out.push_back(utf8.substr(pos, len));
        pos += len;
    }
    return out;
}

std::size_t code_point_count(std::string_view utf8) {
    std::size_t n = 0;
    std::size_t pos = 0;
    while (pos < utf8.size()) {
        std::size_t len = sequence_length(static_cast<unsigned char>(utf8[pos]));
        if (!continuation_ok(utf8, pos, len)) len = 1;
        pos += len;
        ++n;
    }
    return n;
}

std::string_view trim(std::string_view s) {
    bool changed = true;
    while (changed && !s.empty()) {
        changed = false;
        if (is_ascii_space(s.front())) {
            s.remove_prefix(1);
            changed = true;
        } else if (s.starts_with(kNbsp)) {
            s.remove_prefix(kNbsp.size());
            changed = true;
        } else if (s.starts_with(kIdeographicSpace)) {
            s.remove_prefix(kIdeographicSpace.size());
            changed = true;
        }
    }
    changed = true;
    while (changed && !s.empty()) {
        changed = false;
        if (is_ascii_space(s.back())) {
            s.remove_suffix(1);
            changed = true;
        } else if (s.ends_with(kNbsp)) {
            s.remove_suffix(kNbsp.size());
            changed = true;
        } else if (s.ends_with(kIdeographicSpace)) {
            s.remove_suffix(kIdeographicSpace.size());
            changed = true;
        }
    }
    return s;
}

std::string with_thousands(std::uint64_t value) {
    std::string digits = std::to_string(value);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i != 0 && (digits.size() - i) % 3 == 0) out.push_back(',');
        out.push_back(digits[i]);
    }
    return out;
}

std::string to_hex(std::uint64_t value, int digits) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(static_cast<std::size_t>(digits), '0');
    for (int i = digits - 1; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kHex[value & 0xF];
        value >>= 4;
    }
    return out;
}

}  // namespace overgen::text
