#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pocfuse::text {

/// Replaces every invalid UTF-8 sequence with U+FFFD. Valid input is returned unchanged.
std::string sanitize_utf8(std::string_view in);

std::string_view trim(std::string_view s);

/// ASCII lower-casing; multi-byte sequences pass through untouched.
std::string to_lower(std::string_view s);

/// Lower-cased, trimmed form used for every case-insensitive equality in the pipeline.
std::string fold(std::string_view s);

bool fold_equal(std::string_view a, std::string_view b);

/// Case-insensitive substring test (ASCII folding).
bool fold_contains(std::string_view haystack, std::string_view needle);

inline bool is_word_char(char c) {
    const auto u = static_cast<unsigned char>(c);
    return (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || u == '_' ||
           u >= 0x80;
}

struct Line {
    std::size_t begin = 0;  // offset of first char
    std::size_t end = 0;    // offset one past last char, excluding the newline
    std::string_view text;
};

/// Splits on '\n'; a trailing '\r' is kept out of the line text.
std::vector<Line> split_lines(std::string_view s);

}  // namespace pocfuse::text
