#pragma once

// UTF-8 helpers shared by corpus loading and corpus filtering.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace iilm::text {

// Byte offset of the first malformed sequence, or nullopt when s is valid UTF-8.
std::optional<std::size_t> find_invalid_utf8(std::string_view s);

// Decodes valid UTF-8 into code points. Malformed bytes decode as U+FFFD.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

std::size_t codepoint_count(std::string_view s);

bool is_space(char32_t c);
// Unicode general category Nd.
bool is_decimal_digit(char32_t c);

// Maximal runs of non-whitespace code points.
std::vector<std::string> split_words(std::string_view s);
std::string_view trim(std::string_view s);

}  // namespace iilm::text
