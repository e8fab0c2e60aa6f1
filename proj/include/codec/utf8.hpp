#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// Minimal UTF-8 helpers. "Character" everywhere in this project means a
// Unicode scalar value, never a byte.
namespace codec::utf8 {

// Throws DataError on malformed input (overlongs, surrogates, truncation).
std::u32string decode(std::string_view text);

void append(std::string& out, char32_t cp);
std::string encode(std::u32string_view cps);

// Number of scalar values; throws DataError on malformed input.
std::size_t length(std::string_view text);

// Byte offset of the scalar value with index `cp_index` (== text.size() when
// cp_index equals the length).
std::size_t byte_offset(std::string_view text, std::size_t cp_index);

std::string substr(std::string_view text, std::size_t cp_start, std::size_t cp_count);

bool is_valid(std::string_view text) noexcept;

}  // namespace codec::utf8
