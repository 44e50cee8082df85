#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace adrpipe {

// All character offsets in this library count Unicode code points, never
// bytes. Review text is stored as UTF-8 and decoded on demand.

// Invalid UTF-8 decodes to one U+FFFD per offending byte so that offsets
// into byte-garbled files stay usable.
std::u32string decode_utf8(std::string_view bytes);
std::string encode_utf8(std::u32string_view cps);

bool is_space_cp(char32_t cp);
bool is_punct_cp(char32_t cp);

// ASCII + Latin-1 case mapping; enough for drug names and English reviews.
char32_t lower_cp(char32_t cp);
char32_t upper_cp(char32_t cp);

std::string lower_copy(std::string_view s);
std::string upper_copy(std::string_view s);

// Trim and collapse internal whitespace runs to a single space.
std::string normalize_ws(std::string_view s);

// lowercase + whitespace collapse: the normal form for gazetteer phrases.
std::string normalize_phrase(std::string_view s);

// uppercase + whitespace collapse: the normal form for drug names.
std::string normalize_drug(std::string_view s);

// A token is a maximal run of code points that are neither whitespace nor
// punctuation. begin/end are code-point offsets into the decoded text.
struct Token {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::u32string text;
};

std::vector<Token> tokenize(const std::u32string& text);

// Lowercased UTF-8 token strings, offsets dropped.
std::vector<std::string> tokenize_lower(std::string_view text);

std::u32string slice(const std::u32string& text, std::size_t begin, std::size_t end);

}  // namespace adrpipe
