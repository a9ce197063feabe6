#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace psat {

// One lowercase token plus its character span [begin, end) in the source
// text. Spans index the original (unfolded) string.
struct Token {
    std::string text;
    std::size_t begin = 0;
    std::size_t end = 0;
};

// Splits on non-alphanumeric characters with ASCII lowercase folding.
// Apostrophes are retained inside tokens ("can't") but trimmed at token
// edges. Bytes >= 0x80 (UTF-8 continuations and non-ASCII starts) are
// treated as word characters and passed through unchanged.
std::vector<Token> tokenize(std::string_view text);

std::string lowercase_ascii(std::string_view s);

// Joins tokens with underscores: {"feeling","really","low"} ->
// "feeling_really_low".
std::string join_underscore(const std::vector<std::string>& tokens);

// Inverse convenience for display: underscores -> spaces.
std::string underscores_to_spaces(std::string_view phrase);

std::vector<std::string> split(std::string_view s, char sep);

}  // namespace psat
