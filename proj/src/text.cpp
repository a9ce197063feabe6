#include "psat/text.hpp"

#include <cctype>

namespace psat {

namespace {

bool is_word_byte(unsigned char c) {
    return std::isalnum(c) != 0 || c >= 0x80;
}

}  // namespace

std::string lowercase_ascii(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    }
    return out;
}

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (!is_word_byte(c)) {
            ++i;
            continue;
        }
        std::size_t begin = i;
        while (i < n) {
            unsigned char cur = static_cast<unsigned char>(text[i]);
            if (is_word_byte(cur)) {
                ++i;
            } else if (cur == '\'' && i + 1 < n &&
                       is_word_byte(static_cast<unsigned char>(text[i + 1]))) {
                // interior apostrophe, as in "can't"
                ++i;
            } else {
                break;
            }
        }
        tokens.push_back(Token{lowercase_ascii(text.substr(begin, i - begin)), begin, i});
    }
    return tokens;
}

std::string join_underscore(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back('_');
        out += tokens[i];
    }
    return out;
}

std::string underscores_to_spaces(std::string_view phrase) {
    std::string out(phrase);
    for (char& c : out) {
        if (c == '_') c = ' ';
    }
    return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            parts.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return parts;
}

}  // namespace psat
