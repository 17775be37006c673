#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace rrg {

// Word tokenization rule shared by corpus statistics, the model vocabulary
// and all text metrics: lowercase, drop punctuation, split on whitespace.
// Bytes >= 0x80 are treated as word characters and kept verbatim.
std::vector<std::string> tokenize_words(std::string_view text);

// Whitespace split without case folding or punctuation handling.
std::vector<std::string> split_whitespace(std::string_view text);

std::string to_lower(std::string_view text);

// TSV field escaping: tab, newline, carriage return and backslash are
// written as \t, \n, \r and \\ so records stay one-per-line.
std::string escape_tsv(std::string_view field);
std::string unescape_tsv(std::string_view field);

// Shortest round-trip formatting; parse accepts exactly what format emits.
std::string format_double(double v);
double parse_double(std::string_view s);

std::string join(const std::vector<std::string>& tokens, std::string_view sep);

}  // namespace rrg
