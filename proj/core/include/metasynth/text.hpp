#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace metasynth::text {

/// True for code points carrying the Unicode White_Space property.
bool is_unicode_space(char32_t cp) noexcept;

/// Splits on runs of Unicode whitespace. Invalid UTF-8 bytes are treated as
/// ordinary (non-space) characters, so the function is total.
std::vector<std::string_view> split_whitespace(std::string_view s);

/// Word count used for every length rule in the project.
std::size_t count_words(std::string_view s);

std::string to_lower_ascii(std::string_view s);

/// Tokenizer shared by the lexical diversity metrics: ASCII lowercase, then
/// whitespace split. Punctuation is kept.
std::vector<std::string> lexical_tokens(std::string_view s);

/// Tokenizer for contamination matching: lowercase, punctuation removed,
/// whitespace collapsed.
std::vector<std::string> normalized_tokens(std::string_view s);

std::string_view trim(std::string_view s) noexcept;

bool icontains(std::string_view haystack, std::string_view needle);

bool iequals(std::string_view a, std::string_view b) noexcept;

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// 64-bit FNV-1a; used for config and corpus-order fingerprints.
std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

std::string hex64(std::uint64_t v);

/// Inner text of every `<tag>...</tag>` occurrence, in order, untrimmed.
/// Unclosed openings are ignored.
std::vector<std::string> extract_tagged(std::string_view s, std::string_view tag);

/// Parses a keyword list such as "[alpha, beta, gamma]". Without brackets the
/// whole string is split on commas and newlines. Quotes and bullets are
/// stripped; empty items dropped.
std::vector<std::string> parse_list(std::string_view s);

/// Replaces every occurrence of `from` with `to`.
std::string replace_all(std::string s, std::string_view from, std::string_view to);

}  // namespace metasynth::text
