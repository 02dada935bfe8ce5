#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace memfly::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

/// Lowercased maximal runs of ASCII alphanumerics (plus any non-ASCII byte,
/// so UTF-8 words stay whole).
std::vector<std::string> tokenize(std::string_view s);

/// Crude English singular form: "ies" -> "y", "sses"/"xes"/"ches"/"shes" ->
/// drop "es", trailing "s" dropped unless the word ends in "ss", "us" or "is"
/// or is shorter than four letters.
std::string singularize(std::string_view word);

/// Canonical keyword surface: trimmed, lowercased, inner whitespace collapsed,
/// last word singularized.
std::string canonical_keyword(std::string_view phrase);

/// Function words and high-frequency verbs that never become keywords.
bool is_stop_word(std::string_view lowered_token);

/// Tokens that are neither stop words nor pure digits, singularized, in
/// first-occurrence order, deduplicated.
std::vector<std::string> content_tokens(std::string_view s);

/// First `max_words` whitespace-separated words of s.
std::string truncate_words(std::string_view s, std::size_t max_words);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

} // namespace memfly::text
