#pragma once

#include <map>
#include <string>
#include <string_view>

namespace memfly::prompts {

// Placeholders are {name}. Any other brace text (the JSON examples) is left
// alone by render().

/// Placeholders: {content}
extern const std::string_view kSemanticIngestion;
/// Placeholders: {content} {context} {keywords} {candidates_str}
extern const std::string_view kGatedUpdate;
/// Placeholders: {query}
extern const std::string_view kQueryIntent;
/// Placeholders: {question} {context}
extern const std::string_view kSufficiency;
/// Placeholders: {query_str} {context_str} {prev_reasoning} {missing_info}
extern const std::string_view kSubQuery;
/// Placeholders: {context} {question}
extern const std::string_view kDefaultAnswer;

/// System-side schema reminder for the gated update call; the user prompt
/// itself names no schema.
extern const std::string_view kGatedUpdateSchema;

/// Single-pass substitution: substituted values are never re-scanned.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars);

} // namespace memfly::prompts
