#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "memfly/config.hpp"
#include "memfly/construction.hpp"
#include "memfly/embedding.hpp"
#include "memfly/policy.hpp"
#include "memfly/retrieval.hpp"

namespace memfly {

enum class Category { MultiHop, Temporal, OpenDomain, SingleHop, Adversarial };

inline constexpr Category kAllCategories[] = {Category::SingleHop, Category::MultiHop, Category::Temporal,
                                              Category::OpenDomain, Category::Adversarial};

std::string_view to_string(Category c) noexcept;
/// Accepts snake_case, kebab-case or spaced names, any case.
std::optional<Category> category_from_string(std::string_view s);

/// Question counts per category of the public LoCoMo release (1,986 total).
const std::map<Category, int>& locomo_category_counts();

struct Turn {
    std::string speaker;
    std::string text;
    std::string turn_id;
    std::string date;
};

struct Session {
    std::string session_id;
    std::vector<Turn> turns;
};

struct QaPair {
    std::string question;
    std::string gold_answer;
    Category category = Category::SingleHop;
    std::vector<std::string> evidence_turn_ids;
};

struct ConversationDataset {
    std::vector<Session> sessions;
    std::vector<QaPair> qa_pairs;

    /// Throws DatasetFormat on duplicate turn ids or dangling evidence ids.
    void validate() const;
    std::size_t turn_count() const;
};

/// Builds a dataset from in-memory documents: each session is JSONL with one
/// {speaker, text, turn_id, date?} object per line, qa is a JSON array of
/// {question, gold_answer, category, evidence_turn_ids}. Throws DatasetFormat.
ConversationDataset parse_dataset(const std::vector<std::pair<std::string, std::string>>& sessions_jsonl,
                                  const std::string& qa_json);

/// Directory layout: sessions/*.jsonl (read in file-name order, the stem is
/// the session id) and qa.json. Throws Io or DatasetFormat.
ConversationDataset load_dataset(const std::filesystem::path& dir);

namespace metrics {

/// Lowercase, ASCII punctuation removed, split on whitespace.
std::vector<std::string> normalize_tokens(std::string_view s);

double token_f1(std::string_view prediction, std::string_view gold);
double bleu1(std::string_view prediction, std::string_view gold);
double retrieval_recall(std::span<const std::string> retrieved, std::span<const std::string> gold);
double hit_rate(std::span<const std::string> retrieved, std::span<const std::string> gold);

/// sum(score_c * n_c) / sum(n_c) over categories present in both maps.
template <class K>
double weighted_average(const std::map<K, double>& scores, const std::map<K, double>& counts) {
    double num = 0.0, den = 0.0;
    for (const auto& [k, s] : scores) {
        auto it = counts.find(k);
        if (it == counts.end()) continue;
        num += s * it->second;
        den += it->second;
    }
    return den == 0.0 ? 0.0 : num / den;
}

/// Base-2 Jensen-Shannon divergence. Throws Precondition when the supports
/// differ in size or either input is not a distribution.
double js_divergence(std::span<const double> p, std::span<const double> q);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

} // namespace metrics

struct AblationConfig {
    bool disable_update = false;
    bool disable_denoise = false;
    bool disable_link = false;
    bool disable_merge = false;
    bool disable_topic_pathway = false;
    bool disable_keyword_pathway = false;
    bool disable_neighbor = false;
    bool disable_ier = false;

    IngestOptions ingest_options() const;
    RetrievalSwitches retrieval_switches() const;
    /// "full" or the enabled flags joined with '+', e.g. "no-update+no-ier".
    std::string label() const;

    bool operator==(const AblationConfig&) const = default;
};

struct Scores {
    std::size_t count = 0;
    double f1 = 0.0;
    double bleu1 = 0.0;
    double recall = 0.0;
    double hit_rate = 0.0;
};

struct QuestionRecord {
    std::size_t index = 0;
    std::string question;
    std::string gold_answer;
    Category category = Category::SingleHop;
    std::string prediction;
    double f1 = 0.0;
    double bleu1 = 0.0;
    double recall = 0.0;
    double hit_rate = 0.0;
    std::size_t pool_size = 0;
    int iterations = 0;
    std::optional<std::string> error;
};

struct EvalReport {
    AblationConfig ablation;
    std::map<Category, Scores> per_category;
    Scores weighted;  // category means weighted by question count
    std::vector<QuestionRecord> questions;
    IbDiagnostics diagnostics;

    nlohmann::ordered_json to_json() const;
    /// Aligned-column table: one row per category plus the weighted row.
    std::string to_table() const;
};

/// Ingests every turn session by session, evolves topics once more, then
/// answers each question through iterative retrieval and the policy's answer
/// call. Question failures are recorded, not thrown.
EvalReport run_benchmark(const ConversationDataset& dataset, const EngineConfig& config,
                         const AblationConfig& ablation, const Policy& policy, const EmbeddingProvider& embedder);

} // namespace memfly
