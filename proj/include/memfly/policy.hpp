#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "memfly/embedding.hpp"
#include "memfly/ids.hpp"
#include "memfly/memory_graph.hpp"

namespace memfly {

struct ChatRequest {
    std::string system;
    std::string user;
    double temperature = 0.7;
};

/// Text completion backend. Shareable across threads.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    /// Throws RemoteFailure once retries are exhausted.
    virtual std::string complete(const ChatRequest& request) const = 0;
};

// OpenAI-style chat completions: POST {base}/chat/completions with
// {model, temperature, messages}, reading choices[0].message.content.
class RemoteChatClient final : public ChatClient {
public:
    /// api_key falls back to MEMFLY_LLM_API_KEY when left empty.
    explicit RemoteChatClient(RemoteEndpoint endpoint);
    std::string complete(const ChatRequest& request) const override;

private:
    RemoteEndpoint endpoint_;
};

struct IngestResult {
    std::vector<std::string> keywords;  // canonical, deduplicated, at most 5
    std::string context;

    bool operator==(const IngestResult&) const = default;
};

struct CandidateJudgment {
    NoteId candidate;
    RelationType relation_type = RelationType::RelatedTo;
    double connection_strength = 0.0;
    std::optional<std::string> merged_context;

    bool operator==(const CandidateJudgment&) const = default;
};

struct QueryIntent {
    std::string topic_desc;
    std::vector<std::string> keywords;

    bool operator==(const QueryIntent&) const = default;
};

struct SufficiencyVerdict {
    bool sufficient = true;
    std::string missing_info;
    double confidence = 0.0;

    bool operator==(const SufficiencyVerdict&) const = default;
};

/// What a policy sees of a note: its latest verbatim text, context and
/// keyword surfaces.
struct NoteView {
    NoteId id;
    std::string content;
    std::string context;
    std::vector<std::string> keywords;
};

NoteView make_view(const MemoryGraph& g, const Note& n);

// Every LLM-mediated decision of the engine. Implementations are const and
// thread-safe; all of them return documented fallbacks instead of failing on
// malformed model output.
class Policy {
public:
    virtual ~Policy() = default;

    /// Requires non-blank raw text (Precondition otherwise).
    virtual IngestResult ingest_parse(std::string_view raw, std::string_view speaker) const = 0;

    /// One judgment per candidate the policy could score, in candidate order.
    /// Requires a non-empty candidate list.
    virtual std::vector<CandidateJudgment> judge_candidates(const NoteView& new_note,
                                                            std::span<const NoteView> candidates) const = 0;

    /// Requires a non-blank query.
    virtual QueryIntent parse_query_intent(std::string_view query) const = 0;

    virtual SufficiencyVerdict judge_sufficiency(std::string_view evidence, std::string_view query) const = 0;

    virtual std::optional<std::string> generate_subquery(std::string_view query, std::string_view evidence,
                                                         std::string_view history,
                                                         std::optional<std::string_view> missing_info) const = 0;

    /// Final answer over the rendered pool. ranked_contexts lists note
    /// contexts in pool order.
    virtual std::string answer(std::string_view query, std::string_view evidence,
                               std::span<const std::string> ranked_contexts, double temperature) const = 0;
};

/// Prompts a ChatClient with the memory templates and parses the replies.
class LlmPolicy final : public Policy {
public:
    struct Options {
        double tau_merge = 0.7;
        double temperature = 0.7;
        std::string answer_template;  // empty: built-in default
    };

    LlmPolicy(std::shared_ptr<const ChatClient> client, Options options);

    IngestResult ingest_parse(std::string_view raw, std::string_view speaker) const override;
    std::vector<CandidateJudgment> judge_candidates(const NoteView& new_note,
                                                    std::span<const NoteView> candidates) const override;
    QueryIntent parse_query_intent(std::string_view query) const override;
    SufficiencyVerdict judge_sufficiency(std::string_view evidence, std::string_view query) const override;
    std::optional<std::string> generate_subquery(std::string_view query, std::string_view evidence,
                                                 std::string_view history,
                                                 std::optional<std::string_view> missing_info) const override;
    std::string answer(std::string_view query, std::string_view evidence, std::span<const std::string> ranked_contexts,
                       double temperature) const override;

private:
    std::shared_ptr<const ChatClient> client_;
    Options options_;
};

// Offline stand-in with fixed token rules:
//   keywords    content tokens (stop list removed, singularized), first five
//   context     the input itself
//   redundancy  max(0, cosine) of the embedded contexts
//   complement  Jaccard overlap of the keyword surfaces
// The larger score decides the relation (ties go to SUPPORTS).
class MockPolicy final : public Policy {
public:
    explicit MockPolicy(std::shared_ptr<const EmbeddingProvider> embedder, double tau_merge = 0.7);

    IngestResult ingest_parse(std::string_view raw, std::string_view speaker) const override;
    std::vector<CandidateJudgment> judge_candidates(const NoteView& new_note,
                                                    std::span<const NoteView> candidates) const override;
    QueryIntent parse_query_intent(std::string_view query) const override;
    SufficiencyVerdict judge_sufficiency(std::string_view evidence, std::string_view query) const override;
    std::optional<std::string> generate_subquery(std::string_view query, std::string_view evidence,
                                                 std::string_view history,
                                                 std::optional<std::string_view> missing_info) const override;
    std::string answer(std::string_view query, std::string_view evidence, std::span<const std::string> ranked_contexts,
                       double temperature) const override;

    /// max(0, cosine(embed(a), embed(b))).
    double redundancy(std::string_view context_a, std::string_view context_b) const;
    static double complementarity(const std::vector<std::string>& a, const std::vector<std::string>& b);

private:
    std::shared_ptr<const EmbeddingProvider> embedder_;
    double tau_merge_;
};

// Parsers shared by LlmPolicy; exposed for testing. Each is total: it
// returns nullopt instead of throwing on any input.
namespace parse {

/// Accepts bare JSON, JSON inside ``` fences, or JSON after leading prose.
std::optional<nlohmann::json> extract_json(std::string_view text);

std::optional<IngestResult> ingest_response(std::string_view text, std::string_view raw);
/// Judgments for known candidate ids (positional when the model omits ids).
std::optional<std::vector<CandidateJudgment>> judgments_response(std::string_view text,
                                                                 std::span<const NoteId> candidate_ids);
std::optional<QueryIntent> query_intent_response(std::string_view text);
std::optional<SufficiencyVerdict> sufficiency_response(std::string_view text);
/// nullopt for "None" (any case, quoted or not) or blank output.
std::optional<std::string> subquery_response(std::string_view text);

std::vector<std::string> canonical_keywords(const std::vector<std::string>& raw, std::size_t cap = 5);

} // namespace parse

/// Query intent used when the model reply is unusable: the query cut to
/// eight words and its content tokens.
QueryIntent fallback_query_intent(std::string_view query);

} // namespace memfly
