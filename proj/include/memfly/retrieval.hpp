#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "memfly/dense_index.hpp"
#include "memfly/embedding.hpp"
#include "memfly/fusion.hpp"
#include "memfly/memory_graph.hpp"
#include "memfly/policy.hpp"

namespace memfly {

enum class Pathway { Topic, Keyword };

struct PathwayResult {
    Pathway pathway = Pathway::Topic;
    Ranked<NoteId> notes;
};

struct RetrievalSwitches {
    bool disable_topic = false;
    bool disable_keyword = false;
    bool disable_neighbor = false;
    bool disable_ier = false;
};

struct EvidencePool {
    Ranked<NoteId> ranked;     // fused notes first, then expanded ones (score 0)
    std::set<NoteId> anchors;  // pathway hits that made it into `ranked`
    std::set<NoteId> expanded;
    int iteration = 0;

    bool contains(NoteId id) const;
    std::vector<NoteId> ids() const;
};

struct IterationTrace {
    int iteration = 0;
    std::string query;
    QueryIntent intent;
    std::vector<NoteId> topic_hits;
    std::vector<NoteId> keyword_hits;
    Ranked<NoteId> fused;
    std::vector<NoteId> expanded;
    std::vector<NoteId> added;  // notes this round contributed to the pool
    std::optional<SufficiencyVerdict> verdict;
    std::optional<std::string> subquery;
};

struct RetrievalTrace {
    std::vector<IterationTrace> iterations;
    int sufficiency_calls = 0;

    nlohmann::json to_json() const;
};

/// Top-k_topic topics by centroid cosine; every note anchored to one of their
/// keywords, scored by its best topic's cosine.
PathwayResult pathway_topic(const MemoryGraph& g, std::span<const double> h_topic);

/// Union of the top-k_key keywords per query key; every note holding one of
/// them, scored by the best matched keyword's cosine.
PathwayResult pathway_keyword(const MemoryGraph& g, const std::vector<Vector>& h_keys);

/// Notes within `hops` related-edge steps of an anchor, in either direction,
/// excluding the anchors.
std::set<NoteId> topological_expand(const MemoryGraph& g, const std::set<NoteId>& anchors, int hops);

/// Fusion, truncation and expansion over precomputed pathway results.
EvidencePool assemble_pool(const MemoryGraph& g, const PathwayResult& topic, const PathwayResult& keyword,
                           const RetrievalSwitches& switches = {}, IterationTrace* trace = nullptr);

/// Embeds the intent: topic description and one vector per keyword.
struct QueryVectors {
    Vector topic;
    std::vector<Vector> keys;
};
QueryVectors embed_intent(const QueryIntent& intent, std::string_view query, const EmbeddingProvider& embedder);

/// Intent parsing falls back to fallback_query_intent on RemoteFailure.
QueryIntent query_intent_or_fallback(const Policy& policy, std::string_view query);

EvidencePool retrieve_once(const MemoryGraph& g, std::string_view query, const Policy& policy,
                           const EmbeddingProvider& embedder, const RetrievalSwitches& switches = {},
                           IterationTrace* trace = nullptr);

struct RetrievalResult {
    EvidencePool pool;
    RetrievalTrace trace;
};

/// retrieve_once, then at most i_max rounds of sufficiency check, sub-query
/// and union with the sub-query's pool. Total under any policy behaviour.
RetrievalResult retrieve_iterative(const MemoryGraph& g, std::string_view query, const Policy& policy,
                                   const EmbeddingProvider& embedder, const RetrievalSwitches& switches = {});

/// One line per pool entry in rank order:
///   "- <context> (raw: <speaker>: <first segment>, <date or t=timestamp>)"
std::string render_pool(const MemoryGraph& g, const EvidencePool& pool);

/// Note contexts in pool order.
std::vector<std::string> pool_contexts(const MemoryGraph& g, const EvidencePool& pool);

/// Source turn ids of every raw segment in the pool, in pool order.
std::vector<std::string> pool_turn_ids(const MemoryGraph& g, const EvidencePool& pool);

} // namespace memfly
