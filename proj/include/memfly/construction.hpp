#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "memfly/embedding.hpp"
#include "memfly/memory_graph.hpp"
#include "memfly/policy.hpp"

namespace memfly {

enum class Operation { Merged, Linked, Appended };

std::string_view to_string(Operation op) noexcept;

struct IngestReport {
    NoteId note_id;  // the surviving note
    Operation operation = Operation::Appended;
    std::optional<NoteId> partner;  // merge target, or the strongest link target
    std::vector<CandidateJudgment> judgments;
    std::vector<KeywordId> new_keywords;
};

struct IngestOptions {
    std::string turn_id;
    std::string date;
    // ablations
    bool disable_update = false;   // skip consolidation, always append
    bool disable_denoise = false;  // context := raw text
    bool disable_link = false;
    bool disable_merge = false;
    // run evolve_topics whenever the clock hits a multiple of evolve_every
    bool auto_evolve = true;
};

struct GateOptions {
    bool disable_link = false;
    bool disable_merge = false;
};

struct IbDiagnostics {
    std::uint64_t inputs_seen = 0;
    std::uint64_t note_count = 0;
    std::uint64_t merge_total = 0;
    std::uint64_t link_total = 0;
    std::uint64_t append_total = 0;
    double compression_ratio = 1.0;  // inputs_seen / note_count, 1 for an empty graph
    double mean_keywords_per_note = 0.0;
    std::uint64_t related_edge_count = 0;
    std::uint64_t keyword_count = 0;
    std::uint64_t topic_count = 0;
};

/// Stored notes related to `note`: RRF over the dense top-`pool` neighbours
/// and every note sharing a keyword (ranked by shared count), capped at
/// `pool`. The note's own id, when it has one, is excluded.
std::vector<NoteId> candidate_neighborhood(const MemoryGraph& g, const Note& note, std::size_t pool);

/// Applies the gate to a note that is not stored yet:
///   best SUPPORTS strength > tau_merge          -> merge into that candidate
///   else RELATED_TO > tau_link, or CONFLICTS    -> append + edge new -> candidate
///   else                                        -> append
/// Judgments naming unknown notes are ignored. Updates operation counters.
IngestReport gated_update(MemoryGraph& g, Note new_note, std::vector<CandidateJudgment> judgments,
                          const EmbeddingProvider& embedder, GateOptions options = {});

/// Absorbs `source` into `target`: raw segments united in timestamp order,
/// context replaced, embedding recomputed from the merged context, keywords
/// united. A blank merged_context falls back to "target; source" contexts.
NoteId merge_notes(MemoryGraph& g, NoteId target, const Note& source, std::string merged_context,
                   const EmbeddingProvider& embedder);

void link_notes(MemoryGraph& g, NoteId from, NoteId to, RelationType type, double strength,
                std::string annotation = {});

/// +1 on every unordered keyword pair of the set.
void update_cooccurrence(MemoryGraph& g, const std::set<KeywordId>& keywords);

/// One observation through parse, anchoring, neighbourhood, judgment and gate.
IngestReport ingest(MemoryGraph& g, std::string_view raw, std::string_view speaker, const Policy& policy,
                    const EmbeddingProvider& embedder, const IngestOptions& options = {});

IbDiagnostics ib_diagnostics(const MemoryGraph& g, std::uint64_t inputs_seen);
/// inputs_seen taken from the operation counters.
IbDiagnostics ib_diagnostics(const MemoryGraph& g);

} // namespace memfly
