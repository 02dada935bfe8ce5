#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "memfly/config.hpp"
#include "memfly/dense_index.hpp"
#include "memfly/ids.hpp"
#include "memfly/vector_math.hpp"

namespace memfly {

using Timestamp = std::uint64_t;

enum class RelationType { Supports, Conflicts, RelatedTo };

std::string_view to_string(RelationType r) noexcept;
/// Accepts "SUPPORTS", "CONFLICTS", "RELATED_TO" (case-insensitive, '-' or ' ' for '_').
std::optional<RelationType> relation_from_string(std::string_view s);

/// One verbatim observation. turn_id ties evidence back to the source
/// transcript even after merges.
struct RawSegment {
    std::string text;
    std::string speaker;
    std::string turn_id;
    std::string date;
    Timestamp timestamp = 0;

    bool operator==(const RawSegment&) const = default;
    auto operator<=>(const RawSegment&) const = default;
};

struct Note {
    NoteId id;
    std::vector<RawSegment> raw;
    std::string context;
    Vector embedding;
    std::set<KeywordId> keywords;
    Timestamp created_at = 0;
    Timestamp updated_at = 0;
    std::uint64_t merge_count = 0;

    bool operator==(const Note&) const = default;
};

struct Keyword {
    KeywordId id;
    std::string surface;
    Vector embedding;
    std::set<NoteId> note_refs;
    std::optional<TopicId> topic;

    bool operator==(const Keyword&) const = default;
};

struct Topic {
    TopicId id;
    std::set<KeywordId> members;
    Vector centroid;
    // Set when the community is a whole connected component smaller than
    // delta_min, which repair cannot grow.
    bool undersized_component = false;

    bool operator==(const Topic&) const = default;
};

struct RelatedEdge {
    RelationType type = RelationType::RelatedTo;
    double strength = 0.0;
    std::string annotation;

    bool operator==(const RelatedEdge&) const = default;
};

using NoteEdge = std::pair<NoteId, NoteId>;
using KeywordPair = std::pair<KeywordId, KeywordId>;

struct OperationCounters {
    std::uint64_t merge_total = 0;
    // Inputs that produced a new note; LINKED ingests count here too.
    std::uint64_t append_total = 0;
    std::uint64_t link_total = 0;

    bool operator==(const OperationCounters&) const = default;
};

struct Violation {
    std::string entity;
    std::string rule;

    bool operator==(const Violation&) const = default;
};

class MemoryGraph;
namespace detail {
struct GraphAccess;
}

/// Stratified note/keyword/topic memory with dense indices over note and
/// keyword embeddings. Tables are ordered by id so iteration is deterministic.
/// Single writer, many readers: const member functions never mutate.
class MemoryGraph {
public:
    explicit MemoryGraph(EngineConfig config = {});

    const EngineConfig& config() const noexcept { return config_; }
    /// Swaps in new tuning values. The embedding dimension cannot change
    /// (DimensionMismatch); existing topics are kept until the next evolution.
    void reconfigure(EngineConfig config);
    std::size_t dim() const noexcept { return static_cast<std::size_t>(config_.embedding_dim); }

    Timestamp clock() const noexcept { return clock_; }
    Timestamp tick() noexcept { return ++clock_; }

    const std::map<NoteId, Note>& notes() const noexcept { return notes_; }
    const std::map<KeywordId, Keyword>& keywords() const noexcept { return keywords_; }
    const std::map<TopicId, Topic>& topics() const noexcept { return topics_; }
    const std::map<NoteEdge, RelatedEdge>& related_edges() const noexcept { return related_; }
    const std::map<KeywordPair, std::uint64_t>& co_occurrence() const noexcept { return co_occur_; }
    const OperationCounters& counters() const noexcept { return counters_; }
    OperationCounters& counters() noexcept { return counters_; }

    const Note& note(NoteId id) const;
    const Keyword& keyword(KeywordId id) const;
    const Topic& topic(TopicId id) const;
    bool has_note(NoteId id) const { return notes_.contains(id); }
    std::optional<KeywordId> find_keyword(std::string_view surface) const;

    /// Stores a note under a freshly issued id. The embedding is normalized,
    /// merge_count is derived from the raw segment count.
    NoteId add_note(Note note);

    /// Returns the existing id for a known surface (embedding untouched),
    /// otherwise inserts. `surface` must already be canonical.
    KeywordId upsert_keyword(std::string_view surface, Vector embedding);
    /// Like upsert_keyword, also reporting whether an insert happened.
    std::pair<KeywordId, bool> upsert_keyword_ex(std::string_view surface, Vector embedding);

    /// Removes the note with its incident related edges. Keywords left with no
    /// notes are kept until the next topic evolution.
    Note remove_note(NoteId id);

    /// Replaces raw/context/embedding/keywords of a stored note, keeping id and
    /// created_at. Keyword back-references and the index are refreshed.
    void replace_note_content(NoteId id, std::vector<RawSegment> raw, std::string context, Vector embedding,
                              std::set<KeywordId> keywords);

    /// Adds or overwrites (last writer wins) the directed edge from -> to.
    void link(NoteId from, NoteId to, RelatedEdge edge);

    /// Increments the undirected co-occurrence count of {a, b}.
    void add_cooccurrence(KeywordId a, KeywordId b, std::uint64_t count = 1);

    /// Drops all topics and installs new ones under fresh ids. Member sets and
    /// centroids come from the caller; back-references are set here.
    std::vector<TopicId> replace_topics(std::vector<Topic> topics);

    /// Removes keywords with no notes, together with their co-occurrence
    /// edges. Returns how many were removed.
    std::size_t prune_orphan_keywords();

    Ranked<NoteId> nearest_notes(std::span<const double> query, std::size_t k) const;
    Ranked<KeywordId> nearest_keywords(std::span<const double> query, std::size_t k) const;

    const DenseIndex<NoteId>& note_index() const noexcept { return note_index_; }
    const DenseIndex<KeywordId>& keyword_index() const noexcept { return keyword_index_; }

    std::uint64_t next_note_id() const noexcept { return next_note_; }
    std::uint64_t next_keyword_id() const noexcept { return next_keyword_; }
    std::uint64_t next_topic_id() const noexcept { return next_topic_; }

    /// Structural equality: tables, edges, counters, config and clock.
    /// Indices are derived state and not compared.
    bool operator==(const MemoryGraph& other) const;

private:
    friend struct detail::GraphAccess;

    Vector checked_unit(Vector v, const char* what) const;
    void rebuild_indices();

    EngineConfig config_;
    Timestamp clock_ = 0;
    std::uint64_t next_note_ = 1;
    std::uint64_t next_keyword_ = 1;
    std::uint64_t next_topic_ = 1;

    std::map<NoteId, Note> notes_;
    std::map<KeywordId, Keyword> keywords_;
    std::map<TopicId, Topic> topics_;
    std::map<NoteEdge, RelatedEdge> related_;
    std::map<KeywordPair, std::uint64_t> co_occur_;
    OperationCounters counters_;

    std::unordered_map<std::string, KeywordId> surface_index_;
    DenseIndex<NoteId> note_index_;
    DenseIndex<KeywordId> keyword_index_;
};

/// Empty iff every structural invariant holds. Each entry names the entity
/// and the broken rule.
std::vector<Violation> check_invariants(const MemoryGraph& g);

} // namespace memfly
