#pragma once

#include "memfly/memory_graph.hpp"

namespace memfly::detail {

// Raw table access for snapshot restore and for tests that need to corrupt a
// graph on purpose. Callers must call reindex() after editing tables.
struct GraphAccess {
    static Timestamp& clock(MemoryGraph& g) { return g.clock_; }
    static std::uint64_t& next_note(MemoryGraph& g) { return g.next_note_; }
    static std::uint64_t& next_keyword(MemoryGraph& g) { return g.next_keyword_; }
    static std::uint64_t& next_topic(MemoryGraph& g) { return g.next_topic_; }
    static std::map<NoteId, Note>& notes(MemoryGraph& g) { return g.notes_; }
    static std::map<KeywordId, Keyword>& keywords(MemoryGraph& g) { return g.keywords_; }
    static std::map<TopicId, Topic>& topics(MemoryGraph& g) { return g.topics_; }
    static std::map<NoteEdge, RelatedEdge>& related(MemoryGraph& g) { return g.related_; }
    static std::map<KeywordPair, std::uint64_t>& co_occur(MemoryGraph& g) { return g.co_occur_; }
    static void reindex(MemoryGraph& g) { g.rebuild_indices(); }
};

} // namespace memfly::detail
