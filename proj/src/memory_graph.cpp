#include "memfly/memory_graph.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "memfly/error.hpp"

namespace memfly {

std::string_view to_string(RelationType r) noexcept {
    switch (r) {
    case RelationType::Supports: return "SUPPORTS";
    case RelationType::Conflicts: return "CONFLICTS";
    case RelationType::RelatedTo: return "RELATED_TO";
    }
    return "RELATED_TO";
}

std::optional<RelationType> relation_from_string(std::string_view s) {
    std::string norm;
    for (char c : s) {
        if (c == '-' || c == ' ') norm.push_back('_');
        else norm.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    if (norm == "SUPPORTS" || norm == "SUPPORT") return RelationType::Supports;
    if (norm == "CONFLICTS" || norm == "CONFLICT") return RelationType::Conflicts;
    if (norm == "RELATED_TO" || norm == "RELATED") return RelationType::RelatedTo;
    return std::nullopt;
}

MemoryGraph::MemoryGraph(EngineConfig config)
    : config_(std::move(config)),
      note_index_(dim(), config_.index_mode, config_.approx_threshold, 0x6e6f746573),
      keyword_index_(dim(), config_.index_mode, config_.approx_threshold, 0x6b657973) {
    config_.validate();
}

void MemoryGraph::reconfigure(EngineConfig config) {
    config.validate();
    if (config.embedding_dim != config_.embedding_dim) {
        throw Error(ErrorCode::DimensionMismatch, "stored embeddings have dimension " + std::to_string(dim()) +
                                                      ", config asks for " + std::to_string(config.embedding_dim));
    }
    const bool reindex = config.index_mode != config_.index_mode || config.approx_threshold != config_.approx_threshold;
    config_ = std::move(config);
    if (reindex) rebuild_indices();
}

const Note& MemoryGraph::note(NoteId id) const {
    auto it = notes_.find(id);
    if (it == notes_.end()) throw Error(ErrorCode::NotFound, "note " + std::to_string(id.value));
    return it->second;
}

const Keyword& MemoryGraph::keyword(KeywordId id) const {
    auto it = keywords_.find(id);
    if (it == keywords_.end()) throw Error(ErrorCode::NotFound, "keyword " + std::to_string(id.value));
    return it->second;
}

const Topic& MemoryGraph::topic(TopicId id) const {
    auto it = topics_.find(id);
    if (it == topics_.end()) throw Error(ErrorCode::NotFound, "topic " + std::to_string(id.value));
    return it->second;
}

std::optional<KeywordId> MemoryGraph::find_keyword(std::string_view surface) const {
    if (auto it = surface_index_.find(std::string(surface)); it != surface_index_.end()) return it->second;
    return std::nullopt;
}

Vector MemoryGraph::checked_unit(Vector v, const char* what) const {
    if (v.size() != dim()) {
        throw Error(ErrorCode::DimensionMismatch, std::string(what) + " embedding has dimension " +
                                                      std::to_string(v.size()) + ", expected " +
                                                      std::to_string(dim()));
    }
    normalize_in_place(v);
    return v;
}

NoteId MemoryGraph::add_note(Note note) {
    note.embedding = checked_unit(std::move(note.embedding), "note");
    if (note.raw.empty()) throw Error(ErrorCode::Precondition, "note has no raw segments");
    for (KeywordId k : note.keywords) {
        if (!keywords_.contains(k)) throw Error(ErrorCode::UnknownKeyword, "keyword " + std::to_string(k.value));
    }
    note.id = NoteId{next_note_++};
    note.merge_count = note.raw.size() - 1;
    for (KeywordId k : note.keywords) keywords_.at(k).note_refs.insert(note.id);
    note_index_.upsert(note.id, note.embedding);
    const NoteId id = note.id;
    notes_.emplace(id, std::move(note));
    return id;
}

KeywordId MemoryGraph::upsert_keyword(std::string_view surface, Vector embedding) {
    return upsert_keyword_ex(surface, std::move(embedding)).first;
}

std::pair<KeywordId, bool> MemoryGraph::upsert_keyword_ex(std::string_view surface, Vector embedding) {
    if (surface.empty()) throw Error(ErrorCode::EmptySurface, "keyword surface is empty");
    if (auto existing = find_keyword(surface)) return {*existing, false};
    Keyword kw;
    kw.embedding = checked_unit(std::move(embedding), "keyword");
    kw.id = KeywordId{next_keyword_++};
    kw.surface = std::string(surface);
    surface_index_.emplace(kw.surface, kw.id);
    keyword_index_.upsert(kw.id, kw.embedding);
    const KeywordId id = kw.id;
    keywords_.emplace(id, std::move(kw));
    return {id, true};
}

Note MemoryGraph::remove_note(NoteId id) {
    auto it = notes_.find(id);
    if (it == notes_.end()) throw Error(ErrorCode::NotFound, "note " + std::to_string(id.value));
    Note removed = std::move(it->second);
    notes_.erase(it);
    for (KeywordId k : removed.keywords) {
        if (auto kit = keywords_.find(k); kit != keywords_.end()) kit->second.note_refs.erase(id);
    }
    std::erase_if(related_, [id](const auto& e) { return e.first.first == id || e.first.second == id; });
    note_index_.erase(id);
    return removed;
}

void MemoryGraph::replace_note_content(NoteId id, std::vector<RawSegment> raw, std::string context, Vector embedding,
                                       std::set<KeywordId> keywords) {
    auto it = notes_.find(id);
    if (it == notes_.end()) throw Error(ErrorCode::NotFound, "note " + std::to_string(id.value));
    if (raw.empty()) throw Error(ErrorCode::Precondition, "note has no raw segments");
    embedding = checked_unit(std::move(embedding), "note");
    for (KeywordId k : keywords) {
        if (!keywords_.contains(k)) throw Error(ErrorCode::UnknownKeyword, "keyword " + std::to_string(k.value));
    }
    Note& n = it->second;
    for (KeywordId k : n.keywords) keywords_.at(k).note_refs.erase(id);
    for (KeywordId k : keywords) keywords_.at(k).note_refs.insert(id);
    n.raw = std::move(raw);
    n.context = std::move(context);
    n.embedding = std::move(embedding);
    n.keywords = std::move(keywords);
    n.merge_count = n.raw.size() - 1;
    n.updated_at = clock_;
    note_index_.upsert(id, n.embedding);
}

void MemoryGraph::link(NoteId from, NoteId to, RelatedEdge edge) {
    if (!notes_.contains(from)) throw Error(ErrorCode::NotFound, "note " + std::to_string(from.value));
    if (!notes_.contains(to)) throw Error(ErrorCode::NotFound, "note " + std::to_string(to.value));
    if (from == to) throw Error(ErrorCode::SelfLoop, "note " + std::to_string(from.value) + " linked to itself");
    edge.strength = std::clamp(edge.strength, 0.0, 1.0);
    related_[{from, to}] = std::move(edge);
}

void MemoryGraph::add_cooccurrence(KeywordId a, KeywordId b, std::uint64_t count) {
    if (a == b) throw Error(ErrorCode::SelfLoop, "co-occurrence of keyword with itself");
    if (!keywords_.contains(a)) throw Error(ErrorCode::UnknownKeyword, "keyword " + std::to_string(a.value));
    if (!keywords_.contains(b)) throw Error(ErrorCode::UnknownKeyword, "keyword " + std::to_string(b.value));
    if (b < a) std::swap(a, b);
    co_occur_[{a, b}] += count;
}

std::vector<TopicId> MemoryGraph::replace_topics(std::vector<Topic> topics) {
    for (auto& [id, kw] : keywords_) kw.topic.reset();
    topics_.clear();
    std::vector<TopicId> ids;
    ids.reserve(topics.size());
    for (Topic& t : topics) {
        t.id = TopicId{next_topic_++};
        t.centroid = checked_unit(std::move(t.centroid), "topic");
        for (KeywordId k : t.members) keywords_.at(k).topic = t.id;
        ids.push_back(t.id);
        topics_.emplace(t.id, std::move(t));
    }
    return ids;
}

std::size_t MemoryGraph::prune_orphan_keywords() {
    std::vector<KeywordId> orphans;
    for (const auto& [id, kw] : keywords_) {
        if (kw.note_refs.empty()) orphans.push_back(id);
    }
    for (KeywordId id : orphans) {
        const Keyword& kw = keywords_.at(id);
        if (kw.topic) {
            if (auto t = topics_.find(*kw.topic); t != topics_.end()) t->second.members.erase(id);
        }
        surface_index_.erase(kw.surface);
        keyword_index_.erase(id);
        keywords_.erase(id);
        std::erase_if(co_occur_, [id](const auto& e) { return e.first.first == id || e.first.second == id; });
    }
    std::erase_if(topics_, [](const auto& t) { return t.second.members.empty(); });
    return orphans.size();
}

Ranked<NoteId> MemoryGraph::nearest_notes(std::span<const double> query, std::size_t k) const {
    if (query.size() != dim()) {
        throw Error(ErrorCode::DimensionMismatch, "query has dimension " + std::to_string(query.size()));
    }
    return note_index_.search(normalized(Vector(query.begin(), query.end())), k);
}

Ranked<KeywordId> MemoryGraph::nearest_keywords(std::span<const double> query, std::size_t k) const {
    if (query.size() != dim()) {
        throw Error(ErrorCode::DimensionMismatch, "query has dimension " + std::to_string(query.size()));
    }
    return keyword_index_.search(normalized(Vector(query.begin(), query.end())), k);
}

void MemoryGraph::rebuild_indices() {
    surface_index_.clear();
    note_index_ = DenseIndex<NoteId>(dim(), config_.index_mode, config_.approx_threshold, 0x6e6f746573);
    keyword_index_ = DenseIndex<KeywordId>(dim(), config_.index_mode, config_.approx_threshold, 0x6b657973);
    for (const auto& [id, n] : notes_) note_index_.upsert(id, n.embedding);
    for (const auto& [id, kw] : keywords_) {
        surface_index_.emplace(kw.surface, id);
        keyword_index_.upsert(id, kw.embedding);
    }
}

bool MemoryGraph::operator==(const MemoryGraph& o) const {
    return config_ == o.config_ && clock_ == o.clock_ && next_note_ == o.next_note_ &&
           next_keyword_ == o.next_keyword_ && next_topic_ == o.next_topic_ && notes_ == o.notes_ &&
           keywords_ == o.keywords_ && topics_ == o.topics_ && related_ == o.related_ &&
           co_occur_ == o.co_occur_ && counters_ == o.counters_;
}

namespace {

std::string note_name(NoteId id) { return "note " + std::to_string(id.value); }
std::string keyword_name(KeywordId id) { return "keyword " + std::to_string(id.value); }
std::string topic_name(TopicId id) { return "topic " + std::to_string(id.value); }

} // namespace

std::vector<Violation> check_invariants(const MemoryGraph& g) {
    std::vector<Violation> out;
    auto flag = [&out](std::string entity, std::string rule) { out.push_back({std::move(entity), std::move(rule)}); };
    const std::size_t d = g.dim();

    for (const auto& [id, n] : g.notes()) {
        const auto name = note_name(id);
        if (n.id != id) flag(name, "stored under a different id");
        if (id.value >= g.next_note_id()) flag(name, "id not below the issue counter");
        if (n.embedding.size() != d) flag(name, "embedding dimension differs from config");
        else if (!is_unit(n.embedding)) flag(name, "embedding is not unit-norm");
        if (n.raw.empty()) flag(name, "raw segment list is empty");
        else if (n.merge_count != n.raw.size() - 1) flag(name, "merge_count != |raw| - 1");
        for (KeywordId k : n.keywords) {
            auto kit = g.keywords().find(k);
            if (kit == g.keywords().end()) flag(name, "references missing " + keyword_name(k));
            else if (!kit->second.note_refs.contains(id)) flag(name, keyword_name(k) + " does not reference back");
        }
    }

    std::set<std::string> surfaces;
    for (const auto& [id, kw] : g.keywords()) {
        const auto name = keyword_name(id);
        if (kw.id != id) flag(name, "stored under a different id");
        if (id.value >= g.next_keyword_id()) flag(name, "id not below the issue counter");
        if (kw.surface.empty()) flag(name, "surface is empty");
        if (!surfaces.insert(kw.surface).second) flag(name, "surface '" + kw.surface + "' is not unique");
        if (g.find_keyword(kw.surface) != id) flag(name, "surface index disagrees with table");
        if (kw.embedding.size() != d) flag(name, "embedding dimension differs from config");
        else if (!is_unit(kw.embedding)) flag(name, "embedding is not unit-norm");
        for (NoteId n : kw.note_refs) {
            auto nit = g.notes().find(n);
            if (nit == g.notes().end()) flag(name, "references missing " + note_name(n));
            else if (!nit->second.keywords.contains(id)) flag(name, note_name(n) + " does not reference back");
        }
        if (kw.topic) {
            auto tit = g.topics().find(*kw.topic);
            if (tit == g.topics().end()) flag(name, "assigned to missing " + topic_name(*kw.topic));
            else if (!tit->second.members.contains(id)) flag(name, topic_name(*kw.topic) + " does not list it");
        }
    }

    std::set<KeywordId> assigned;
    const auto& cfg = g.config();
    for (const auto& [id, t] : g.topics()) {
        const auto name = topic_name(id);
        if (t.members.empty()) flag(name, "has no members");
        if (t.members.size() > static_cast<std::size_t>(cfg.delta_max)) flag(name, "exceeds delta_max");
        if (t.members.size() < static_cast<std::size_t>(cfg.delta_min) && !t.undersized_component) {
            flag(name, "below delta_min without being a whole small component");
        }
        Vector mean(d, 0.0);
        bool members_ok = true;
        for (KeywordId k : t.members) {
            if (!assigned.insert(k).second) flag(name, keyword_name(k) + " belongs to another topic");
            auto kit = g.keywords().find(k);
            if (kit == g.keywords().end()) {
                flag(name, "lists missing " + keyword_name(k));
                members_ok = false;
                continue;
            }
            if (kit->second.topic != id) flag(name, keyword_name(k) + " points to a different topic");
            if (kit->second.embedding.size() == d) {
                for (std::size_t i = 0; i < d; ++i) mean[i] += kit->second.embedding[i];
            }
        }
        if (t.centroid.size() != d) {
            flag(name, "centroid dimension differs from config");
        } else if (!is_unit(t.centroid)) {
            flag(name, "centroid is not unit-norm");
        } else if (members_ok && !t.members.empty() && l2_norm(mean) > 0.0) {
            normalize_in_place(mean);
            double err = 0.0;
            for (std::size_t i = 0; i < d; ++i) err = std::max(err, std::abs(mean[i] - t.centroid[i]));
            if (err > 1e-9) flag(name, "centroid is not the normalized member mean");
        }
    }

    for (const auto& [key, e] : g.related_edges()) {
        const auto name = "edge " + std::to_string(key.first.value) + "->" + std::to_string(key.second.value);
        if (key.first == key.second) flag(name, "self-loop");
        if (!g.has_note(key.first) || !g.has_note(key.second)) flag(name, "endpoint missing");
        if (e.strength < 0.0 || e.strength > 1.0) flag(name, "strength outside [0,1]");
    }

    for (const auto& [key, count] : g.co_occurrence()) {
        const auto name = "co-occurrence " + std::to_string(key.first.value) + "-" + std::to_string(key.second.value);
        if (!(key.first < key.second)) flag(name, "key not canonically ordered");
        if (!g.keywords().contains(key.first) || !g.keywords().contains(key.second)) flag(name, "endpoint missing");
        if (count == 0) flag(name, "zero count");
    }

    if (g.note_index().size() != g.notes().size()) flag("note index", "size differs from note table");
    for (const auto& [id, n] : g.notes()) {
        if (!g.note_index().contains(id)) {
            flag("note index", "missing " + note_name(id));
        } else if (n.embedding.size() == d) {
            auto v = g.note_index().vector_of(id);
            if (!std::equal(v.begin(), v.end(), n.embedding.begin())) flag("note index", "stale vector for " + note_name(id));
        }
    }
    if (g.keyword_index().size() != g.keywords().size()) flag("keyword index", "size differs from keyword table");
    for (const auto& [id, kw] : g.keywords()) {
        if (!g.keyword_index().contains(id)) flag("keyword index", "missing " + keyword_name(id));
    }
    return out;
}

} // namespace memfly
