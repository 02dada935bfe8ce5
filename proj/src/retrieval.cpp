#include "memfly/retrieval.hpp"

#include <algorithm>
#include <deque>
#include <map>

#include "memfly/error.hpp"
#include "memfly/text.hpp"

namespace memfly {

bool EvidencePool::contains(NoteId id) const {
    return std::any_of(ranked.begin(), ranked.end(), [id](const auto& e) { return e.first == id; });
}

std::vector<NoteId> EvidencePool::ids() const {
    std::vector<NoteId> out;
    out.reserve(ranked.size());
    for (const auto& [id, s] : ranked) out.push_back(id);
    return out;
}

namespace {

nlohmann::json id_list(const std::vector<NoteId>& ids) {
    auto j = nlohmann::json::array();
    for (NoteId id : ids) j.push_back(id.value);
    return j;
}

} // namespace

nlohmann::json RetrievalTrace::to_json() const {
    auto iters = nlohmann::json::array();
    for (const auto& it : iterations) {
        nlohmann::json fused = nlohmann::json::array();
        for (std::size_t r = 0; r < it.fused.size(); ++r) {
            fused.push_back({{"note", it.fused[r].first.value}, {"rank", r + 1}, {"score", it.fused[r].second}});
        }
        nlohmann::json verdict = nullptr;
        if (it.verdict) {
            verdict = {{"sufficient", it.verdict->sufficient},
                       {"missing_info", it.verdict->missing_info},
                       {"confidence", it.verdict->confidence}};
        }
        iters.push_back({
            {"iteration", it.iteration},
            {"query", it.query},
            {"intent", {{"topic_desc", it.intent.topic_desc}, {"keywords", it.intent.keywords}}},
            {"topic_hits", id_list(it.topic_hits)},
            {"keyword_hits", id_list(it.keyword_hits)},
            {"fused", fused},
            {"expanded", id_list(it.expanded)},
            {"added", id_list(it.added)},
            {"sufficiency", verdict},
            {"subquery", it.subquery ? nlohmann::json(*it.subquery) : nlohmann::json(nullptr)},
        });
    }
    return {{"iterations", iters}, {"sufficiency_calls", sufficiency_calls}};
}

PathwayResult pathway_topic(const MemoryGraph& g, std::span<const double> h_topic) {
    PathwayResult out{Pathway::Topic, {}};
    if (g.topics().empty()) return out;
    if (h_topic.size() != g.dim()) throw Error(ErrorCode::DimensionMismatch, "topic query dimension");
    const Vector q = normalized(Vector(h_topic.begin(), h_topic.end()));

    Ranked<TopicId> topics;
    for (const auto& [id, t] : g.topics()) topics.emplace_back(id, dot(q, t.centroid));
    sort_ranked(topics);
    topics.resize(std::min(topics.size(), static_cast<std::size_t>(g.config().k_topic)));
    std::erase_if(topics, [&](const auto& t) { return !(t.second > g.config().pathway_min_cosine); });

    std::map<NoteId, double> best;
    for (const auto& [tid, score] : topics) {
        for (KeywordId k : g.topic(tid).members) {
            for (NoteId n : g.keyword(k).note_refs) {
                auto [it, inserted] = best.emplace(n, score);
                if (!inserted) it->second = std::max(it->second, score);
            }
        }
    }
    out.notes.assign(best.begin(), best.end());
    sort_ranked(out.notes);
    return out;
}

PathwayResult pathway_keyword(const MemoryGraph& g, const std::vector<Vector>& h_keys) {
    PathwayResult out{Pathway::Keyword, {}};
    if (h_keys.empty() || g.keywords().empty()) return out;
    std::map<KeywordId, double> matched;
    for (const auto& h : h_keys) {
        for (const auto& [k, score] : g.nearest_keywords(h, static_cast<std::size_t>(g.config().k_key))) {
            if (!(score > g.config().pathway_min_cosine)) continue;
            auto [it, inserted] = matched.emplace(k, score);
            if (!inserted) it->second = std::max(it->second, score);
        }
    }
    std::map<NoteId, double> best;
    for (const auto& [k, score] : matched) {
        for (NoteId n : g.keyword(k).note_refs) {
            auto [it, inserted] = best.emplace(n, score);
            if (!inserted) it->second = std::max(it->second, score);
        }
    }
    out.notes.assign(best.begin(), best.end());
    sort_ranked(out.notes);
    return out;
}

namespace {

// Undirected adjacency over related edges.
std::map<NoteId, std::vector<NoteId>> related_adjacency(const MemoryGraph& g) {
    std::map<NoteId, std::vector<NoteId>> adj;
    for (const auto& [edge, e] : g.related_edges()) {
        adj[edge.first].push_back(edge.second);
        adj[edge.second].push_back(edge.first);
    }
    return adj;
}

// Distance-bounded BFS from one source.
std::vector<NoteId> reach(const std::map<NoteId, std::vector<NoteId>>& adj, NoteId source, int hops) {
    std::vector<NoteId> out;
    std::map<NoteId, int> dist{{source, 0}};
    std::deque<NoteId> queue{source};
    while (!queue.empty()) {
        const NoteId v = queue.front();
        queue.pop_front();
        const int d = dist.at(v);
        if (d == hops) continue;
        auto it = adj.find(v);
        if (it == adj.end()) continue;
        for (NoteId u : it->second) {
            if (dist.emplace(u, d + 1).second) {
                out.push_back(u);
                queue.push_back(u);
            }
        }
    }
    return out;
}

} // namespace

std::set<NoteId> topological_expand(const MemoryGraph& g, const std::set<NoteId>& anchors, int hops) {
    if (hops < 1) throw Error(ErrorCode::Precondition, "expansion needs hops >= 1");
    std::set<NoteId> out;
    if (anchors.empty() || g.related_edges().empty()) return out;
    const auto adj = related_adjacency(g);
    for (NoteId a : anchors) {
        for (NoteId n : reach(adj, a, hops)) {
            if (!anchors.contains(n)) out.insert(n);
        }
    }
    return out;
}

EvidencePool assemble_pool(const MemoryGraph& g, const PathwayResult& topic, const PathwayResult& keyword,
                           const RetrievalSwitches& switches, IterationTrace* trace) {
    const EngineConfig& cfg = g.config();
    const std::size_t k_final = static_cast<std::size_t>(cfg.k_final);
    std::vector<Ranked<NoteId>> lists;
    if (!switches.disable_topic) lists.push_back(topic.notes);
    if (!switches.disable_keyword) lists.push_back(keyword.notes);
    const Ranked<NoteId> fused = rrf_fuse(lists, cfg.rrf_k);

    EvidencePool pool;
    std::map<NoteId, double> fused_score(fused.begin(), fused.end());
    for (const auto& entry : fused) {
        if (pool.ranked.size() == k_final) break;
        pool.ranked.push_back(entry);
        pool.anchors.insert(entry.first);
    }

    std::vector<NoteId> expanded_order;
    if (!switches.disable_neighbor && !g.related_edges().empty()) {
        std::set<NoteId> all_anchors;
        for (const auto& [id, s] : fused) all_anchors.insert(id);
        const auto adj = related_adjacency(g);
        std::map<NoteId, double> origin;  // best fused score of an anchor within reach
        for (NoteId a : all_anchors) {
            const double s = fused_score.at(a);
            for (NoteId n : reach(adj, a, cfg.expansion_hops)) {
                if (all_anchors.contains(n)) continue;
                auto [it, inserted] = origin.emplace(n, s);
                if (!inserted) it->second = std::max(it->second, s);
            }
        }
        Ranked<NoteId> ordered(origin.begin(), origin.end());
        sort_ranked(ordered);
        for (const auto& [id, s] : ordered) {
            if (expanded_order.size() == k_final) break;
            expanded_order.push_back(id);
            pool.ranked.emplace_back(id, 0.0);
            pool.expanded.insert(id);
        }
    }

    if (trace) {
        for (const auto& [id, s] : topic.notes) trace->topic_hits.push_back(id);
        for (const auto& [id, s] : keyword.notes) trace->keyword_hits.push_back(id);
        trace->fused = fused;
        trace->expanded = expanded_order;
    }
    return pool;
}

QueryIntent query_intent_or_fallback(const Policy& policy, std::string_view query) {
    try {
        return policy.parse_query_intent(query);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::RemoteFailure) throw;
        return fallback_query_intent(query);
    }
}

QueryVectors embed_intent(const QueryIntent& intent, std::string_view query, const EmbeddingProvider& embedder) {
    QueryVectors v;
    const std::string desc = text::trim(intent.topic_desc).empty() ? std::string(query) : intent.topic_desc;
    v.topic = embedder.embed(desc);
    for (const auto& k : intent.keywords) {
        if (!text::trim(k).empty()) v.keys.push_back(embedder.embed(k));
    }
    return v;
}

EvidencePool retrieve_once(const MemoryGraph& g, std::string_view query, const Policy& policy,
                           const EmbeddingProvider& embedder, const RetrievalSwitches& switches,
                           IterationTrace* trace) {
    if (text::trim(query).empty()) throw Error(ErrorCode::Precondition, "query is blank");
    const QueryIntent intent = query_intent_or_fallback(policy, query);
    if (trace) {
        trace->query = std::string(query);
        trace->intent = intent;
    }
    if (g.notes().empty()) return {};
    const QueryVectors qv = embed_intent(intent, query, embedder);
    PathwayResult topic{Pathway::Topic, {}};
    PathwayResult keyword{Pathway::Keyword, {}};
    if (!switches.disable_topic) topic = pathway_topic(g, qv.topic);
    if (!switches.disable_keyword) keyword = pathway_keyword(g, qv.keys);
    return assemble_pool(g, topic, keyword, switches, trace);
}

RetrievalResult retrieve_iterative(const MemoryGraph& g, std::string_view query, const Policy& policy,
                                   const EmbeddingProvider& embedder, const RetrievalSwitches& switches) {
    RetrievalResult result;
    IterationTrace first;
    result.pool = retrieve_once(g, query, policy, embedder, switches, &first);
    first.added = result.pool.ids();
    result.trace.iterations.push_back(std::move(first));
    if (switches.disable_ier) return result;

    std::string history;
    for (int i = 0; i < g.config().i_max; ++i) {
        IterationTrace& current = result.trace.iterations.back();
        const std::string evidence = render_pool(g, result.pool);
        SufficiencyVerdict verdict;
        try {
            verdict = policy.judge_sufficiency(evidence, query);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::RemoteFailure) throw;
            break;
        }
        ++result.trace.sufficiency_calls;
        current.verdict = verdict;
        if (verdict.sufficient) break;
        if (g.config().confidence_stop && verdict.confidence >= *g.config().confidence_stop) break;

        std::optional<std::string> sub;
        try {
            std::optional<std::string_view> missing;
            if (!text::trim(verdict.missing_info).empty()) missing = verdict.missing_info;
            sub = policy.generate_subquery(query, evidence, history, missing);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::RemoteFailure) throw;
        }
        if (!sub || text::trim(*sub).empty()) break;
        current.subquery = sub;

        IterationTrace next;
        const EvidencePool more = retrieve_once(g, *sub, policy, embedder, switches, &next);
        next.iteration = i + 1;
        for (const auto& entry : more.ranked) {
            if (result.pool.contains(entry.first)) continue;
            result.pool.ranked.push_back(entry);
            next.added.push_back(entry.first);
            if (more.anchors.contains(entry.first)) result.pool.anchors.insert(entry.first);
            if (more.expanded.contains(entry.first)) result.pool.expanded.insert(entry.first);
        }
        result.pool.iteration = i + 1;
        history += "Q" + std::to_string(i + 1) + ": " + *sub + "\nA" + std::to_string(i + 1) + ": " +
                   std::to_string(next.added.size()) + " new notes\n";
        result.trace.iterations.push_back(std::move(next));
    }
    return result;
}

std::string render_pool(const MemoryGraph& g, const EvidencePool& pool) {
    std::string out;
    for (const auto& [id, score] : pool.ranked) {
        const Note& n = g.note(id);
        const RawSegment& first = n.raw.front();
        out += "- " + n.context + " (raw: ";
        if (!first.speaker.empty()) out += first.speaker + ": ";
        out += first.text + ", ";
        out += first.date.empty() ? "t=" + std::to_string(first.timestamp) : first.date;
        out += ")\n";
    }
    return out;
}

std::vector<std::string> pool_contexts(const MemoryGraph& g, const EvidencePool& pool) {
    std::vector<std::string> out;
    for (const auto& [id, s] : pool.ranked) out.push_back(g.note(id).context);
    return out;
}

std::vector<std::string> pool_turn_ids(const MemoryGraph& g, const EvidencePool& pool) {
    std::vector<std::string> out;
    for (const auto& [id, s] : pool.ranked) {
        for (const auto& seg : g.note(id).raw) out.push_back(seg.turn_id);
    }
    return out;
}

} // namespace memfly
