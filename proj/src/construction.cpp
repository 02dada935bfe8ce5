#include "memfly/construction.hpp"

#include <algorithm>
#include <map>

#include "memfly/error.hpp"
#include "memfly/fusion.hpp"
#include "memfly/text.hpp"
#include "memfly/topics.hpp"

namespace memfly {

std::string_view to_string(Operation op) noexcept {
    switch (op) {
    case Operation::Merged: return "MERGED";
    case Operation::Linked: return "LINKED";
    case Operation::Appended: return "APPENDED";
    }
    return "APPENDED";
}

std::vector<NoteId> candidate_neighborhood(const MemoryGraph& g, const Note& note, std::size_t pool) {
    if (pool == 0 || g.notes().empty()) return {};

    Ranked<NoteId> dense;
    for (const auto& [id, score] : g.nearest_notes(note.embedding, pool + 1)) {
        if (id != note.id) dense.emplace_back(id, score);
    }
    if (dense.size() > pool) dense.resize(pool);

    std::map<NoteId, double> shared;
    for (KeywordId k : note.keywords) {
        for (NoteId n : g.keyword(k).note_refs) {
            if (n != note.id) shared[n] += 1.0;
        }
    }
    Ranked<NoteId> sparse(shared.begin(), shared.end());
    sort_ranked(sparse);

    const Ranked<NoteId> fused = rrf_fuse<NoteId>({dense, sparse}, g.config().rrf_k);
    std::vector<NoteId> out;
    for (const auto& [id, s] : fused) {
        if (out.size() == pool) break;
        out.push_back(id);
    }
    return out;
}

void link_notes(MemoryGraph& g, NoteId from, NoteId to, RelationType type, double strength, std::string annotation) {
    g.link(from, to, RelatedEdge{type, strength, std::move(annotation)});
}

void update_cooccurrence(MemoryGraph& g, const std::set<KeywordId>& keywords) {
    for (auto a = keywords.begin(); a != keywords.end(); ++a) {
        for (auto b = std::next(a); b != keywords.end(); ++b) g.add_cooccurrence(*a, *b);
    }
}

NoteId merge_notes(MemoryGraph& g, NoteId target, const Note& source, std::string merged_context,
                   const EmbeddingProvider& embedder) {
    const Note& t = g.note(target);
    std::vector<RawSegment> raw = t.raw;
    raw.insert(raw.end(), source.raw.begin(), source.raw.end());
    std::stable_sort(raw.begin(), raw.end(),
                     [](const RawSegment& a, const RawSegment& b) { return a.timestamp < b.timestamp; });
    if (text::trim(merged_context).empty()) merged_context = t.context + "; " + source.context;
    Vector embedding = embedder.embed(merged_context);
    std::set<KeywordId> keywords = t.keywords;
    keywords.insert(source.keywords.begin(), source.keywords.end());
    g.replace_note_content(target, std::move(raw), std::move(merged_context), std::move(embedding),
                           std::move(keywords));
    return target;
}

namespace {

std::string contrast_annotation(const std::string& existing, const std::string& incoming) {
    std::string base = existing;
    while (!base.empty() && (base.back() == '.' || base.back() == ' ')) base.pop_back();
    return base + ". However, " + incoming;
}

} // namespace

IngestReport gated_update(MemoryGraph& g, Note new_note, std::vector<CandidateJudgment> judgments,
                          const EmbeddingProvider& embedder, GateOptions options) {
    const EngineConfig& cfg = g.config();
    std::erase_if(judgments, [&](const CandidateJudgment& j) { return !g.has_note(j.candidate); });
    for (auto& j : judgments) j.connection_strength = std::clamp(j.connection_strength, 0.0, 1.0);

    IngestReport report;
    report.judgments = judgments;

    if (!options.disable_merge) {
        const CandidateJudgment* best = nullptr;
        for (const auto& j : judgments) {
            if (j.relation_type != RelationType::Supports) continue;
            if (!best || j.connection_strength > best->connection_strength) best = &j;
        }
        if (best && best->connection_strength > cfg.tau_merge) {
            report.note_id = merge_notes(g, best->candidate, new_note, best->merged_context.value_or(std::string()),
                                         embedder);
            report.operation = Operation::Merged;
            report.partner = best->candidate;
            ++g.counters().merge_total;
            return report;
        }
    }

    std::vector<const CandidateJudgment*> links;
    if (!options.disable_link) {
        for (const auto& j : judgments) {
            const bool related = j.relation_type == RelationType::RelatedTo && j.connection_strength > cfg.tau_link;
            if (related || j.relation_type == RelationType::Conflicts) links.push_back(&j);
        }
    }
    const std::string incoming_context = new_note.context;
    report.note_id = g.add_note(std::move(new_note));
    ++g.counters().append_total;
    if (links.empty()) {
        report.operation = Operation::Appended;
        return report;
    }
    report.operation = Operation::Linked;
    const CandidateJudgment* strongest = nullptr;
    for (const CandidateJudgment* j : links) {
        std::string annotation;
        if (j->relation_type == RelationType::Conflicts) {
            annotation = contrast_annotation(g.note(j->candidate).context, incoming_context);
        }
        link_notes(g, report.note_id, j->candidate, j->relation_type, j->connection_strength, std::move(annotation));
        ++g.counters().link_total;
        if (!strongest || j->connection_strength > strongest->connection_strength) strongest = j;
    }
    report.partner = strongest->candidate;
    return report;
}

IngestReport ingest(MemoryGraph& g, std::string_view raw, std::string_view speaker, const Policy& policy,
                    const EmbeddingProvider& embedder, const IngestOptions& options) {
    if (text::trim(raw).empty()) throw Error(ErrorCode::Precondition, "cannot ingest blank text");
    const Timestamp now = g.tick();

    IngestResult parsed = policy.ingest_parse(raw, speaker);
    if (options.disable_denoise || text::trim(parsed.context).empty()) parsed.context = std::string(text::trim(raw));

    Note note;
    note.raw.push_back(RawSegment{std::string(raw), std::string(speaker), options.turn_id, options.date, now});
    note.context = parsed.context;
    note.embedding = embedder.embed(note.context);
    note.created_at = now;
    note.updated_at = now;

    std::vector<KeywordId> new_keywords;
    for (const auto& surface : parsed.keywords) {
        const std::string canon = text::canonical_keyword(surface);
        if (canon.empty()) continue;
        KeywordId id;
        if (auto existing = g.find_keyword(canon)) {
            id = *existing;
        } else {
            id = g.upsert_keyword(canon, embedder.embed(canon));
            new_keywords.push_back(id);
        }
        note.keywords.insert(id);
    }
    update_cooccurrence(g, note.keywords);

    std::vector<CandidateJudgment> judgments;
    if (!options.disable_update) {
        const auto candidates =
            candidate_neighborhood(g, note, static_cast<std::size_t>(g.config().candidate_pool));
        if (!candidates.empty()) {
            NoteView view;
            view.content = std::string(raw);
            view.context = note.context;
            for (KeywordId k : note.keywords) view.keywords.push_back(g.keyword(k).surface);
            std::vector<NoteView> views;
            views.reserve(candidates.size());
            for (NoteId c : candidates) views.push_back(make_view(g, g.note(c)));
            try {
                judgments = policy.judge_candidates(view, views);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::RemoteFailure) throw;
                judgments.clear();
            }
        }
    }

    IngestReport report = gated_update(g, std::move(note), std::move(judgments), embedder,
                                       GateOptions{options.disable_link, options.disable_merge});
    report.new_keywords = std::move(new_keywords);

    if (options.auto_evolve && now % static_cast<Timestamp>(g.config().evolve_every) == 0) evolve_topics(g);
    return report;
}

IbDiagnostics ib_diagnostics(const MemoryGraph& g, std::uint64_t inputs_seen) {
    IbDiagnostics d;
    d.inputs_seen = inputs_seen;
    d.note_count = g.notes().size();
    d.merge_total = g.counters().merge_total;
    d.link_total = g.counters().link_total;
    d.append_total = g.counters().append_total;
    d.compression_ratio = d.note_count == 0 ? 1.0 : static_cast<double>(inputs_seen) / static_cast<double>(d.note_count);
    std::size_t anchors = 0;
    for (const auto& [id, n] : g.notes()) anchors += n.keywords.size();
    d.mean_keywords_per_note = d.note_count == 0 ? 0.0 : static_cast<double>(anchors) / static_cast<double>(d.note_count);
    d.related_edge_count = g.related_edges().size();
    d.keyword_count = g.keywords().size();
    d.topic_count = g.topics().size();
    return d;
}

IbDiagnostics ib_diagnostics(const MemoryGraph& g) {
    return ib_diagnostics(g, g.counters().merge_total + g.counters().append_total);
}

} // namespace memfly
