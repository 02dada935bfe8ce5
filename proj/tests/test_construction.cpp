#include <doctest.h>

#include <random>

#include "memfly/error.hpp"
#include "support.hpp"

using namespace memfly;
using namespace testsupport;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::Precondition;
}

Note fresh(MemoryGraph& g, const EmbeddingProvider& e, const std::string& context, const std::vector<std::string>& kws,
           const std::string& turn = "new") {
    Note n;
    const Timestamp t = g.tick();
    n.raw.push_back(RawSegment{context, "S", turn, "", t});
    n.context = context;
    n.embedding = e.embed(context);
    n.created_at = n.updated_at = t;
    for (const auto& k : kws) n.keywords.insert(g.upsert_keyword(k, e.embed(k)));
    return n;
}

CandidateJudgment judge(NoteId c, RelationType r, double s, std::optional<std::string> merged = std::nullopt) {
    return CandidateJudgment{c, r, s, std::move(merged)};
}

struct GateFixture {
    Mock m{64};
    MemoryGraph g{config_with_dim(64)};
    NoteId target;
    GateFixture() { target = put_note(g, *m.embedder, "Melanie painted a lake sunrise.", {"lake", "sunrise"}); }
    IngestReport run(std::vector<CandidateJudgment> j, GateOptions o = {}) {
        return gated_update(g, fresh(g, *m.embedder, "She also likes sunsets.", {"sunset"}), std::move(j), *m.embedder, o);
    }
};

}  // namespace

TEST_CASE("gate table") {
    struct Row {
        RelationType type;
        double strength;
        Operation expected;
        bool edge;
    };
    const Row rows[] = {
        {RelationType::Supports, 0.9, Operation::Merged, false},
        {RelationType::Supports, 0.7, Operation::Appended, false},   // strict threshold
        {RelationType::Supports, 0.6, Operation::Appended, false},
        {RelationType::RelatedTo, 0.9, Operation::Linked, true},
        {RelationType::RelatedTo, 0.6, Operation::Linked, true},
        {RelationType::RelatedTo, 0.5, Operation::Appended, false},  // strict threshold
        {RelationType::RelatedTo, 0.4, Operation::Appended, false},
        {RelationType::Conflicts, 0.9, Operation::Linked, true},
        {RelationType::Conflicts, 0.1, Operation::Linked, true},
    };
    for (const auto& row : rows) {
        CAPTURE(row.strength);
        GateFixture f;
        const auto r = f.run({judge(f.target, row.type, row.strength, "merged text")});
        CHECK(r.operation == row.expected);
        if (row.expected == Operation::Merged) {
            CHECK(r.note_id == f.target);
            CHECK(f.g.notes().size() == 1);
            CHECK(f.g.counters().merge_total == 1);
            CHECK(f.g.counters().append_total == 0);
        } else {
            CHECK(r.note_id != f.target);
            CHECK(f.g.notes().size() == 2);
            CHECK(f.g.counters().append_total == 1);
        }
        CHECK(f.g.related_edges().size() == (row.edge ? 1u : 0u));
        if (row.edge) {
            const auto& e = f.g.related_edges().at({r.note_id, f.target});
            CHECK(e.type == row.type);
            CHECK(e.strength == row.strength);
            CHECK(r.partner == f.target);
            CHECK(f.g.counters().link_total == 1);
        }
        CHECK(check_invariants(f.g).empty());
    }
}

TEST_CASE("gate: conflicts carry a contrast annotation") {
    GateFixture f;
    const auto r = f.run({judge(f.target, RelationType::Conflicts, 0.8)});
    const auto& e = f.g.related_edges().at({r.note_id, f.target});
    CHECK(e.annotation == "Melanie painted a lake sunrise. However, She also likes sunsets.");
}

TEST_CASE("gate: best SUPPORTS wins, other links are skipped on merge") {
    Mock m(64);
    MemoryGraph g(config_with_dim(64));
    const NoteId a = put_note(g, *m.embedder, "a", {"a"});
    const NoteId b = put_note(g, *m.embedder, "b", {"b"});
    const NoteId c = put_note(g, *m.embedder, "c", {"c"});
    const auto r = gated_update(g, fresh(g, *m.embedder, "n", {"n"}),
                                {judge(a, RelationType::Supports, 0.8, "ma"), judge(b, RelationType::Supports, 0.95, "mb"),
                                 judge(c, RelationType::RelatedTo, 0.9)},
                                *m.embedder);
    CHECK(r.operation == Operation::Merged);
    CHECK(r.note_id == b);
    CHECK(g.note(b).context == "mb");
    CHECK(g.related_edges().empty());
}

TEST_CASE("gate: several links, strongest is the partner") {
    Mock m(64);
    MemoryGraph g(config_with_dim(64));
    const NoteId a = put_note(g, *m.embedder, "a", {"a"});
    const NoteId b = put_note(g, *m.embedder, "b", {"b"});
    const NoteId c = put_note(g, *m.embedder, "c", {"c"});
    const auto r = gated_update(g, fresh(g, *m.embedder, "n", {"n"}),
                                {judge(a, RelationType::RelatedTo, 0.6), judge(b, RelationType::Conflicts, 0.2),
                                 judge(c, RelationType::RelatedTo, 0.8), judge(NoteId(99), RelationType::Supports, 1.0)},
                                *m.embedder);
    CHECK(r.operation == Operation::Linked);
    CHECK(r.partner == c);
    CHECK(g.related_edges().size() == 3);
    CHECK(g.counters().link_total == 3);
    CHECK(r.judgments.size() == 3);  // unknown candidate dropped
}

TEST_CASE("gate: ablation switches") {
    {
        GateFixture f;
        const auto r = f.run({judge(f.target, RelationType::Supports, 0.95)}, {false, true});
        CHECK(r.operation == Operation::Appended);
    }
    {
        GateFixture f;
        const auto r = f.run({judge(f.target, RelationType::RelatedTo, 0.95)}, {true, false});
        CHECK(r.operation == Operation::Appended);
        CHECK(f.g.related_edges().empty());
    }
    {
        GateFixture f;
        const auto r = f.run({});
        CHECK(r.operation == Operation::Appended);
    }
}

TEST_CASE("gate: strengths are clamped") {
    GateFixture f;
    const auto r = f.run({judge(f.target, RelationType::RelatedTo, 3.0)});
    CHECK(f.g.related_edges().at({r.note_id, f.target}).strength == 1.0);
}

TEST_CASE("merge semantics") {
    Mock m(64);
    MemoryGraph g(config_with_dim(64));
    const NoteId t = put_note(g, *m.embedder, "Melanie painted a lake sunrise.", {"lake", "sunrise"}, "D1:1");
    const NoteId other = put_note(g, *m.embedder, "unrelated", {"zebra"});
    g.link(other, t, {RelationType::RelatedTo, 0.6, ""});
    const Timestamp created = g.note(t).created_at;
    Note src = fresh(g, *m.embedder, "She painted it at dawn.", {"dawn", "lake"}, "D1:5");
    const std::string merged = "Melanie painted a lake sunrise at dawn.";

    merge_notes(g, t, src, merged, *m.embedder);
    const Note& n = g.note(t);
    REQUIRE(n.raw.size() == 2);
    CHECK(n.raw[0].turn_id == "D1:1");
    CHECK(n.raw[1].turn_id == "D1:5");
    CHECK(n.raw[0].timestamp < n.raw[1].timestamp);
    CHECK(n.context == merged);
    const Vector expect = m.embedder->embed(merged);
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(n.embedding[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    std::set<std::string> surfaces;
    for (KeywordId k : n.keywords) surfaces.insert(g.keyword(k).surface);
    CHECK(surfaces == std::set<std::string>{"lake", "sunrise", "dawn"});
    CHECK(n.merge_count == 1);
    CHECK(n.created_at == created);
    CHECK(n.updated_at >= src.created_at);
    CHECK(g.related_edges().contains({other, t}));
    CHECK(g.keyword(*g.find_keyword("dawn")).note_refs == std::set<NoteId>{t});
    CHECK(check_invariants(g).empty());
    // the merged note is still found by its new context
    CHECK(g.nearest_notes(expect, 1).front().first == t);
}

TEST_CASE("merge: older incoming segments are placed first; blank context falls back") {
    Mock m(64);
    MemoryGraph g(config_with_dim(64));
    Note early;
    early.raw.push_back(RawSegment{"early", "S", "x", "", 0});
    early.context = "early";
    early.embedding = m.embedder->embed("early");
    g.tick();
    const NoteId t = put_note(g, *m.embedder, "later", {});
    merge_notes(g, t, early, "   ", *m.embedder);
    CHECK(g.note(t).raw.front().text == "early");
    CHECK(g.note(t).context == "later; early");
    CHECK(code_of([&] { merge_notes(g, NoteId(42), early, "", *m.embedder); }) == ErrorCode::NotFound);
}

TEST_CASE("candidate neighbourhood: dense and keyword hits fused, self excluded") {
    Mock m(64);
    MemoryGraph g(config_with_dim(64));
    const NoteId a = put_note(g, *m.embedder, "violin practice scales", {"violin"});
    const NoteId b = put_note(g, *m.embedder, "garden tomato basil", {"garden"});
    for (int i = 0; i < 5; ++i) put_note(g, *m.embedder, "noise " + std::to_string(i), {"noise"});
    Note probe = fresh(g, *m.embedder, "violin practice scales", {"garden"});
    const auto c = candidate_neighborhood(g, probe, 3);
    CHECK(c.size() == 3);
    CHECK(std::find(c.begin(), c.end(), a) != c.end());
    CHECK(std::find(c.begin(), c.end(), b) != c.end());
    CHECK(candidate_neighborhood(g, probe, 0).empty());
    const auto self = candidate_neighborhood(g, g.note(a), 10);
    CHECK(std::find(self.begin(), self.end(), a) == self.end());
}

TEST_CASE("ingest examples under the mock policy") {
    Mock m;
    MemoryGraph g;
    auto r1 = ingest(g, "I painted a lake sunrise last weekend.", "Melanie", *m.policy, *m.embedder, {"D1:1", "2023-05-08"});
    CHECK(r1.operation == Operation::Appended);
    CHECK(g.note(r1.note_id).raw.front().speaker == "Melanie");
    CHECK(g.note(r1.note_id).raw.front().date == "2023-05-08");

    // verbatim repeat: cosine 1, merged
    auto r2 = ingest(g, "I painted a lake sunrise last weekend.", "Melanie", *m.policy, *m.embedder, {"D1:9"});
    CHECK(r2.operation == Operation::Merged);
    CHECK(r2.note_id == r1.note_id);
    CHECK(g.note(r1.note_id).raw.size() == 2);
    CHECK(g.note(r1.note_id).context == "I painted a lake sunrise last weekend.");

    // filler with no content tokens still becomes a note
    auto r3 = ingest(g, "wow, that's cool!", "Caroline", *m.policy, *m.embedder, {"D1:10"});
    CHECK(g.note(r3.note_id).keywords.empty());
    CHECK(code_of([&] { ingest(g, "  ", "S", *m.policy, *m.embedder); }) == ErrorCode::Precondition);
    CHECK(check_invariants(g).empty());
    CHECK(g.counters().merge_total == 1);
}

TEST_CASE("ingest: disable_update always appends, disable_denoise keeps raw text") {
    Mock m;
    MemoryGraph g;
    IngestOptions o;
    o.disable_update = true;
    for (int i = 0; i < 3; ++i) ingest(g, "same text again", "S", *m.policy, *m.embedder, o);
    CHECK(g.notes().size() == 3);
    CHECK(g.counters().merge_total == 0);
    o.disable_denoise = true;
    auto r = ingest(g, "  padded  ", "S", *m.policy, *m.embedder, o);
    CHECK(g.note(r.note_id).context == "padded");
}

TEST_CASE("ingest: co-occurrence and periodic evolution") {
    Mock m(64);
    EngineConfig c = config_with_dim(64);
    c.evolve_every = 4;
    MemoryGraph g(c);
    for (const char* s : {"violin orchestra concert", "garden tomato basil", "violin concert hall", "tomato basil soup"}) {
        ingest(g, s, "S", *m.policy, *m.embedder);
    }
    CHECK_FALSE(g.topics().empty());
    const KeywordId v = *g.find_keyword("violin");
    const KeywordId o = *g.find_keyword("orchestra");
    CHECK(g.co_occurrence().at({std::min(v, o), std::max(v, o)}) == 1);
}

TEST_CASE("conservation and invariants over random transcripts") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        std::mt19937_64 rng(seed);
        Mock m(128);
        EngineConfig c = config_with_dim(128);
        c.evolve_every = 25;
        MemoryGraph g(c);
        const auto transcript = random_transcript(rng, 200);
        std::multiset<std::pair<std::string, std::string>> input;
        int merges = 0;
        for (std::size_t i = 0; i < transcript.size(); ++i) {
            const std::string id = "T" + std::to_string(i);
            input.emplace(id, transcript[i].second);
            auto r = ingest(g, transcript[i].second, transcript[i].first, *m.policy, *m.embedder, {id});
            merges += r.operation == Operation::Merged;
            if (i % 20 == 0) REQUIRE(check_invariants(g).empty());
        }
        CHECK(raw_multiset(g) == input);
        CHECK(merges > 0);
        CHECK(g.counters().merge_total + g.counters().append_total == transcript.size());
        CHECK(g.notes().size() == g.counters().append_total);
        CHECK(check_invariants(g).empty());
        const auto d = ib_diagnostics(g);
        CHECK(d.inputs_seen == transcript.size());
        CHECK(d.compression_ratio == doctest::Approx(static_cast<double>(transcript.size()) / g.notes().size()));
    }
}

TEST_CASE("ib diagnostics on an empty graph") {
    MemoryGraph g(config_with_dim(8));
    const auto d = ib_diagnostics(g, 0);
    CHECK(d.compression_ratio == 1.0);
    CHECK(d.mean_keywords_per_note == 0.0);
}

TEST_CASE("operation names") {
    CHECK(to_string(Operation::Merged) == "MERGED");
    CHECK(to_string(Operation::Linked) == "LINKED");
    CHECK(to_string(Operation::Appended) == "APPENDED");
    CHECK(relation_from_string("related to") == RelationType::RelatedTo);
    CHECK(relation_from_string("conflicts") == RelationType::Conflicts);
    CHECK_FALSE(relation_from_string("maybe"));
}
