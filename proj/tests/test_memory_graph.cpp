#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "memfly/detail/graph_access.hpp"
#include "memfly/error.hpp"
#include "memfly/snapshot.hpp"
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

Note bare_note(const EmbeddingProvider& e, const std::string& text) {
    Note n;
    n.raw.push_back(RawSegment{text, "S", "t", "", 1});
    n.context = text;
    n.embedding = e.embed(text);
    return n;
}

// Graph with notes, keywords, links, co-occurrence and topics.
MemoryGraph populated(std::size_t notes, std::uint64_t seed, int dim = 64) {
    std::mt19937_64 rng(seed);
    Mock m(static_cast<std::size_t>(dim));
    MemoryGraph g(config_with_dim(dim));
    for (const auto& [speaker, text] : random_transcript(rng, notes)) {
        IngestOptions o;
        o.turn_id = "t" + std::to_string(g.clock() + 1);
        ingest(g, text, speaker, *m.policy, *m.embedder, o);
    }
    evolve_topics(g);
    return g;
}

}  // namespace

TEST_CASE("add_note keeps note_refs consistent") {
    Mock m(64);
    MemoryGraph g(config_with_dim(64));
    const NoteId a = put_note(g, *m.embedder, "melanie painting", {"melanie", "painting"});
    CHECK(g.notes().size() == 1);
    CHECK(check_invariants(g).empty());
    const NoteId b = put_note(g, *m.embedder, "melanie lake", {"melanie", "lake"});
    const KeywordId k = *g.find_keyword("melanie");
    CHECK(g.keyword(k).note_refs.size() == 2);
    // scan oracle for the inverse mapping
    for (const auto& [kid, kw] : g.keywords()) {
        std::set<NoteId> scan;
        for (const auto& [nid, n] : g.notes()) {
            if (n.keywords.contains(kid)) scan.insert(nid);
        }
        CHECK(scan == kw.note_refs);
    }
    CHECK(a < b);
}

TEST_CASE("add_note rejects wrong dimension and unknown keywords") {
    Mock m(32);
    MemoryGraph g(config_with_dim(64));
    CHECK(code_of([&] { g.add_note(bare_note(*m.embedder, "hello")); }) == ErrorCode::DimensionMismatch);
    Mock m64(64);
    Note n = bare_note(*m64.embedder, "hello");
    n.keywords.insert(KeywordId(99));
    CHECK(code_of([&] { g.add_note(n); }) == ErrorCode::UnknownKeyword);
    CHECK(g.notes().empty());
}

TEST_CASE("upsert_keyword") {
    Mock m(64);
    MemoryGraph g(config_with_dim(64));
    const auto v = m.embedder->embed("transformer");
    const KeywordId a = g.upsert_keyword("transformer", v);
    const KeywordId b = g.upsert_keyword("transformer", m.embedder->embed("other"));
    CHECK(a == b);
    CHECK(g.keyword(a).embedding == v);
    CHECK(g.upsert_keyword("attention", m.embedder->embed("attention")) != a);
    CHECK(code_of([&] { g.upsert_keyword("", v); }) == ErrorCode::EmptySurface);
}

TEST_CASE("remove_note") {
    Mock m(64);
    MemoryGraph empty(config_with_dim(64));
    MemoryGraph g(config_with_dim(64));
    const NoteId a = put_note(g, *m.embedder, "a b", {});
    g.remove_note(a);
    CHECK(g.notes().empty());
    CHECK(g.related_edges().empty());
    CHECK(code_of([&] { g.remove_note(a); }) == ErrorCode::NotFound);

    const NoteId x = put_note(g, *m.embedder, "x", {"kx"});
    const NoteId y = put_note(g, *m.embedder, "y", {"ky"});
    const NoteId z = put_note(g, *m.embedder, "z", {"kz"});
    g.link(x, y, {RelationType::RelatedTo, 0.6, ""});
    g.link(z, x, {RelationType::Supports, 0.2, ""});
    g.link(y, z, {RelationType::RelatedTo, 0.9, ""});
    g.remove_note(x);
    for (const auto& [e, _] : g.related_edges()) {
        CHECK(e.first != x);
        CHECK(e.second != x);
    }
    CHECK(g.related_edges().size() == 1);
    // orphaned keyword stays until evolution
    CHECK(g.find_keyword("kx").has_value());
    CHECK(g.keyword(*g.find_keyword("kx")).note_refs.empty());
    CHECK(check_invariants(g).empty());
    // ids never reused
    const NoteId w = put_note(g, *m.embedder, "w", {});
    CHECK(w.value > z.value);
}

TEST_CASE("link: last writer wins, self loops rejected") {
    Mock m(64);
    MemoryGraph g(config_with_dim(64));
    const NoteId a = put_note(g, *m.embedder, "a", {});
    const NoteId b = put_note(g, *m.embedder, "b", {});
    link_notes(g, a, b, RelationType::RelatedTo, 0.6);
    CHECK(g.related_edges().size() == 1);
    link_notes(g, a, b, RelationType::Supports, 0.3);
    CHECK(g.related_edges().size() == 1);
    CHECK(g.related_edges().at({a, b}).strength == 0.3);
    CHECK(g.related_edges().at({a, b}).type == RelationType::Supports);
    CHECK(code_of([&] { link_notes(g, a, a, RelationType::RelatedTo, 0.6); }) == ErrorCode::SelfLoop);
    CHECK(code_of([&] { link_notes(g, a, NoteId(77), RelationType::RelatedTo, 0.6); }) == ErrorCode::NotFound);
}

TEST_CASE("co-occurrence bookkeeping") {
    Mock m(64);
    MemoryGraph g(config_with_dim(64));
    const KeywordId a = g.upsert_keyword("a", m.embedder->embed("a"));
    const KeywordId b = g.upsert_keyword("b", m.embedder->embed("b"));
    const KeywordId c = g.upsert_keyword("c", m.embedder->embed("c"));
    update_cooccurrence(g, {a, b, c});
    CHECK(g.co_occurrence().size() == 3);
    for (const auto& [k, n] : g.co_occurrence()) CHECK(n == 1);
    update_cooccurrence(g, {a});
    CHECK(g.co_occurrence().size() == 3);
    update_cooccurrence(g, {b, a});
    CHECK(g.co_occurrence().at({a, b}) == 2);
    g.add_cooccurrence(c, a);
    CHECK(g.co_occurrence().at({a, c}) == 2);
}

TEST_CASE("nearest_notes and nearest_keywords match an exhaustive scan") {
    std::mt19937_64 rng(17);
    for (int round = 0; round < 20; ++round) {
        EngineConfig c = config_with_dim(24);
        c.index_mode = IndexMode::Exact;
        MemoryGraph g(c);
        const std::size_t n = 5 + below(rng, 60);
        for (std::size_t i = 0; i < n; ++i) {
            Note note;
            note.raw.push_back(RawSegment{"x", "S", "t", "", i + 1});
            note.context = "x";
            note.embedding = random_unit(rng, 24);
            g.add_note(std::move(note));
            g.upsert_keyword("k" + std::to_string(i), random_unit(rng, 24));
        }
        const Vector q = random_unit(rng, 24);
        for (std::size_t k : {std::size_t{1}, std::size_t{3}, n, n + 5}) {
            auto got = g.nearest_notes(q, k);
            std::vector<std::pair<NoteId, double>> ref;
            for (const auto& [id, note] : g.notes()) ref.emplace_back(id, plain_dot(q, note.embedding));
            order(ref);
            ref.resize(std::min(k, ref.size()));
            REQUIRE(got.size() == ref.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].first == ref[i].first);
                CHECK(got[i].second == doctest::Approx(ref[i].second).epsilon(1e-12));
            }
            auto kg = g.nearest_keywords(q, k);
            std::vector<std::pair<KeywordId, double>> kref;
            for (const auto& [id, kw] : g.keywords()) kref.emplace_back(id, plain_dot(q, kw.embedding));
            std::stable_sort(kref.begin(), kref.end(), [](const auto& a, const auto& b) {
                return a.second != b.second ? a.second > b.second : a.first < b.first;
            });
            kref.resize(std::min(k, kref.size()));
            REQUIRE(kg.size() == kref.size());
            for (std::size_t i = 0; i < kg.size(); ++i) CHECK(kg[i].first == kref[i].first);
        }
        // self match
        const auto& first = g.notes().begin()->second;
        auto self = g.nearest_notes(first.embedding, 1);
        CHECK(self.front().first == first.id);
        CHECK(self.front().second == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(code_of([&] { g.nearest_notes(Vector(3, 1.0), 1); }) == ErrorCode::DimensionMismatch);
    }
}

TEST_CASE("ties are broken by ascending id") {
    Mock m(64);
    MemoryGraph g(config_with_dim(64));
    for (int i = 0; i < 4; ++i) put_note(g, *m.embedder, "same text", {});
    auto r = g.nearest_notes(m.embedder->embed("same text"), 4);
    for (std::size_t i = 1; i < r.size(); ++i) CHECK(r[i - 1].first < r[i].first);
}

TEST_CASE("approximate index recalls exact neighbours for self queries") {
    std::mt19937_64 rng(5);
    EngineConfig c = config_with_dim(32);
    c.index_mode = IndexMode::Approximate;
    MemoryGraph g(c);
    std::vector<Vector> vs;
    for (int i = 0; i < 300; ++i) {
        Note note;
        note.raw.push_back(RawSegment{"x", "S", "t", "", static_cast<Timestamp>(i + 1)});
        note.context = "x";
        note.embedding = random_unit(rng, 32);
        vs.push_back(note.embedding);
        g.add_note(std::move(note));
    }
    CHECK(g.note_index().uses_approximate());
    int hits = 0;
    for (std::size_t i = 0; i < vs.size(); ++i) hits += g.nearest_notes(vs[i], 1).front().first == NoteId(i + 1);
    CHECK(hits == 300);
    // rescoring is exact, so scores always agree with the scan oracle
    const Vector q = random_unit(rng, 32);
    for (const auto& [id, s] : g.nearest_notes(q, 5)) CHECK(s == doctest::Approx(plain_dot(q, g.note(id).embedding)));
}

TEST_CASE("check_invariants flags a broken back-reference exactly once") {
    Mock m(64);
    MemoryGraph g(config_with_dim(64));
    put_note(g, *m.embedder, "melanie painting", {"melanie", "painting"});
    CHECK(check_invariants(g).empty());
    auto& kws = detail::GraphAccess::keywords(g);
    kws.begin()->second.note_refs.clear();
    const auto v = check_invariants(g);
    REQUIRE(v.size() == 1);
    CHECK(v.front().entity == "note 1");
}

TEST_CASE("check_invariants is clean after the mock pipeline") {
    MemoryGraph g = populated(120, 3);
    CHECK(check_invariants(g).empty());
}

TEST_CASE("reconfigure") {
    Mock m(64);
    MemoryGraph g(config_with_dim(64));
    put_note(g, *m.embedder, "a", {"a"});
    EngineConfig c = g.config();
    c.k_final = 3;
    c.index_mode = IndexMode::Approximate;
    g.reconfigure(c);
    CHECK(g.config().k_final == 3);
    CHECK(g.note_index().uses_approximate());
    c.embedding_dim = 32;
    CHECK(code_of([&] { g.reconfigure(c); }) == ErrorCode::DimensionMismatch);
    c.embedding_dim = 64;
    c.tau_link = 0.9;
    CHECK(code_of([&] { g.reconfigure(c); }) == ErrorCode::InvalidConfig);
}

// ---- snapshots --------------------------------------------------------------

namespace {

// Field-by-field comparison written independently of operator==.
void structural_diff(const MemoryGraph& a, const MemoryGraph& b) {
    CHECK(a.clock() == b.clock());
    CHECK(a.config() == b.config());
    CHECK(a.counters() == b.counters());
    CHECK(a.next_note_id() == b.next_note_id());
    CHECK(a.next_keyword_id() == b.next_keyword_id());
    CHECK(a.next_topic_id() == b.next_topic_id());
    REQUIRE(a.notes().size() == b.notes().size());
    for (auto ia = a.notes().begin(), ib = b.notes().begin(); ia != a.notes().end(); ++ia, ++ib) {
        CHECK(ia->first == ib->first);
        CHECK(ia->second.raw == ib->second.raw);
        CHECK(ia->second.context == ib->second.context);
        CHECK(ia->second.keywords == ib->second.keywords);
        CHECK(ia->second.merge_count == ib->second.merge_count);
        CHECK(ia->second.created_at == ib->second.created_at);
        CHECK(ia->second.updated_at == ib->second.updated_at);
        REQUIRE(ia->second.embedding.size() == ib->second.embedding.size());
        CHECK(std::memcmp(ia->second.embedding.data(), ib->second.embedding.data(),
                          ia->second.embedding.size() * sizeof(double)) == 0);
    }
    REQUIRE(a.keywords().size() == b.keywords().size());
    for (auto ia = a.keywords().begin(), ib = b.keywords().begin(); ia != a.keywords().end(); ++ia, ++ib) {
        CHECK(ia->second.surface == ib->second.surface);
        CHECK(ia->second.note_refs == ib->second.note_refs);
        CHECK(ia->second.topic == ib->second.topic);
        CHECK(std::memcmp(ia->second.embedding.data(), ib->second.embedding.data(),
                          ia->second.embedding.size() * sizeof(double)) == 0);
    }
    CHECK(a.topics() == b.topics());
    CHECK(a.related_edges() == b.related_edges());
    CHECK(a.co_occurrence() == b.co_occurrence());
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("memfly-test-" + std::to_string(::getpid()) + "-" + name);
}

}  // namespace

TEST_CASE("snapshot round trip: empty graph") {
    MemoryGraph g(config_with_dim(16));
    MemoryGraph back = snapshot_parse(snapshot_dump(g));
    CHECK(back == g);
    structural_diff(g, back);
}

TEST_CASE("snapshot round trip: 100-note graph") {
    MemoryGraph g = populated(220, 11);
    REQUIRE(g.notes().size() >= 100);
    const auto path = temp_file("rt.json");
    snapshot_save(g, path);
    MemoryGraph back = snapshot_load(path);
    std::filesystem::remove(path);
    structural_diff(g, back);
    CHECK(back == g);
    CHECK(check_invariants(back).empty());
    // indices were rebuilt
    const auto& n = back.notes().begin()->second;
    CHECK(back.nearest_notes(n.embedding, 1).front().first == n.id);
    // dumping again is byte-identical
    CHECK(snapshot_dump(back) == snapshot_dump(g));
}

TEST_CASE("snapshot failures") {
    MemoryGraph g = populated(20, 1);
    const std::string text = snapshot_dump(g);
    CHECK(code_of([&] { snapshot_parse(text.substr(0, text.size() / 2)); }) == ErrorCode::CorruptSnapshot);
    std::string tampered = text;
    const auto pos = tampered.find("\"context\":\"") + 11;
    tampered[pos] = tampered[pos] == 'x' ? 'y' : 'x';
    CHECK(code_of([&] { snapshot_parse(tampered); }) == ErrorCode::CorruptSnapshot);
    auto j = nlohmann::ordered_json::parse(text);
    j["schema_version"] = 99;
    CHECK(code_of([&] { snapshot_parse(j.dump()); }) == ErrorCode::SchemaVersionMismatch);
    CHECK(code_of([] { snapshot_load("/nonexistent/dir/snap.json"); }) == ErrorCode::Io);
    const auto path = temp_file("trunc.json");
    {
        std::ofstream(path) << text.substr(0, 100);
    }
    CHECK(code_of([&] { snapshot_load(path); }) == ErrorCode::CorruptSnapshot);
    std::filesystem::remove(path);
}

TEST_CASE("snapshot document layout") {
    MemoryGraph g = populated(10, 2);
    auto j = nlohmann::ordered_json::parse(snapshot_dump(g));
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    CHECK(keys.front() == "schema_version");
    CHECK(keys.back() == "checksum");
    CHECK(j["schema_version"] == 1);
    for (const char* k : {"config", "clock", "notes", "keywords", "topics", "related_edges", "co_occur_edges"}) {
        CHECK(j.contains(k));
    }
}
