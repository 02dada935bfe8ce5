#include "memfly/snapshot.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include <json.hpp>

#include "memfly/detail/graph_access.hpp"
#include "memfly/error.hpp"

namespace memfly {

using ojson = nlohmann::ordered_json;
using detail::GraphAccess;

namespace {

constexpr std::string_view kChecksumKey = ",\"checksum\":\"";

std::string crc_hex(std::string_view body) {
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
    return buf;
}

ojson dump_raw(const RawSegment& r) {
    return ojson{{"text", r.text},
                 {"speaker", r.speaker},
                 {"turn_id", r.turn_id},
                 {"date", r.date},
                 {"timestamp", r.timestamp}};
}

ojson ids_of(const auto& set) {
    ojson arr = ojson::array();
    for (const auto& id : set) arr.push_back(id.value);
    return arr;
}

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorCode::CorruptSnapshot, what); }

} // namespace

std::string snapshot_dump(const MemoryGraph& g) {
    ojson doc;
    doc["schema_version"] = kSnapshotSchemaVersion;
    nlohmann::json cfg = g.config();
    doc["config"] = ojson::parse(cfg.dump());
    doc["clock"] = g.clock();
    doc["counters"] = ojson{{"next_note", g.next_note_id()},
                            {"next_keyword", g.next_keyword_id()},
                            {"next_topic", g.next_topic_id()},
                            {"merge_total", g.counters().merge_total},
                            {"append_total", g.counters().append_total},
                            {"link_total", g.counters().link_total}};

    ojson notes = ojson::array();
    for (const auto& [id, n] : g.notes()) {
        ojson raw = ojson::array();
        for (const auto& r : n.raw) raw.push_back(dump_raw(r));
        notes.push_back(ojson{{"id", id.value},
                              {"raw", std::move(raw)},
                              {"context", n.context},
                              {"embedding", n.embedding},
                              {"keywords", ids_of(n.keywords)},
                              {"created_at", n.created_at},
                              {"updated_at", n.updated_at},
                              {"merge_count", n.merge_count}});
    }
    doc["notes"] = std::move(notes);

    ojson keywords = ojson::array();
    for (const auto& [id, kw] : g.keywords()) {
        keywords.push_back(ojson{{"id", id.value},
                                 {"surface", kw.surface},
                                 {"embedding", kw.embedding},
                                 {"topic", kw.topic ? ojson(kw.topic->value) : ojson()}});
    }
    doc["keywords"] = std::move(keywords);

    ojson topics = ojson::array();
    for (const auto& [id, t] : g.topics()) {
        topics.push_back(ojson{{"id", id.value},
                               {"members", ids_of(t.members)},
                               {"centroid", t.centroid},
                               {"undersized_component", t.undersized_component}});
    }
    doc["topics"] = std::move(topics);

    ojson related = ojson::array();
    for (const auto& [key, e] : g.related_edges()) {
        related.push_back(ojson{{"from", key.first.value},
                                {"to", key.second.value},
                                {"relation_type", std::string(to_string(e.type))},
                                {"strength", e.strength},
                                {"annotation", e.annotation}});
    }
    doc["related_edges"] = std::move(related);

    ojson co = ojson::array();
    for (const auto& [key, count] : g.co_occurrence()) {
        co.push_back(ojson{{"a", key.first.value}, {"b", key.second.value}, {"count", count}});
    }
    doc["co_occur_edges"] = std::move(co);

    std::string body = doc.dump();
    const std::string crc = crc_hex(body);
    body.pop_back();
    body += kChecksumKey;
    body += crc;
    body += "\"}";
    return body;
}

MemoryGraph snapshot_parse(const std::string& text) {
    const auto pos = text.rfind(kChecksumKey);
    if (pos == std::string::npos) corrupt("checksum field missing");

    ojson doc = ojson::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) corrupt("document is not valid JSON");

    const auto version = doc.value("schema_version", ojson()).is_number_integer()
                             ? doc["schema_version"].get<int>()
                             : -1;
    if (version != kSnapshotSchemaVersion) {
        throw Error(ErrorCode::SchemaVersionMismatch,
                    "snapshot schema " + std::to_string(version) + ", expected " +
                        std::to_string(kSnapshotSchemaVersion));
    }

    const std::string body = text.substr(0, pos) + "}";
    if (!doc.contains("checksum") || !doc["checksum"].is_string() ||
        doc["checksum"].get<std::string>() != crc_hex(body)) {
        corrupt("checksum mismatch");
    }

    try {
        EngineConfig cfg = nlohmann::json::parse(doc.at("config").dump()).get<EngineConfig>();
        MemoryGraph g(cfg);
        GraphAccess::clock(g) = doc.at("clock").get<Timestamp>();
        const auto& counters = doc.at("counters");
        GraphAccess::next_note(g) = counters.at("next_note").get<std::uint64_t>();
        GraphAccess::next_keyword(g) = counters.at("next_keyword").get<std::uint64_t>();
        GraphAccess::next_topic(g) = counters.at("next_topic").get<std::uint64_t>();
        g.counters().merge_total = counters.at("merge_total").get<std::uint64_t>();
        g.counters().append_total = counters.at("append_total").get<std::uint64_t>();
        g.counters().link_total = counters.at("link_total").get<std::uint64_t>();

        auto& notes = GraphAccess::notes(g);
        auto& keywords = GraphAccess::keywords(g);
        for (const auto& jk : doc.at("keywords")) {
            Keyword kw;
            kw.id = KeywordId{jk.at("id").get<std::uint64_t>()};
            kw.surface = jk.at("surface").get<std::string>();
            kw.embedding = jk.at("embedding").get<Vector>();
            if (!jk.at("topic").is_null()) kw.topic = TopicId{jk.at("topic").get<std::uint64_t>()};
            keywords.emplace(kw.id, std::move(kw));
        }
        for (const auto& jn : doc.at("notes")) {
            Note n;
            n.id = NoteId{jn.at("id").get<std::uint64_t>()};
            for (const auto& jr : jn.at("raw")) {
                n.raw.push_back(RawSegment{jr.at("text").get<std::string>(), jr.at("speaker").get<std::string>(),
                                           jr.at("turn_id").get<std::string>(), jr.at("date").get<std::string>(),
                                           jr.at("timestamp").get<Timestamp>()});
            }
            n.context = jn.at("context").get<std::string>();
            n.embedding = jn.at("embedding").get<Vector>();
            for (const auto& k : jn.at("keywords")) {
                const KeywordId kid{k.get<std::uint64_t>()};
                n.keywords.insert(kid);
                auto kit = keywords.find(kid);
                if (kit == keywords.end()) corrupt("note references unknown keyword");
                kit->second.note_refs.insert(n.id);
            }
            n.created_at = jn.at("created_at").get<Timestamp>();
            n.updated_at = jn.at("updated_at").get<Timestamp>();
            n.merge_count = jn.at("merge_count").get<std::uint64_t>();
            notes.emplace(n.id, std::move(n));
        }
        for (const auto& jt : doc.at("topics")) {
            Topic t;
            t.id = TopicId{jt.at("id").get<std::uint64_t>()};
            for (const auto& k : jt.at("members")) t.members.insert(KeywordId{k.get<std::uint64_t>()});
            t.centroid = jt.at("centroid").get<Vector>();
            t.undersized_component = jt.at("undersized_component").get<bool>();
            GraphAccess::topics(g).emplace(t.id, std::move(t));
        }
        for (const auto& je : doc.at("related_edges")) {
            auto type = relation_from_string(je.at("relation_type").get<std::string>());
            if (!type) corrupt("unknown relation_type");
            GraphAccess::related(g)[{NoteId{je.at("from").get<std::uint64_t>()}, NoteId{je.at("to").get<std::uint64_t>()}}] =
                RelatedEdge{*type, je.at("strength").get<double>(), je.at("annotation").get<std::string>()};
        }
        for (const auto& je : doc.at("co_occur_edges")) {
            GraphAccess::co_occur(g)[{KeywordId{je.at("a").get<std::uint64_t>()}, KeywordId{je.at("b").get<std::uint64_t>()}}] =
                je.at("count").get<std::uint64_t>();
        }
        GraphAccess::reindex(g);
        return g;
    } catch (const nlohmann::json::exception& e) {
        corrupt(std::string("malformed snapshot: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptSnapshot) throw;
        corrupt(e.what());
    }
}

void snapshot_save(const MemoryGraph& g, const std::filesystem::path& path) {
    const std::string text = snapshot_dump(g);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot open " + tmp.string() + " for writing");
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot rename into " + path.string() + ": " + ec.message());
}

MemoryGraph snapshot_load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return snapshot_parse(ss.str());
}

} // namespace memfly
