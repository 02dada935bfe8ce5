#include <doctest.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "memfly/error.hpp"
#include "memfly/http_transport.hpp"
#include "memfly/prompts.hpp"
#include "support.hpp"

using namespace memfly;
using namespace testsupport;
using nlohmann::json;

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

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string golden(const std::string& name) {
    return read_file(std::string(MEMFLY_SOURCE_DIR) + "/tests/golden/prompts/" + name + ".txt");
}

std::string chomp(std::string s) {
    while (!s.empty() && s.back() == '\n') s.pop_back();
    return s;
}

// Replays canned replies in order and records every request.
class ScriptedChat final : public ChatClient {
public:
    explicit ScriptedChat(std::vector<std::string> replies) : replies_(std::move(replies)) {}
    std::string complete(const ChatRequest& r) const override {
        requests.push_back(r);
        if (replies_.empty()) throw Error(ErrorCode::RemoteFailure, "script exhausted");
        std::string s = replies_.front();
        replies_.erase(replies_.begin());
        return s;
    }
    mutable std::vector<ChatRequest> requests;

private:
    mutable std::vector<std::string> replies_;
};

NoteView view(std::uint64_t id, std::string context, std::vector<std::string> kws) {
    return NoteView{NoteId(id), context, std::move(context), std::move(kws)};
}

// OpenAI-compatible stub on an ephemeral port.
struct StubServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> chat_calls{0};
    std::atomic<int> embed_calls{0};
    std::atomic<int> fail_first{0};
    std::string last_auth;
    json last_body;
    std::string chat_reply = "{\"keywords\": [\"Lake\", \"sunrises\"], \"context\": \"Melanie painted a sunrise.\"}";
    std::size_t embed_dim = 8;

    StubServer() {
        server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            ++chat_calls;
            if (fail_first > 0) {
                --fail_first;
                res.status = 500;
                return;
            }
            last_auth = req.get_header_value("Authorization");
            last_body = json::parse(req.body);
            json out{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", chat_reply}}}}})}};
            res.set_content(out.dump(), "application/json");
        });
        server.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
            ++embed_calls;
            last_body = json::parse(req.body);
            json data = json::array();
            std::size_t i = 0;
            for (const auto& t : last_body["input"]) {
                std::vector<double> v(embed_dim, 0.0);
                v[t.get<std::string>().size() % embed_dim] = 3.0;
                data.push_back({{"index", i++}, {"embedding", v}});
            }
            res.set_content(json{{"data", data}}.dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~StubServer() {
        server.stop();
        thread.join();
    }
    std::string base() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1"; }
};

}  // namespace

// ---- mock policy -------------------------------------------------------------

TEST_CASE("mock: redundancy and complementarity scores") {
    Mock m;
    CHECK(m.policy->redundancy("Melanie painted a lake", "Melanie painted a lake") == doctest::Approx(1.0));
    CHECK(MockPolicy::complementarity({"a", "b"}, {"b", "c"}) == doctest::Approx(1.0 / 3.0));
    CHECK(MockPolicy::complementarity({}, {}) == 0.0);
    CHECK(MockPolicy::complementarity({"a"}, {"a"}) == 1.0);
}

TEST_CASE("mock: identical note is a strong SUPPORTS with a merged context") {
    Mock m;
    const auto n = view(0, "Melanie painted a lake sunrise.", {"melanie", "lake", "sunrise"});
    const std::vector<NoteView> cands{view(3, "Melanie painted a lake sunrise.", {"melanie", "lake", "sunrise"})};
    auto j = m.policy->judge_candidates(n, cands);
    REQUIRE(j.size() == 1);
    CHECK(j[0].candidate == NoteId(3));
    CHECK(j[0].relation_type == RelationType::Supports);
    CHECK(j[0].connection_strength == doctest::Approx(1.0));
    CHECK(j[0].merged_context == std::optional<std::string>("Melanie painted a lake sunrise."));
}

TEST_CASE("mock: relation follows the larger score, ties to SUPPORTS") {
    Mock m;
    std::mt19937_64 rng(4);
    const std::vector<std::string> words = {"melanie", "caroline", "lake", "sunrise", "violin", "beagle", "garden"};
    for (int t = 0; t < 100; ++t) {
        auto pick = [&] {
            std::vector<std::string> v;
            for (int i = 0; i < 3; ++i) v.push_back(words[below(rng, words.size())]);
            return v;
        };
        auto a = pick(), b = pick();
        const auto na = view(0, text::join(a, " "), parse::canonical_keywords(a));
        const std::vector<NoteView> cb{view(9, text::join(b, " "), parse::canonical_keywords(b))};
        const auto j = m.policy->judge_candidates(na, cb).at(0);
        const double red = std::max(0.0, plain_dot(m.embedder->embed(na.context), m.embedder->embed(cb[0].context)));
        std::set<std::string> sa(na.keywords.begin(), na.keywords.end()), sb(cb[0].keywords.begin(), cb[0].keywords.end());
        std::size_t inter = 0;
        for (const auto& x : sa) inter += sb.count(x);
        const double comp = static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
        if (red >= comp) {
            CHECK(j.relation_type == RelationType::Supports);
            CHECK(j.connection_strength == doctest::Approx(red));
        } else {
            CHECK(j.relation_type == RelationType::RelatedTo);
            CHECK(j.connection_strength == doctest::Approx(comp));
        }
        CHECK(j.merged_context.has_value() == (j.connection_strength >= 0.7));
    }
    CHECK(code_of([&] { m.policy->judge_candidates(view(0, "x", {}), {}); }) == ErrorCode::Precondition);
}

TEST_CASE("mock: ingest, intent, sufficiency, subquery") {
    Mock m;
    auto r = m.policy->ingest_parse("  Melanie bought two paintings and a violin at the museum, yesterday!  ", "Melanie");
    auto expect = text::content_tokens(r.context);
    expect.resize(5);
    CHECK(r.keywords == expect);
    CHECK(std::find(r.keywords.begin(), r.keywords.end(), "painting") != r.keywords.end());
    CHECK(r.context == "Melanie bought two paintings and a violin at the museum, yesterday!");
    CHECK(code_of([&] { m.policy->ingest_parse("   ", "S"); }) == ErrorCode::Precondition);

    auto qi = m.policy->parse_query_intent("What did Melanie paint last weekend?");
    CHECK(qi.keywords == std::vector<std::string>{"melanie", "paint", "last", "weekend"});
    CHECK(qi.topic_desc == "melanie paint last weekend");

    auto v = m.policy->judge_sufficiency("- Melanie painted a lake", "What did Melanie paint by the lake?");
    CHECK_FALSE(v.sufficient);
    CHECK(v.missing_info == "paint");
    v = m.policy->judge_sufficiency("- Melanie paint lake", "What did Melanie paint by the lake?");
    CHECK(v.sufficient);
    CHECK(v.confidence == 1.0);
    CHECK_FALSE(m.policy->judge_sufficiency("", "Melanie?").sufficient);

    CHECK(m.policy->generate_subquery("q", "e", "", std::string_view("the gallery name")) ==
          std::optional<std::string>("gallery name"));
    CHECK_FALSE(m.policy->generate_subquery("q", "e", "", std::nullopt));
    CHECK_FALSE(m.policy->generate_subquery("q", "e", "", std::string_view("the of")));
    const std::vector<std::string> ctx{"first", "second"};
    CHECK(m.policy->answer("q", "e", ctx, 0.7) == "first");
}

// ---- parsers -----------------------------------------------------------------

TEST_CASE("parse: extract_json variants") {
    CHECK(parse::extract_json("{\"a\": 1}")->at("a") == 1);
    CHECK(parse::extract_json("```json\n{\"a\": 2}\n```")->at("a") == 2);
    CHECK(parse::extract_json("Sure! Here you go: {\"a\": {\"b\": \"}\"}} trailing")->at("a").at("b") == "}");
    CHECK(parse::extract_json("prefix [1, 2] suffix")->size() == 2);
    CHECK_FALSE(parse::extract_json("no json here"));
    CHECK_FALSE(parse::extract_json(""));
    CHECK_FALSE(parse::extract_json("{\"a\": "));
}

TEST_CASE("parse: ingest response") {
    auto r = parse::ingest_response("{\"keywords\": [\"Transformers\", \"transformer\", \" LGBTQ  Support Groups\"], "
                                    "\"context\": \" A summary. \"}",
                                    "raw");
    REQUIRE(r);
    CHECK(r->keywords == std::vector<std::string>{"transformer", "lgbtq support group"});
    CHECK(r->context == "A summary.");
    r = parse::ingest_response("{\"keywords\": [], \"context\": \"\"}", "raw text");
    REQUIRE(r);
    CHECK(r->context == "raw text");
    CHECK_FALSE(parse::ingest_response("{\"keywords\": \"x\", \"context\": \"y\"}", "raw"));
    CHECK_FALSE(parse::ingest_response("{\"context\": \"y\"}", "raw"));
    auto many = parse::ingest_response(R"({"keywords": ["a1","b1","c1","d1","e1","f1","g1"], "context": "c"})", "r");
    CHECK(many->keywords.size() == 5);
}

TEST_CASE("parse: judgments by id, positional and garbage") {
    const std::vector<NoteId> ids{NoteId(7), NoteId(9)};
    auto j = parse::judgments_response(
        R"([{"candidate_id": 9, "relation_type": "supports", "connection_strength": 0.9, "merged_context": "m"},
            {"candidate_id": "ID: 7", "relation_type": "RELATED-TO", "connection_strength": "1.4"},
            {"candidate_id": 55, "relation_type": "SUPPORTS", "connection_strength": 0.9}])",
        ids);
    REQUIRE(j);
    REQUIRE(j->size() == 2);
    CHECK((*j)[0].candidate == NoteId(7));
    CHECK((*j)[0].relation_type == RelationType::RelatedTo);
    CHECK((*j)[0].connection_strength == 1.0);
    CHECK((*j)[1].candidate == NoteId(9));
    CHECK((*j)[1].merged_context == std::optional<std::string>("m"));

    auto pos = parse::judgments_response(R"({"judgments": [{"relation_type": "CONFLICTS", "connection_strength": 0.3}]})", ids);
    REQUIRE(pos);
    REQUIRE(pos->size() == 1);
    CHECK(pos->front().candidate == NoteId(7));
    CHECK(pos->front().relation_type == RelationType::Conflicts);

    auto single = parse::judgments_response(R"({"relation_type": "SUPPORTS", "connection_strength": 0.2})", ids);
    REQUIRE(single);
    CHECK(single->size() == 1);

    auto bad = parse::judgments_response(R"([{"relation_type": "MAYBE", "connection_strength": 0.2}])", ids);
    REQUIRE(bad);
    CHECK(bad->empty());
    CHECK_FALSE(parse::judgments_response("nothing", ids));
}

TEST_CASE("parse: query intent, sufficiency, subquery") {
    auto qi = parse::query_intent_response(
        R"({"topic_desc": "Personal Hobbies and Creative Pursuits of the Speaker Today", "keywords": ["Paintings"]})");
    REQUIRE(qi);
    CHECK(qi->topic_desc == "Personal Hobbies and Creative Pursuits of the Speaker");
    CHECK(qi->keywords == std::vector<std::string>{"painting"});
    CHECK_FALSE(parse::query_intent_response(R"({"keywords": ["x"]})"));

    auto v = parse::sufficiency_response(R"({"sufficient": "No", "missing_info": "the date", "confidence": 2})");
    REQUIRE(v);
    CHECK_FALSE(v->sufficient);
    CHECK(v->missing_info == "the date");
    CHECK(v->confidence == 1.0);
    CHECK_FALSE(parse::sufficiency_response(R"({"sufficient": "perhaps"})"));
    CHECK_FALSE(parse::sufficiency_response("[]"));

    CHECK(parse::subquery_response("  \"When did Melanie paint the lake?\"\nbecause ...") ==
          std::optional<std::string>("When did Melanie paint the lake?"));
    CHECK(parse::subquery_response("Sub-query: Who adopted the puppy?") == std::optional<std::string>("Who adopted the puppy?"));
    for (const char* none : {"None", "none.", "'None'", "\"NONE\"", "   ", "null"}) CHECK_FALSE(parse::subquery_response(none));
}

TEST_CASE("parsers never throw on arbitrary input") {
    std::mt19937_64 rng(123);
    const std::string alphabet = "{}[]\":,. abcNonetrue0123456789\\`\n";
    const std::vector<NoteId> ids{NoteId(1), NoteId(2)};
    for (int t = 0; t < 2000; ++t) {
        std::string s;
        const std::size_t len = below(rng, 60);
        for (std::size_t i = 0; i < len; ++i) s += alphabet[below(rng, alphabet.size())];
        CHECK_NOTHROW(parse::extract_json(s));
        CHECK_NOTHROW(parse::ingest_response(s, "raw"));
        CHECK_NOTHROW(parse::judgments_response(s, ids));
        CHECK_NOTHROW(parse::query_intent_response(s));
        CHECK_NOTHROW(parse::sufficiency_response(s));
        CHECK_NOTHROW(parse::subquery_response(s));
    }
}

TEST_CASE("fallback query intent") {
    auto qi = fallback_query_intent("When did Caroline go to the LGBTQ support group meeting in the city?");
    CHECK(qi.topic_desc == "When did Caroline go to the LGBTQ support");
    CHECK(qi.keywords.size() == 5);
    CHECK(qi.keywords.front() == "caroline");
}

// ---- prompt templates --------------------------------------------------------

TEST_CASE("render substitutes once and leaves other braces") {
    CHECK(prompts::render("{a} and {b} {\"json\": 1} {missing}", {{"a", "{b}"}, {"b", "B"}}) ==
          "{b} and B {\"json\": 1} {missing}");
}

TEST_CASE("rendered prompts match the golden files") {
    CHECK(chomp(prompts::render(prompts::kSemanticIngestion,
                                {{"content", "Melanie: I painted a lake sunrise last weekend."}})) ==
          chomp(golden("semantic_ingestion")));
    CHECK(chomp(prompts::render(prompts::kGatedUpdate,
                                {{"content", "I painted a lake sunrise."},
                                 {"context", "Melanie painted a lake sunrise."},
                                 {"keywords", "[\"lake\", \"sunrise\"]"},
                                 {"candidates_str", "[ID: 7] Content: \"I love painting.\" Context: \"Melanie loves "
                                                    "painting.\" Keywords: [\"painting\"]"}})) ==
          chomp(golden("gated_update")));
    CHECK(chomp(prompts::render(prompts::kQueryIntent, {{"query", "What did Melanie paint last weekend?"}})) ==
          chomp(golden("query_intent")));
    CHECK(chomp(prompts::render(
              prompts::kSufficiency,
              {{"question", "What did Melanie paint?"},
               {"context", "- Melanie painted a lake sunrise. (raw: Melanie: I painted a lake sunrise., 2023-05-08)"}})) ==
          chomp(golden("sufficiency")));
    CHECK(chomp(prompts::render(prompts::kSubQuery, {{"query_str", "Where was the painting shown?"},
                                                     {"context_str", "- Melanie painted a lake sunrise."},
                                                     {"prev_reasoning", "(none)"},
                                                     {"missing_info", "the gallery name"}})) ==
          chomp(golden("subquery")));
}

// ---- LlmPolicy over a scripted client ------------------------------------------

TEST_CASE("llm policy: ingest retries once then falls back") {
    auto chat = std::make_shared<ScriptedChat>(std::vector<std::string>{"garbage", "still garbage"});
    LlmPolicy p(chat, {});
    auto r = p.ingest_parse("I painted.", "Melanie");
    CHECK(r.keywords.empty());
    CHECK(r.context == "I painted.");
    CHECK(chat->requests.size() == 2);
    CHECK(chat->requests[0].user.find("Input Text: Melanie: I painted.") != std::string::npos);

    auto ok = std::make_shared<ScriptedChat>(std::vector<std::string>{"{\"keywords\": [\"paint\"], \"context\": \"c\"}"});
    CHECK(LlmPolicy(ok, {}).ingest_parse("x", "S").keywords == std::vector<std::string>{"paint"});
}

TEST_CASE("llm policy: judgments get a merge fallback only when strong") {
    auto chat = std::make_shared<ScriptedChat>(std::vector<std::string>{
        R"([{"candidate_id": 1, "relation_type": "SUPPORTS", "connection_strength": 0.9},
            {"candidate_id": 2, "relation_type": "RELATED_TO", "connection_strength": 0.6, "merged_context": "drop me"},
            {"candidate_id": 3, "relation_type": "CONFLICTS", "connection_strength": 0.95, "merged_context": "drop me"}])"});
    LlmPolicy p(chat, {});
    const std::vector<NoteView> cands{view(1, "A.", {"a"}), view(2, "B.", {"b"}), view(3, "C.", {"c"})};
    auto j = p.judge_candidates(view(0, "N.", {"n"}), cands);
    REQUIRE(j.size() == 3);
    CHECK(j[0].merged_context == std::optional<std::string>("A.; N."));
    CHECK_FALSE(j[1].merged_context);
    CHECK_FALSE(j[2].merged_context);
    CHECK(chat->requests[0].system.find("relation_type") != std::string::npos);
    CHECK(chat->requests[0].user.find("[ID: 2]") != std::string::npos);
}

TEST_CASE("llm policy: documented fallbacks") {
    auto chat = std::make_shared<ScriptedChat>(std::vector<std::string>{"?", "?", "None", "  Final answer. "});
    LlmPolicy p(chat, {});
    CHECK(p.parse_query_intent("What did Melanie paint?") == fallback_query_intent("What did Melanie paint?"));
    auto v = p.judge_sufficiency("e", "q");
    CHECK(v.sufficient);
    CHECK_FALSE(p.generate_subquery("q", "e", "", std::string_view("x")));
    CHECK_FALSE(p.generate_subquery("q", "e", "", std::nullopt));
    const std::vector<std::string> ctx;
    CHECK(p.answer("q", "e", ctx, 0.5) == "Final answer.");
    CHECK(chat->requests.back().temperature == 0.5);
}

TEST_CASE("llm policy: custom answer template") {
    auto chat = std::make_shared<ScriptedChat>(std::vector<std::string>{"ok"});
    LlmPolicy p(chat, {0.7, 0.7, "Q={question} C={context}"});
    const std::vector<std::string> ctx;
    p.answer("who", "ev", ctx, 0.7);
    CHECK(chat->requests[0].user == "Q=who C=ev");
}

// ---- HTTP clients --------------------------------------------------------------

TEST_CASE("base url parsing") {
    CHECK(parse_base_url("http://localhost:8000/v1").scheme_host_port == "http://localhost:8000");
    CHECK(parse_base_url("http://localhost:8000/v1/").path_prefix == "/v1");
    CHECK(parse_base_url("http://h:1").path_prefix.empty());
}

TEST_CASE("remote chat client and policy against a stub server") {
    StubServer stub;
    RemoteEndpoint ep{stub.base(), "test-model", "sekret", std::chrono::milliseconds(5000), 2};
    auto client = std::make_shared<RemoteChatClient>(ep);
    LlmPolicy p(client, {});
    auto r = p.ingest_parse("I painted a sunrise", "Melanie");
    CHECK(r.keywords == std::vector<std::string>{"lake", "sunrise"});
    CHECK(r.context == "Melanie painted a sunrise.");
    CHECK(stub.last_auth == "Bearer sekret");
    CHECK(stub.last_body["model"] == "test-model");
    CHECK(stub.last_body["messages"].back()["role"] == "user");

    stub.fail_first = 2;
    const int before = stub.chat_calls;
    CHECK_NOTHROW(client->complete({"", "hi", 0.7}));
    CHECK(stub.chat_calls - before == 3);

    stub.fail_first = 5;
    CHECK(code_of([&] { client->complete({"", "hi", 0.7}); }) == ErrorCode::RemoteFailure);
}

TEST_CASE("remote embedder: batching, normalization, memoization") {
    StubServer stub;
    RemoteEmbedder e({stub.base(), "emb", "", std::chrono::milliseconds(5000), 0}, 8);
    const auto v = e.embed("abc");
    CHECK(v.size() == 8);
    CHECK(v[3] == doctest::Approx(1.0));
    e.embed("abc");
    CHECK(stub.embed_calls == 1);

    std::vector<std::string> texts;
    for (int i = 0; i < 150; ++i) texts.push_back("text number " + std::to_string(i));
    const auto vs = e.embed_batch(texts);
    CHECK(vs.size() == 150);
    CHECK(stub.embed_calls == 1 + 3);
    CHECK(vs[7] == e.embed(texts[7]));
    CHECK(code_of([&] { e.embed(" "); }) == ErrorCode::EmptyText);

    RemoteEmbedder wrong({stub.base(), "emb", "", std::chrono::milliseconds(5000), 0}, 16);
    CHECK(code_of([&] { wrong.embed("abc"); }) == ErrorCode::RemoteFailure);

    RemoteEmbedder dead({"http://127.0.0.1:1/v1", "emb", "", std::chrono::milliseconds(300), 1}, 8);
    CHECK(code_of([&] { dead.embed("abc"); }) == ErrorCode::RemoteFailure);
}
