#include "memfly/policy.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>

#include "memfly/error.hpp"
#include "memfly/http_transport.hpp"
#include "memfly/prompts.hpp"
#include "memfly/text.hpp"

namespace memfly {

using nlohmann::json;

NoteView make_view(const MemoryGraph& g, const Note& n) {
    NoteView v;
    v.id = n.id;
    v.content = n.raw.empty() ? std::string() : n.raw.back().text;
    v.context = n.context;
    for (KeywordId k : n.keywords) v.keywords.push_back(g.keyword(k).surface);
    return v;
}

// ---------------------------------------------------------------- chat client

RemoteChatClient::RemoteChatClient(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    if (endpoint_.base_url.empty()) throw Error(ErrorCode::InvalidConfig, "LLM base URL is empty");
    if (endpoint_.api_key.empty()) {
        if (const char* key = std::getenv("MEMFLY_LLM_API_KEY")) endpoint_.api_key = key;
    }
}

std::string RemoteChatClient::complete(const ChatRequest& request) const {
    json messages = json::array();
    if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
    messages.push_back({{"role", "user"}, {"content", request.user}});
    const json body{{"model", endpoint_.model}, {"temperature", request.temperature}, {"messages", messages}};
    const json res =
        post_json(endpoint_.base_url, "/chat/completions", body, endpoint_.api_key, endpoint_.timeout, endpoint_.max_retries);
    try {
        return res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::RemoteFailure, "chat response lacks choices[0].message.content");
    }
}

// -------------------------------------------------------------------- parsers

namespace parse {

std::optional<json> extract_json(std::string_view text) {
    auto try_parse = [](std::string_view s) -> std::optional<json> {
        auto j = json::parse(s.begin(), s.end(), nullptr, false);
        if (j.is_discarded()) return std::nullopt;
        return j;
    };
    if (auto j = try_parse(text)) return j;

    // fenced block: ```json ... ```
    if (auto fence = text.find("```"); fence != std::string_view::npos) {
        auto body_start = text.find('\n', fence);
        auto close = body_start == std::string_view::npos ? std::string_view::npos : text.find("```", body_start);
        if (close != std::string_view::npos) {
            if (auto j = try_parse(text.substr(body_start + 1, close - body_start - 1))) return j;
        }
    }

    // first balanced {...} or [...] after leading prose
    for (std::size_t start = 0; start < text.size(); ++start) {
        const char open = text[start];
        if (open != '{' && open != '[') continue;
        const char close = open == '{' ? '}' : ']';
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == open) ++depth;
            else if (c == close && --depth == 0) {
                if (auto j = try_parse(text.substr(start, i - start + 1))) return j;
                break;
            }
        }
    }
    return std::nullopt;
}

std::vector<std::string> canonical_keywords(const std::vector<std::string>& raw, std::size_t cap) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& r : raw) {
        std::string c = text::canonical_keyword(r);
        if (c.empty() || !seen.insert(c).second) continue;
        out.push_back(std::move(c));
        if (out.size() == cap) break;
    }
    return out;
}

namespace {

std::optional<std::vector<std::string>> string_list(const json& j) {
    if (!j.is_array()) return std::nullopt;
    std::vector<std::string> out;
    for (const auto& e : j) {
        if (!e.is_string()) return std::nullopt;
        out.push_back(e.get<std::string>());
    }
    return out;
}

std::optional<double> number_of(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end != s.c_str()) return v;
    }
    return std::nullopt;
}

std::optional<std::uint64_t> id_of(const json& j) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        auto digit = std::find_if(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
        if (digit == s.end()) return std::nullopt;
        return std::strtoull(&*digit, nullptr, 10);
    }
    return std::nullopt;
}

const json* find_any(const json& obj, std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
        if (auto it = obj.find(k); it != obj.end() && !it->is_null()) return &*it;
    }
    return nullptr;
}

} // namespace

std::optional<IngestResult> ingest_response(std::string_view reply, std::string_view raw) {
    auto j = extract_json(reply);
    if (!j || !j->is_object()) return std::nullopt;
    const json* kw = find_any(*j, {"keywords"});
    const json* ctx = find_any(*j, {"context"});
    if (!kw || !ctx || !ctx->is_string()) return std::nullopt;
    auto list = string_list(*kw);
    if (!list) return std::nullopt;
    IngestResult r;
    r.keywords = canonical_keywords(*list);
    r.context = text::trim(ctx->get<std::string>());
    if (r.context.empty()) r.context = std::string(raw);
    return r;
}

std::optional<std::vector<CandidateJudgment>> judgments_response(std::string_view reply,
                                                                 std::span<const NoteId> candidate_ids) {
    auto j = extract_json(reply);
    if (!j) return std::nullopt;
    const json* items = nullptr;
    json wrapped;
    if (j->is_array()) {
        items = &*j;
    } else if (j->is_object()) {
        items = find_any(*j, {"judgments", "candidates", "results", "evaluations"});
        if (!items && j->contains("relation_type")) {
            wrapped = json::array({*j});
            items = &wrapped;
        }
    }
    if (!items || !items->is_array()) return std::nullopt;

    std::vector<std::optional<CandidateJudgment>> slots(candidate_ids.size());
    for (std::size_t i = 0; i < items->size(); ++i) {
        const json& it = (*items)[i];
        if (!it.is_object()) continue;
        std::optional<std::size_t> slot;
        if (const json* idj = find_any(it, {"candidate_id", "id", "candidate", "node_id"})) {
            if (auto id = id_of(*idj)) {
                auto pos = std::find(candidate_ids.begin(), candidate_ids.end(), NoteId{*id});
                if (pos != candidate_ids.end()) slot = static_cast<std::size_t>(pos - candidate_ids.begin());
            }
        } else if (i < candidate_ids.size()) {
            slot = i;
        }
        if (!slot || slots[*slot]) continue;
        const json* rel = find_any(it, {"relation_type", "relation"});
        const json* strength = find_any(it, {"connection_strength", "strength", "score"});
        if (!rel || !rel->is_string() || !strength) continue;
        auto type = relation_from_string(rel->get<std::string>());
        auto value = number_of(*strength);
        if (!type || !value) continue;
        CandidateJudgment cj;
        cj.candidate = candidate_ids[*slot];
        cj.relation_type = *type;
        cj.connection_strength = std::clamp(*value, 0.0, 1.0);
        if (const json* mc = find_any(it, {"merged_context", "updated_context", "new_context"}); mc && mc->is_string()) {
            std::string s = text::trim(mc->get<std::string>());
            if (!s.empty()) cj.merged_context = std::move(s);
        }
        slots[*slot] = std::move(cj);
    }
    std::vector<CandidateJudgment> out;
    for (auto& s : slots) {
        if (s) out.push_back(std::move(*s));
    }
    return out;
}

std::optional<QueryIntent> query_intent_response(std::string_view reply) {
    auto j = extract_json(reply);
    if (!j || !j->is_object()) return std::nullopt;
    const json* topic = find_any(*j, {"topic_desc", "topic"});
    const json* kw = find_any(*j, {"keywords"});
    if (!topic || !topic->is_string() || !kw) return std::nullopt;
    auto list = string_list(*kw);
    if (!list) return std::nullopt;
    QueryIntent qi;
    qi.topic_desc = text::truncate_words(topic->get<std::string>(), 8);
    qi.keywords = canonical_keywords(*list);
    return qi;
}

std::optional<SufficiencyVerdict> sufficiency_response(std::string_view reply) {
    auto j = extract_json(reply);
    if (!j || !j->is_object()) return std::nullopt;
    const json* suf = find_any(*j, {"sufficient"});
    if (!suf) return std::nullopt;
    SufficiencyVerdict v;
    if (suf->is_boolean()) {
        v.sufficient = suf->get<bool>();
    } else if (suf->is_string()) {
        const auto s = text::to_lower(text::trim(suf->get<std::string>()));
        if (s == "true" || s == "yes") v.sufficient = true;
        else if (s == "false" || s == "no") v.sufficient = false;
        else return std::nullopt;
    } else {
        return std::nullopt;
    }
    if (const json* mi = find_any(*j, {"missing_info"}); mi && mi->is_string()) v.missing_info = mi->get<std::string>();
    v.confidence = 0.0;
    if (const json* c = find_any(*j, {"confidence"})) {
        if (auto n = number_of(*c)) v.confidence = std::clamp(*n, 0.0, 1.0);
    }
    return v;
}

std::optional<std::string> subquery_response(std::string_view reply) {
    std::string s = text::trim(reply);
    for (const char* prefix : {"Sub-question:", "sub-question:", "Sub-query:", "Subquery:"}) {
        if (s.rfind(prefix, 0) == 0) s = text::trim(s.substr(std::string_view(prefix).size()));
    }
    // the first non-empty line is the question
    if (auto nl = s.find('\n'); nl != std::string::npos) s = text::trim(s.substr(0, nl));
    auto strip = [&s](char c) {
        while (!s.empty() && (s.front() == c)) s.erase(s.begin());
        while (!s.empty() && (s.back() == c)) s.pop_back();
    };
    strip('"');
    strip('\'');
    strip('`');
    s = text::trim(s);
    std::string bare = text::to_lower(s);
    while (!bare.empty() && (bare.back() == '.' || bare.back() == '!')) bare.pop_back();
    if (bare.empty() || bare == "none" || bare == "'none'" || bare == "null") return std::nullopt;
    return s;
}

} // namespace parse

QueryIntent fallback_query_intent(std::string_view query) {
    QueryIntent qi;
    qi.topic_desc = text::truncate_words(query, 8);
    auto tokens = text::content_tokens(query);
    if (tokens.size() > 5) tokens.resize(5);
    qi.keywords = std::move(tokens);
    return qi;
}

namespace {

void require_text(std::string_view s, const char* what) {
    if (text::trim(s).empty()) throw Error(ErrorCode::Precondition, std::string(what) + " must not be empty");
}

std::string json_list(const std::vector<std::string>& v) { return json(v).dump(); }

std::string strip_trailing_punct(std::string s) {
    while (!s.empty() && (s.back() == '.' || s.back() == ' ' || s.back() == '!' || s.back() == '?')) s.pop_back();
    return s;
}

// Case A template; falls back to "; " concatenation when the policy gives no
// merged context.
std::string fallback_merge(const NoteView& candidate, const NoteView& incoming) {
    return candidate.context + "; " + incoming.context;
}

} // namespace

// ------------------------------------------------------------------ LlmPolicy

LlmPolicy::LlmPolicy(std::shared_ptr<const ChatClient> client, Options options)
    : client_(std::move(client)), options_(std::move(options)) {
    if (!client_) throw Error(ErrorCode::InvalidConfig, "LlmPolicy needs a chat client");
}

IngestResult LlmPolicy::ingest_parse(std::string_view raw, std::string_view speaker) const {
    require_text(raw, "raw turn");
    const std::string content = speaker.empty() ? std::string(raw) : std::string(speaker) + ": " + std::string(raw);
    const ChatRequest req{"", prompts::render(prompts::kSemanticIngestion, {{"content", content}}), options_.temperature};
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (auto r = parse::ingest_response(client_->complete(req), raw)) return *r;
    }
    return IngestResult{{}, std::string(raw)};
}

std::vector<CandidateJudgment> LlmPolicy::judge_candidates(const NoteView& new_note,
                                                           std::span<const NoteView> candidates) const {
    if (candidates.empty()) throw Error(ErrorCode::Precondition, "judge_candidates needs at least one candidate");
    std::string candidates_str;
    std::vector<NoteId> ids;
    for (const auto& c : candidates) {
        if (!candidates_str.empty()) candidates_str += "\n";
        candidates_str += "[ID: " + std::to_string(c.id.value) + "]\nContent: \"" + c.content + "\"\nContext: \"" +
                          c.context + "\"\nKeywords: " + json_list(c.keywords) + "\n";
        ids.push_back(c.id);
    }
    const ChatRequest req{std::string(prompts::kGatedUpdateSchema),
                          prompts::render(prompts::kGatedUpdate, {{"content", new_note.content},
                                                                  {"context", new_note.context},
                                                                  {"keywords", json_list(new_note.keywords)},
                                                                  {"candidates_str", candidates_str}}),
                          options_.temperature};
    auto parsed = parse::judgments_response(client_->complete(req), ids);
    if (!parsed) return {};
    for (auto& j : *parsed) {
        const bool wants_merge =
            j.connection_strength >= options_.tau_merge && j.relation_type != RelationType::Conflicts;
        if (!wants_merge) {
            j.merged_context.reset();
        } else if (!j.merged_context) {
            auto c = std::find_if(candidates.begin(), candidates.end(), [&](const NoteView& v) { return v.id == j.candidate; });
            j.merged_context = fallback_merge(*c, new_note);
        }
    }
    return *parsed;
}

QueryIntent LlmPolicy::parse_query_intent(std::string_view query) const {
    require_text(query, "query");
    const ChatRequest req{"", prompts::render(prompts::kQueryIntent, {{"query", std::string(query)}}), options_.temperature};
    if (auto qi = parse::query_intent_response(client_->complete(req))) return *qi;
    return fallback_query_intent(query);
}

SufficiencyVerdict LlmPolicy::judge_sufficiency(std::string_view evidence, std::string_view query) const {
    const ChatRequest req{"",
                          prompts::render(prompts::kSufficiency,
                                          {{"question", std::string(query)}, {"context", std::string(evidence)}}),
                          options_.temperature};
    if (auto v = parse::sufficiency_response(client_->complete(req))) return *v;
    return SufficiencyVerdict{true, "", 0.0};
}

std::optional<std::string> LlmPolicy::generate_subquery(std::string_view query, std::string_view evidence,
                                                        std::string_view history,
                                                        std::optional<std::string_view> missing_info) const {
    if (!missing_info || text::trim(*missing_info).empty()) return std::nullopt;
    const ChatRequest req{"",
                          prompts::render(prompts::kSubQuery, {{"query_str", std::string(query)},
                                                               {"context_str", std::string(evidence)},
                                                               {"prev_reasoning", std::string(history)},
                                                               {"missing_info", std::string(*missing_info)}}),
                          options_.temperature};
    return parse::subquery_response(client_->complete(req));
}

std::string LlmPolicy::answer(std::string_view query, std::string_view evidence, std::span<const std::string>,
                              double temperature) const {
    const std::string_view tmpl =
        options_.answer_template.empty() ? prompts::kDefaultAnswer : std::string_view(options_.answer_template);
    const ChatRequest req{"",
                          prompts::render(tmpl, {{"question", std::string(query)}, {"context", std::string(evidence)}}),
                          temperature};
    return text::trim(client_->complete(req));
}

// ----------------------------------------------------------------- MockPolicy

MockPolicy::MockPolicy(std::shared_ptr<const EmbeddingProvider> embedder, double tau_merge)
    : embedder_(std::move(embedder)), tau_merge_(tau_merge) {
    if (!embedder_) throw Error(ErrorCode::InvalidConfig, "MockPolicy needs an embedder");
}

IngestResult MockPolicy::ingest_parse(std::string_view raw, std::string_view) const {
    require_text(raw, "raw turn");
    IngestResult r;
    r.keywords = text::content_tokens(raw);
    if (r.keywords.size() > 5) r.keywords.resize(5);
    r.context = text::trim(raw);
    return r;
}

double MockPolicy::redundancy(std::string_view a, std::string_view b) const {
    return std::max(0.0, cosine(embedder_->embed(a), embedder_->embed(b)));
}

double MockPolicy::complementarity(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const std::set<std::string> sa(a.begin(), a.end());
    const std::set<std::string> sb(b.begin(), b.end());
    std::size_t inter = 0;
    for (const auto& x : sa) inter += sb.count(x);
    const std::size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<CandidateJudgment> MockPolicy::judge_candidates(const NoteView& new_note,
                                                            std::span<const NoteView> candidates) const {
    if (candidates.empty()) throw Error(ErrorCode::Precondition, "judge_candidates needs at least one candidate");
    std::vector<CandidateJudgment> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        const double s_red = redundancy(new_note.context, c.context);
        const double s_comp = complementarity(new_note.keywords, c.keywords);
        CandidateJudgment j;
        j.candidate = c.id;
        if (s_red >= s_comp) {
            j.relation_type = RelationType::Supports;
            j.connection_strength = s_red;
        } else {
            j.relation_type = RelationType::RelatedTo;
            j.connection_strength = s_comp;
        }
        if (j.connection_strength >= tau_merge_) {
            const std::string lc = text::to_lower(c.context);
            const std::string ln = text::to_lower(new_note.context);
            j.merged_context = lc.find(ln) != std::string::npos
                                   ? c.context
                                   : strip_trailing_punct(c.context) + ". Specifically, " + new_note.context;
        }
        out.push_back(std::move(j));
    }
    return out;
}

QueryIntent MockPolicy::parse_query_intent(std::string_view query) const {
    require_text(query, "query");
    QueryIntent qi;
    auto tokens = text::content_tokens(query);
    qi.topic_desc = tokens.empty() ? text::truncate_words(query, 8) : text::truncate_words(text::join(tokens, " "), 8);
    if (tokens.size() > 5) tokens.resize(5);
    qi.keywords = std::move(tokens);
    return qi;
}

SufficiencyVerdict MockPolicy::judge_sufficiency(std::string_view evidence, std::string_view query) const {
    if (text::trim(evidence).empty()) return SufficiencyVerdict{false, text::join(text::content_tokens(query), " "), 0.0};
    const auto wanted = text::content_tokens(query);
    const auto have_list = text::content_tokens(evidence);
    const std::set<std::string> have(have_list.begin(), have_list.end());
    std::vector<std::string> missing;
    for (const auto& w : wanted) {
        if (!have.contains(w)) missing.push_back(w);
    }
    SufficiencyVerdict v;
    v.sufficient = missing.empty();
    v.missing_info = text::join(missing, " ");
    v.confidence = wanted.empty() ? 1.0
                                  : static_cast<double>(wanted.size() - missing.size()) / static_cast<double>(wanted.size());
    return v;
}

std::optional<std::string> MockPolicy::generate_subquery(std::string_view, std::string_view, std::string_view,
                                                         std::optional<std::string_view> missing_info) const {
    if (!missing_info) return std::nullopt;
    auto tokens = text::content_tokens(*missing_info);
    if (tokens.empty()) return std::nullopt;
    return text::join(tokens, " ");
}

std::string MockPolicy::answer(std::string_view, std::string_view, std::span<const std::string> ranked_contexts,
                               double) const {
    return ranked_contexts.empty() ? std::string() : ranked_contexts.front();
}

} // namespace memfly
