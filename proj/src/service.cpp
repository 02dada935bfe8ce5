#include "memfly/service.hpp"

#include <httplib.h>

#include "memfly/error.hpp"
#include "memfly/snapshot.hpp"
#include "memfly/text.hpp"
#include "memfly/topics.hpp"

namespace memfly {

struct MemoryService::Http {
    httplib::Server server;
};

namespace {

ServiceError bad_request(std::string message) { return ServiceError{400, "BadRequest", std::move(message)}; }

const nlohmann::json& require_object(const nlohmann::json& body) {
    if (!body.is_object()) throw bad_request("body must be a JSON object");
    return body;
}

std::string string_field(const nlohmann::json& body, const char* key, bool required) {
    auto it = body.find(key);
    if (it == body.end() || it->is_null()) {
        if (required) throw bad_request(std::string("missing field '") + key + "'");
        return {};
    }
    if (!it->is_string()) throw bad_request(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

bool bool_field(const nlohmann::json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end() || it->is_null()) return false;
    if (!it->is_boolean()) throw bad_request(std::string("field '") + key + "' must be a boolean");
    return it->get<bool>();
}

nlohmann::json judgment_json(const CandidateJudgment& j) {
    return {{"candidate", j.candidate.value},
            {"relation_type", std::string(to_string(j.relation_type))},
            {"connection_strength", j.connection_strength},
            {"merged_context", j.merged_context ? nlohmann::json(*j.merged_context) : nlohmann::json(nullptr)}};
}

nlohmann::json diagnostics_json(const IbDiagnostics& d) {
    return {{"inputs_seen", d.inputs_seen},
            {"note_count", d.note_count},
            {"merge_total", d.merge_total},
            {"link_total", d.link_total},
            {"append_total", d.append_total},
            {"compression_ratio", d.compression_ratio},
            {"mean_keywords_per_note", d.mean_keywords_per_note},
            {"related_edge_count", d.related_edge_count},
            {"keyword_count", d.keyword_count},
            {"topic_count", d.topic_count}};
}

int status_for(ErrorCode c) {
    switch (c) {
    case ErrorCode::Precondition:
    case ErrorCode::EmptyText:
    case ErrorCode::EmptySurface: return 400;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::RemoteFailure: return 502;
    default: return 500;
    }
}

} // namespace

MemoryService::MemoryService(MemoryGraph graph, std::shared_ptr<const Policy> policy,
                             std::shared_ptr<const EmbeddingProvider> embedder, ServiceOptions options)
    : graph_(std::move(graph)),
      policy_(std::move(policy)),
      embedder_(std::move(embedder)),
      options_(std::move(options)),
      http_(std::make_unique<Http>()) {
    if (!policy_ || !embedder_) throw Error(ErrorCode::InvalidConfig, "service needs a policy and an embedder");
    writer_ = std::thread([this] { writer_loop(); });
}

MemoryService::~MemoryService() { stop(); }

void MemoryService::writer_loop() {
    while (true) {
        std::function<void()> task;
        {
            std::unique_lock lock(queue_mu_);
            queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) return;
            task = std::move(queue_.front());
            queue_.pop_front();
        }
        task();
    }
}

template <class F>
auto MemoryService::submit(F&& f) -> decltype(f()) {
    using R = decltype(f());
    auto task = std::make_shared<std::packaged_task<R()>>(std::forward<F>(f));
    auto result = task->get_future();
    {
        std::lock_guard lock(queue_mu_);
        if (stopping_) throw ServiceError{503, "Unavailable", "service is shutting down"};
        queue_.push_back([task] { (*task)(); });
    }
    queue_cv_.notify_one();
    return result.get();
}

nlohmann::json MemoryService::ingest(const nlohmann::json& body) {
    require_object(body);
    const std::string speaker = string_field(body, "speaker", true);
    const std::string raw = string_field(body, "text", true);
    if (text::trim(raw).empty()) throw bad_request("field 'text' is blank");
    IngestOptions opts;
    opts.turn_id = string_field(body, "turn_id", false);
    opts.date = string_field(body, "date", false);
    if (snapshotting_) throw ServiceError{503, "Unavailable", "snapshot in progress"};

    const IngestReport report = submit([&] {
        std::unique_lock lock(graph_mu_);
        return memfly::ingest(graph_, raw, speaker, *policy_, *embedder_, opts);
    });
    nlohmann::json judgments = nlohmann::json::array();
    for (const auto& j : report.judgments) judgments.push_back(judgment_json(j));
    nlohmann::json kws = nlohmann::json::array();
    for (KeywordId k : report.new_keywords) kws.push_back(k.value);
    return {{"note_id", report.note_id.value},
            {"operation", std::string(to_string(report.operation))},
            {"partner", report.partner ? nlohmann::json(report.partner->value) : nlohmann::json(nullptr)},
            {"judgments", judgments},
            {"new_keywords", kws}};
}

nlohmann::json MemoryService::query(const nlohmann::json& body) {
    require_object(body);
    const std::string question = string_field(body, "question", true);
    if (text::trim(question).empty()) throw bad_request("field 'question' is blank");
    const bool iterative = bool_field(body, "iterative");
    const bool want_trace = bool_field(body, "trace");

    std::shared_lock lock(graph_mu_);
    RetrievalResult rr;
    if (iterative) {
        rr = retrieve_iterative(graph_, question, *policy_, *embedder_);
    } else {
        IterationTrace t;
        rr.pool = retrieve_once(graph_, question, *policy_, *embedder_, {}, &t);
        t.added = rr.pool.ids();
        rr.trace.iterations.push_back(std::move(t));
    }
    const auto contexts = pool_contexts(graph_, rr.pool);
    const std::string answer =
        contexts.empty() ? std::string()
                         : policy_->answer(question, render_pool(graph_, rr.pool), contexts,
                                           graph_.config().temperature_general);
    nlohmann::json pool = nlohmann::json::array();
    for (const auto& [id, score] : rr.pool.ranked) {
        const Note& n = graph_.note(id);
        nlohmann::json turns = nlohmann::json::array();
        for (const auto& seg : n.raw) turns.push_back(seg.turn_id);
        pool.push_back({{"note_id", id.value}, {"score", score}, {"context", n.context}, {"turn_ids", turns}});
    }
    nlohmann::json out{{"question", question},
                       {"answer", answer},
                       {"pool", pool},
                       {"iterations", rr.pool.iteration}};
    if (want_trace) out["trace"] = rr.trace.to_json();
    return out;
}

nlohmann::json MemoryService::stats() const {
    std::shared_lock lock(graph_mu_);
    auto j = diagnostics_json(ib_diagnostics(graph_));
    j["clock"] = graph_.clock();
    j["api_version"] = kServiceApiVersion;
    return j;
}

nlohmann::json MemoryService::evolve() {
    if (snapshotting_) throw ServiceError{503, "Unavailable", "snapshot in progress"};
    const std::size_t topics = submit([&] {
        std::unique_lock lock(graph_mu_);
        return evolve_topics(graph_);
    });
    return {{"topic_count", topics}};
}

nlohmann::json MemoryService::snapshot() {
    std::filesystem::path path = options_.snapshot_path;
    if (path.empty()) throw bad_request("no snapshot path configured");
    bool expected = false;
    if (!snapshotting_.compare_exchange_strong(expected, true)) {
        throw ServiceError{503, "Unavailable", "snapshot in progress"};
    }
    struct Reset {
        std::atomic<bool>& flag;
        ~Reset() { flag = false; }
    } reset{snapshotting_};
    std::shared_lock lock(graph_mu_);
    snapshot_save(graph_, path);
    return {{"path", path.string()}, {"note_count", graph_.notes().size()}, {"clock", graph_.clock()}};
}

MemoryGraph MemoryService::graph_copy() const {
    std::shared_lock lock(graph_mu_);
    return graph_;
}

void MemoryService::bind() {
    auto& srv = http_->server;
    const int threads = std::max(1, options_.worker_threads);
    srv.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };

    const std::string token = options_.bearer_token;
    srv.set_pre_routing_handler([token](const httplib::Request& req, httplib::Response& res) {
        if (token.empty()) return httplib::Server::HandlerResponse::Unhandled;
        if (req.get_header_value("Authorization") == "Bearer " + token) {
            return httplib::Server::HandlerResponse::Unhandled;
        }
        res.status = 401;
        res.set_content(nlohmann::json{{"error", "Unauthorized"}, {"message", "missing or wrong bearer token"}}.dump(),
                        "application/json");
        return httplib::Server::HandlerResponse::Handled;
    });

    auto wrap = [](auto handler, bool needs_body) {
        return [handler, needs_body](const httplib::Request& req, httplib::Response& res) {
            try {
                nlohmann::json body = nlohmann::json::object();
                if (needs_body || !req.body.empty()) {
                    try {
                        body = nlohmann::json::parse(req.body.empty() ? std::string("{}") : req.body);
                    } catch (const nlohmann::json::exception& e) {
                        throw bad_request(std::string("malformed JSON: ") + e.what());
                    }
                }
                res.set_content(handler(body).dump(), "application/json");
            } catch (const ServiceError& e) {
                res.status = e.status;
                res.set_content(nlohmann::json{{"error", e.code}, {"message", e.message}}.dump(), "application/json");
            } catch (const Error& e) {
                res.status = status_for(e.code());
                res.set_content(nlohmann::json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}}.dump(),
                                "application/json");
            } catch (const std::exception& e) {
                res.status = 500;
                res.set_content(nlohmann::json{{"error", "Internal"}, {"message", e.what()}}.dump(), "application/json");
            }
        };
    };

    srv.Post("/ingest", wrap([this](const nlohmann::json& b) { return ingest(b); }, true));
    srv.Post("/query", wrap([this](const nlohmann::json& b) { return query(b); }, true));
    srv.Get("/stats", wrap([this](const nlohmann::json&) { return stats(); }, false));
    srv.Post("/evolve", wrap([this](const nlohmann::json&) { return evolve(); }, false));
    srv.Post("/snapshot", wrap([this](const nlohmann::json&) { return snapshot(); }, false));

    if (options_.port == 0) {
        bound_port_ = srv.bind_to_any_port(options_.host);
    } else {
        bound_port_ = srv.bind_to_port(options_.host, options_.port) ? options_.port : -1;
    }
    if (bound_port_ <= 0) {
        throw Error(ErrorCode::Io, "cannot bind " + options_.host + ":" + std::to_string(options_.port));
    }
}

int MemoryService::start() {
    bind();
    server_thread_ = std::thread([this] { http_->server.listen_after_bind(); });
    http_->server.wait_until_ready();
    return bound_port_;
}

void MemoryService::run() {
    bind();
    http_->server.listen_after_bind();
}

void MemoryService::stop() {
    if (http_) http_->server.stop();
    if (server_thread_.joinable()) server_thread_.join();
    {
        std::lock_guard lock(queue_mu_);
        stopping_ = true;
    }
    queue_cv_.notify_all();
    if (writer_.joinable()) writer_.join();
}

} // namespace memfly
