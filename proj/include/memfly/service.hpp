#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <thread>

#include <json.hpp>

#include "memfly/construction.hpp"
#include "memfly/embedding.hpp"
#include "memfly/memory_graph.hpp"
#include "memfly/policy.hpp"
#include "memfly/retrieval.hpp"

namespace memfly {

inline constexpr int kServiceApiVersion = 1;

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 0;  // 0 picks a free port
    std::string bearer_token;
    std::filesystem::path snapshot_path;
    int worker_threads = 16;
};

/// Thrown by the request handlers; maps to an HTTP status.
struct ServiceError {
    int status;
    std::string code;
    std::string message;
};

// Owns one memory instance. Mutations go through a single writer thread in
// submission order; queries run concurrently under a shared lock.
class MemoryService {
public:
    MemoryService(MemoryGraph graph, std::shared_ptr<const Policy> policy,
                  std::shared_ptr<const EmbeddingProvider> embedder, ServiceOptions options);
    ~MemoryService();
    MemoryService(const MemoryService&) = delete;
    MemoryService& operator=(const MemoryService&) = delete;

    // Handlers behind the HTTP routes; each throws ServiceError on bad input.
    nlohmann::json ingest(const nlohmann::json& body);   // {speaker, text, turn_id?, date?}
    nlohmann::json query(const nlohmann::json& body);    // {question, iterative?, trace?}
    nlohmann::json stats() const;
    nlohmann::json evolve();
    nlohmann::json snapshot();                           // {path?}

    /// Binds and serves on a background thread. Returns the bound port.
    int start();
    /// Blocks serving on the calling thread until stop().
    void run();
    void stop();

    /// Consistent copy of the current graph.
    MemoryGraph graph_copy() const;

private:
    template <class F>
    auto submit(F&& f) -> decltype(f());
    void writer_loop();
    void bind();

    struct Http;

    MemoryGraph graph_;
    std::shared_ptr<const Policy> policy_;
    std::shared_ptr<const EmbeddingProvider> embedder_;
    ServiceOptions options_;

    mutable std::shared_mutex graph_mu_;
    std::atomic<bool> snapshotting_{false};

    std::mutex queue_mu_;
    std::condition_variable queue_cv_;
    std::deque<std::function<void()>> queue_;
    bool stopping_ = false;
    std::thread writer_;

    std::unique_ptr<Http> http_;
    std::thread server_thread_;
    int bound_port_ = 0;
};

} // namespace memfly
