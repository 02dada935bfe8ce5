#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "memfly/vector_math.hpp"

namespace memfly {

/// Text -> unit vector. Implementations are immutable after construction and
/// safe to call from several threads at once.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual std::size_t dim() const = 0;

    /// Throws EmptyText for blank input.
    virtual Vector embed(std::string_view text) const = 0;

    virtual std::vector<Vector> embed_batch(std::span<const std::string> texts) const {
        std::vector<Vector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(embed(t));
        return out;
    }
};

// Feature hashing over lowercased alphanumeric tokens: each token lands in
// one bucket with a +/-1 sign drawn from an independent hash, counts are
// summed and the result normalized. Same (dim, seed) gives the same vectors
// in every process.
class HashEmbedder final : public EmbeddingProvider {
public:
    explicit HashEmbedder(std::size_t dim, std::uint64_t seed = 0);

    std::size_t dim() const override { return dim_; }
    std::uint64_t seed() const noexcept { return seed_; }
    Vector embed(std::string_view text) const override;

    /// Bucket and sign a token maps to.
    std::pair<std::size_t, int> slot(std::string_view token) const;

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

struct RemoteEndpoint {
    std::string base_url;  // e.g. "http://localhost:8000/v1"
    std::string model;
    std::string api_key;   // empty: no Authorization header
    std::chrono::milliseconds timeout{30000};
    int max_retries = 2;
};

// OpenAI-style embeddings client: POST {base}/embeddings with
// {"input": [...], "model": ...}, reading data[i].embedding. Requests are
// batched at most 64 texts. Results are memoized per text.
class RemoteEmbedder final : public EmbeddingProvider {
public:
    static constexpr std::size_t kMaxBatch = 64;

    /// api_key falls back to MEMFLY_EMBED_API_KEY when left empty.
    RemoteEmbedder(RemoteEndpoint endpoint, std::size_t dim);

    std::size_t dim() const override { return dim_; }
    Vector embed(std::string_view text) const override;
    std::vector<Vector> embed_batch(std::span<const std::string> texts) const override;

private:
    std::vector<Vector> fetch(std::span<const std::string> texts) const;

    RemoteEndpoint endpoint_;
    std::size_t dim_;
    mutable std::mutex cache_mu_;
    mutable std::unordered_map<std::string, Vector> cache_;
};

} // namespace memfly
