#include "memfly/embedding.hpp"

#include <cstdlib>

#include "memfly/error.hpp"
#include "memfly/http_transport.hpp"
#include "memfly/text.hpp"

namespace memfly {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

HashEmbedder::HashEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim_ == 0) throw Error(ErrorCode::InvalidConfig, "embedding dimension must be positive");
}

std::pair<std::size_t, int> HashEmbedder::slot(std::string_view token) const {
    const std::uint64_t h = fnv1a(token);
    const std::size_t bucket = static_cast<std::size_t>(splitmix(h ^ seed_) % dim_);
    const int sign = (splitmix(h ^ ~seed_ ^ 0x5157a11c0ffeeULL) & 1) ? 1 : -1;
    return {bucket, sign};
}

Vector HashEmbedder::embed(std::string_view input) const {
    const std::string trimmed = text::trim(input);
    if (trimmed.empty()) throw Error(ErrorCode::EmptyText, "cannot embed blank text");
    auto tokens = text::tokenize(trimmed);
    if (tokens.empty()) tokens.push_back(trimmed);
    Vector v(dim_, 0.0);
    for (const auto& tok : tokens) {
        auto [bucket, sign] = slot(tok);
        v[bucket] += sign;
    }
    if (l2_norm(v) == 0.0) {
        // every token cancelled out; fall back to the whole string
        auto [bucket, sign] = slot(trimmed);
        v[bucket] = sign;
    }
    normalize_in_place(v);
    return v;
}

RemoteEmbedder::RemoteEmbedder(RemoteEndpoint endpoint, std::size_t dim) : endpoint_(std::move(endpoint)), dim_(dim) {
    if (endpoint_.base_url.empty()) throw Error(ErrorCode::InvalidConfig, "embedding base URL is empty");
    if (endpoint_.api_key.empty()) {
        if (const char* key = std::getenv("MEMFLY_EMBED_API_KEY")) endpoint_.api_key = key;
    }
}

Vector RemoteEmbedder::embed(std::string_view text) const {
    std::string t(text);
    return embed_batch(std::span<const std::string>(&t, 1)).front();
}

std::vector<Vector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) const {
    std::vector<Vector> out(texts.size());
    std::vector<std::string> missing;
    std::vector<std::size_t> missing_pos;
    {
        std::lock_guard lock(cache_mu_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (text::trim(texts[i]).empty()) throw Error(ErrorCode::EmptyText, "cannot embed blank text");
            if (auto it = cache_.find(texts[i]); it != cache_.end()) {
                out[i] = it->second;
            } else {
                missing.push_back(texts[i]);
                missing_pos.push_back(i);
            }
        }
    }
    for (std::size_t start = 0; start < missing.size(); start += kMaxBatch) {
        const std::size_t n = std::min(kMaxBatch, missing.size() - start);
        auto vecs = fetch(std::span<const std::string>(missing.data() + start, n));
        std::lock_guard lock(cache_mu_);
        for (std::size_t j = 0; j < n; ++j) {
            cache_[missing[start + j]] = vecs[j];
            out[missing_pos[start + j]] = std::move(vecs[j]);
        }
    }
    return out;
}

std::vector<Vector> RemoteEmbedder::fetch(std::span<const std::string> texts) const {
    nlohmann::json body{{"input", std::vector<std::string>(texts.begin(), texts.end())}, {"model", endpoint_.model}};
    const auto res = post_json(endpoint_.base_url, "/embeddings", body, endpoint_.api_key, endpoint_.timeout,
                               endpoint_.max_retries);
    if (!res.contains("data") || !res["data"].is_array() || res["data"].size() != texts.size()) {
        throw Error(ErrorCode::RemoteFailure, "embeddings response has no matching data array");
    }
    std::vector<Vector> out;
    for (const auto& item : res["data"]) {
        if (!item.contains("embedding") || !item["embedding"].is_array()) {
            throw Error(ErrorCode::RemoteFailure, "embeddings response item lacks an embedding");
        }
        Vector v;
        try {
            v = item["embedding"].get<Vector>();
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorCode::RemoteFailure, "embedding is not numeric");
        }
        if (v.size() != dim_) {
            throw Error(ErrorCode::RemoteFailure, "embedding has dimension " + std::to_string(v.size()) +
                                                      ", configured " + std::to_string(dim_));
        }
        try {
            normalize_in_place(v);
        } catch (const Error&) {
            throw Error(ErrorCode::RemoteFailure, "remote returned a zero embedding");
        }
        out.push_back(std::move(v));
    }
    return out;
}

} // namespace memfly
