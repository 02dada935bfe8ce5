#include "memfly/config.hpp"

#include "memfly/error.hpp"

namespace memfly {

std::string to_string(IndexMode mode) {
    switch (mode) {
    case IndexMode::Exact: return "exact";
    case IndexMode::Approximate: return "approximate";
    case IndexMode::Auto: return "auto";
    }
    return "auto";
}

IndexMode index_mode_from_string(const std::string& s) {
    if (s == "exact") return IndexMode::Exact;
    if (s == "approximate") return IndexMode::Approximate;
    if (s == "auto") return IndexMode::Auto;
    throw Error(ErrorCode::InvalidConfig, "unknown index_mode '" + s + "'");
}

void EngineConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    if (!(0.0 < tau_link && tau_link <= tau_merge && tau_merge < 1.0)) {
        fail("require 0 < tau_link <= tau_merge < 1");
    }
    if (k_topic <= 0 || k_key <= 0 || k_final <= 0) fail("k_topic, k_key and k_final must be positive");
    if (i_max < 0) fail("i_max must be non-negative");
    if (expansion_hops < 1) fail("expansion_hops must be >= 1");
    if (!(rrf_k > 0.0)) fail("rrf_k must be positive");
    if (!(pathway_min_cosine >= -1.0 && pathway_min_cosine < 1.0)) fail("pathway_min_cosine must lie in [-1, 1)");
    if (delta_min < 1 || delta_min > delta_max) fail("require 1 <= delta_min <= delta_max");
    if (delta_max < 2 * delta_min - 1) fail("require delta_max >= 2*delta_min-1 so oversized topics can be split");
    if (evolve_every <= 0) fail("evolve_every must be positive");
    if (candidate_pool <= 0) fail("candidate_pool must be positive");
    if (embedding_dim <= 0) fail("embedding_dim must be positive");
    if (confidence_stop && (*confidence_stop < 0.0 || *confidence_stop > 1.0)) {
        fail("confidence_stop must lie in [0, 1]");
    }
}

void to_json(nlohmann::json& j, const EngineConfig& c) {
    j = nlohmann::json{
        {"tau_merge", c.tau_merge},
        {"tau_link", c.tau_link},
        {"candidate_pool", c.candidate_pool},
        {"evolve_every", c.evolve_every},
        {"k_topic", c.k_topic},
        {"k_key", c.k_key},
        {"k_final", c.k_final},
        {"i_max", c.i_max},
        {"expansion_hops", c.expansion_hops},
        {"rrf_k", c.rrf_k},
        {"pathway_min_cosine", c.pathway_min_cosine},
        {"confidence_stop", c.confidence_stop ? nlohmann::json(*c.confidence_stop) : nlohmann::json()},
        {"delta_min", c.delta_min},
        {"delta_max", c.delta_max},
        {"leiden_seed", c.leiden_seed},
        {"temperature_general", c.temperature_general},
        {"temperature_adversarial", c.temperature_adversarial},
        {"embedding_dim", c.embedding_dim},
        {"index_mode", to_string(c.index_mode)},
        {"approx_threshold", c.approx_threshold},
    };
}

// Missing fields keep their defaults so partial config files work.
void from_json(const nlohmann::json& j, EngineConfig& c) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "engine config must be a JSON object");
    auto get = [&](const char* key, auto& field) {
        if (auto it = j.find(key); it != j.end() && !it->is_null()) {
            try {
                it->get_to(field);
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorCode::InvalidConfig, std::string("field '") + key + "': " + e.what());
            }
        }
    };
    get("tau_merge", c.tau_merge);
    get("tau_link", c.tau_link);
    get("candidate_pool", c.candidate_pool);
    get("evolve_every", c.evolve_every);
    get("k_topic", c.k_topic);
    get("k_key", c.k_key);
    get("k_final", c.k_final);
    get("i_max", c.i_max);
    get("expansion_hops", c.expansion_hops);
    get("rrf_k", c.rrf_k);
    get("pathway_min_cosine", c.pathway_min_cosine);
    if (auto it = j.find("confidence_stop"); it != j.end()) {
        if (it->is_null()) c.confidence_stop.reset();
        else if (it->is_number()) c.confidence_stop = it->get<double>();
        else throw Error(ErrorCode::InvalidConfig, "field 'confidence_stop' must be a number or null");
    }
    get("delta_min", c.delta_min);
    get("delta_max", c.delta_max);
    get("leiden_seed", c.leiden_seed);
    get("temperature_general", c.temperature_general);
    get("temperature_adversarial", c.temperature_adversarial);
    get("embedding_dim", c.embedding_dim);
    if (auto it = j.find("index_mode"); it != j.end() && it->is_string()) {
        c.index_mode = index_mode_from_string(it->get<std::string>());
    }
    get("approx_threshold", c.approx_threshold);
}

} // namespace memfly
