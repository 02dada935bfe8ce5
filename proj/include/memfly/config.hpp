#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

namespace memfly {

enum class IndexMode { Exact, Approximate, Auto };

std::string to_string(IndexMode mode);
IndexMode index_mode_from_string(const std::string& s);

struct EngineConfig {
    // construction
    double tau_merge = 0.7;
    double tau_link = 0.5;
    int candidate_pool = 10;
    int evolve_every = 50;

    // retrieval
    int k_topic = 3;
    int k_key = 10;
    int k_final = 20;
    int i_max = 3;
    int expansion_hops = 1;
    double rrf_k = 60.0;
    // topic and keyword hits need a cosine strictly above this
    double pathway_min_cosine = 0.0;
    // Stop IER early once the sufficiency verdict reports at least this
    // confidence. Disabled when unset.
    std::optional<double> confidence_stop;

    // topic evolution
    int delta_min = 2;
    int delta_max = 50;
    std::uint64_t leiden_seed = 42;

    // generation
    double temperature_general = 0.7;
    double temperature_adversarial = 0.5;

    // storage
    int embedding_dim = 512;
    IndexMode index_mode = IndexMode::Auto;
    std::size_t approx_threshold = 20000;

    /// Throws InvalidConfig naming the first violated constraint.
    void validate() const;

    bool operator==(const EngineConfig&) const = default;
};

void to_json(nlohmann::json& j, const EngineConfig& c);
void from_json(const nlohmann::json& j, EngineConfig& c);

} // namespace memfly
