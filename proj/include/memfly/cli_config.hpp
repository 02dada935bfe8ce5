#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "memfly/config.hpp"
#include "memfly/embedding.hpp"
#include "memfly/policy.hpp"

namespace memfly {

enum class Mode { Mock, Remote };

struct CliConfig {
    EngineConfig engine;
    Mode mode = Mode::Mock;

    std::string llm_base_url;
    std::string llm_model;
    std::string embed_base_url;
    std::string embed_model;
    int timeout_ms = 30000;
    int max_retries = 2;

    std::uint64_t hash_seed = 0;  // mock embedder
    std::string answer_template;  // empty: built-in

    std::string snapshot_path = "memfly-snapshot.json";
    std::string dataset_path;
    std::string bearer_token;     // service only; empty disables auth

    /// Engine constraints plus: remote mode needs both endpoints and models.
    void validate() const;
};

void to_json(nlohmann::json& j, const CliConfig& c);
void from_json(const nlohmann::json& j, CliConfig& c);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Process environment.
std::optional<std::string> process_env(const std::string& name);

/// Layers defaults < config file < MEMFLY_<FIELD> environment variables <
/// explicit overrides. Keys are CliConfig field names, engine fields
/// included unprefixed (tau_merge, k_final, ...). Values are parsed as JSON
/// when possible, else taken as strings. Unknown keys throw InvalidConfig.
CliConfig resolve_cli_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env,
                             const std::map<std::string, std::string>& overrides);

struct Runtime {
    std::shared_ptr<const EmbeddingProvider> embedder;
    std::shared_ptr<const Policy> policy;
};

Runtime make_runtime(const CliConfig& config);

} // namespace memfly
