#include "memfly/cli_config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>

#include "memfly/error.hpp"

namespace memfly {

void CliConfig::validate() const {
    engine.validate();
    if (timeout_ms <= 0) throw Error(ErrorCode::InvalidConfig, "timeout_ms must be positive");
    if (max_retries < 0) throw Error(ErrorCode::InvalidConfig, "max_retries must be non-negative");
    if (mode == Mode::Remote) {
        if (llm_base_url.empty() || llm_model.empty()) {
            throw Error(ErrorCode::InvalidConfig, "remote mode needs llm_base_url and llm_model");
        }
        if (embed_base_url.empty() || embed_model.empty()) {
            throw Error(ErrorCode::InvalidConfig, "remote mode needs embed_base_url and embed_model");
        }
    }
}

void to_json(nlohmann::json& j, const CliConfig& c) {
    j = nlohmann::json{
        {"engine", c.engine},
        {"mode", c.mode == Mode::Mock ? "mock" : "remote"},
        {"llm_base_url", c.llm_base_url},
        {"llm_model", c.llm_model},
        {"embed_base_url", c.embed_base_url},
        {"embed_model", c.embed_model},
        {"timeout_ms", c.timeout_ms},
        {"max_retries", c.max_retries},
        {"hash_seed", c.hash_seed},
        {"answer_template", c.answer_template},
        {"snapshot_path", c.snapshot_path},
        {"dataset_path", c.dataset_path},
        {"bearer_token", c.bearer_token},
    };
}

void from_json(const nlohmann::json& j, CliConfig& c) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
    static const char* const known[] = {"engine",      "mode",         "llm_base_url",    "llm_model",
                                        "embed_base_url", "embed_model", "timeout_ms",      "max_retries",
                                        "hash_seed",   "answer_template", "snapshot_path", "dataset_path",
                                        "bearer_token"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw Error(ErrorCode::InvalidConfig, "unknown config field '" + key + "'");
        }
    }
    auto get = [&](const char* key, auto& field) {
        if (auto it = j.find(key); it != j.end() && !it->is_null()) {
            try {
                it->get_to(field);
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorCode::InvalidConfig, std::string("field '") + key + "': " + e.what());
            }
        }
    };
    if (auto it = j.find("engine"); it != j.end()) from_json(*it, c.engine);
    if (auto it = j.find("mode"); it != j.end()) {
        const std::string m = it->is_string() ? it->get<std::string>() : it->dump();
        if (m == "mock") c.mode = Mode::Mock;
        else if (m == "remote") c.mode = Mode::Remote;
        else throw Error(ErrorCode::InvalidConfig, "mode must be 'mock' or 'remote', got '" + m + "'");
    }
    get("llm_base_url", c.llm_base_url);
    get("llm_model", c.llm_model);
    get("embed_base_url", c.embed_base_url);
    get("embed_model", c.embed_model);
    get("timeout_ms", c.timeout_ms);
    get("max_retries", c.max_retries);
    get("hash_seed", c.hash_seed);
    get("answer_template", c.answer_template);
    get("snapshot_path", c.snapshot_path);
    get("dataset_path", c.dataset_path);
    get("bearer_token", c.bearer_token);
}

std::optional<std::string> process_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
}

namespace {

nlohmann::json parse_value(const std::string& raw) {
    try {
        auto v = nlohmann::json::parse(raw);
        if (!v.is_object() && !v.is_array()) return v;
    } catch (const nlohmann::json::exception&) {
    }
    return raw;
}

// Sets key (top-level or engine field) in `doc`.
void apply(nlohmann::json& doc, const std::string& key, const std::string& raw, const nlohmann::json& defaults) {
    nlohmann::json value = parse_value(raw);
    if (defaults.contains(key) && key != "engine") {
        // string fields keep the literal text even when it looks like JSON
        if (defaults[key].is_string()) value = raw;
        doc[key] = value;
        return;
    }
    if (defaults["engine"].contains(key)) {
        if (defaults["engine"][key].is_string()) value = raw;
        doc["engine"][key] = value;
        return;
    }
    throw Error(ErrorCode::InvalidConfig, "unknown config field '" + key + "'");
}

std::string env_name(const std::string& key) {
    std::string out = "MEMFLY_";
    for (char ch : key) out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
    return out;
}

} // namespace

CliConfig resolve_cli_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env,
                             const std::map<std::string, std::string>& overrides) {
    const nlohmann::json defaults = CliConfig{};
    nlohmann::json doc = defaults;

    if (file) {
        std::ifstream in(*file);
        if (!in) throw Error(ErrorCode::Io, "cannot read config file " + file->string());
        nlohmann::json from_file;
        try {
            from_file = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::InvalidConfig, file->string() + ": " + e.what());
        }
        CliConfig probe;
        from_json(from_file, probe);  // rejects unknown fields early
        doc.merge_patch(from_file);
    }

    if (env) {
        for (const auto& [key, v] : defaults.items()) {
            if (key == "engine") continue;
            if (auto value = env(env_name(key))) apply(doc, key, *value, defaults);
        }
        for (const auto& [key, v] : defaults["engine"].items()) {
            if (auto value = env(env_name(key))) apply(doc, key, *value, defaults);
        }
    }

    for (const auto& [key, value] : overrides) apply(doc, key, value, defaults);

    CliConfig out;
    from_json(doc, out);
    out.validate();
    return out;
}

Runtime make_runtime(const CliConfig& config) {
    config.validate();
    Runtime rt;
    if (config.mode == Mode::Mock) {
        auto embedder = std::make_shared<HashEmbedder>(static_cast<std::size_t>(config.engine.embedding_dim),
                                                       config.hash_seed);
        rt.embedder = embedder;
        rt.policy = std::make_shared<MockPolicy>(embedder, config.engine.tau_merge);
        return rt;
    }
    RemoteEndpoint embed{config.embed_base_url, config.embed_model, {}, std::chrono::milliseconds(config.timeout_ms),
                         config.max_retries};
    rt.embedder = std::make_shared<RemoteEmbedder>(embed, static_cast<std::size_t>(config.engine.embedding_dim));
    RemoteEndpoint llm{config.llm_base_url, config.llm_model, {}, std::chrono::milliseconds(config.timeout_ms),
                       config.max_retries};
    LlmPolicy::Options opts;
    opts.tau_merge = config.engine.tau_merge;
    opts.temperature = config.engine.temperature_general;
    opts.answer_template = config.answer_template;
    rt.policy = std::make_shared<LlmPolicy>(std::make_shared<RemoteChatClient>(llm), opts);
    return rt;
}

} // namespace memfly
