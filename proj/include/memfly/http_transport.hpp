#pragma once

#include <chrono>
#include <string>

#include <json.hpp>

namespace memfly {

struct HttpTarget {
    std::string scheme_host_port;  // "http://host:port"
    std::string path_prefix;       // "/v1" or ""
};

/// Splits "http://host:port/prefix" into origin and path prefix.
HttpTarget parse_base_url(const std::string& base_url);

/// POSTs JSON and returns the parsed response body. Transport errors and
/// non-2xx statuses are retried up to max_retries extra times, then reported
/// as RemoteFailure.
nlohmann::json post_json(const std::string& base_url, const std::string& path, const nlohmann::json& body,
                         const std::string& bearer_token, std::chrono::milliseconds timeout, int max_retries);

} // namespace memfly
