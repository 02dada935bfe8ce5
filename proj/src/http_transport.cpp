#include "memfly/http_transport.hpp"

#include <thread>

#include <httplib.h>

#include "memfly/error.hpp"

namespace memfly {

HttpTarget parse_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::InvalidConfig, "base URL '" + base_url + "' has no scheme");
    }
    const auto path_start = base_url.find('/', scheme_end + 3);
    HttpTarget t;
    if (path_start == std::string::npos) {
        t.scheme_host_port = base_url;
    } else {
        t.scheme_host_port = base_url.substr(0, path_start);
        t.path_prefix = base_url.substr(path_start);
        while (!t.path_prefix.empty() && t.path_prefix.back() == '/') t.path_prefix.pop_back();
    }
    return t;
}

nlohmann::json post_json(const std::string& base_url, const std::string& path, const nlohmann::json& body,
                         const std::string& bearer_token, std::chrono::milliseconds timeout, int max_retries) {
    const HttpTarget target = parse_base_url(base_url);
    const std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
        httplib::Client client(target.scheme_host_port);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        httplib::Headers headers;
        if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);
        auto res = client.Post(target.path_prefix + path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        auto parsed = nlohmann::json::parse(res->body, nullptr, false);
        if (parsed.is_discarded()) {
            last_error = "response is not JSON";
            continue;
        }
        return parsed;
    }
    throw Error(ErrorCode::RemoteFailure, "POST " + base_url + path + " failed after " +
                                              std::to_string(max_retries + 1) + " attempts: " + last_error);
}

} // namespace memfly
