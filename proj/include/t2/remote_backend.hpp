#pragma once

// Chat-completions client. Include only from targets linked against t2_remote.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>

// <resolv.h>, reached through httplib, defines `_res` as a macro; Eigen uses
// that name for parameters, so Eigen has to be parsed first.
#include <Eigen/Dense>
#include <httplib.h>

#include "t2/backend.hpp"
#include "t2/error.hpp"

namespace t2 {

struct RemoteConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4o";
    double temperature = 1.0;
    int max_retries = 3;
    double backoff_base = 1.0;  // seconds; wait is base·2^attempt
    std::string token_env = "T2_API_KEY";
    double timeout = 120.0;  // seconds per request

    void validate() const {
        if (max_retries < 0) throw ConfigError("remote: max_retries must be >= 0");
        if (!(temperature >= 0.0)) throw ConfigError("remote: temperature must be >= 0");
        if (!(backoff_base >= 0.0)) throw ConfigError("remote: backoff_base must be >= 0");
        if (token_env.empty()) throw ConfigError("remote: token_env must name an environment variable");
        if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0)
            throw ConfigError("remote: endpoint must be an http(s) URL");
    }
};

inline Json remote_config_to_json(const RemoteConfig& c) {
    return {{"endpoint", c.endpoint},         {"model", c.model},         {"temperature", c.temperature},
            {"max_retries", c.max_retries},   {"backoff_base", c.backoff_base}, {"token_env", c.token_env},
            {"timeout", c.timeout}};
}

inline RemoteConfig remote_config_from_json(const Json& j) {
    try {
        RemoteConfig c;
        c.endpoint = j.value("endpoint", c.endpoint);
        c.model = j.value("model", c.model);
        c.temperature = j.value("temperature", c.temperature);
        c.max_retries = j.value("max_retries", c.max_retries);
        c.backoff_base = j.value("backoff_base", c.backoff_base);
        c.token_env = j.value("token_env", c.token_env);
        c.timeout = j.value("timeout", c.timeout);
        c.validate();
        return c;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed remote config: ") + e.what());
    }
}

namespace remote_detail {

/// Splits "scheme://host[:port]/path" into ("scheme://host[:port]", "/path").
inline std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace remote_detail

/// Worker prompts go out as a system + user message pair; the reply content
/// is returned verbatim for parse_reply. Transport errors, 429 and 5xx are
/// retried with exponential backoff, at most max_retries times.
class RemoteBackend : public GeneratorBackend {
public:
    using Log = std::function<void(const std::string&)>;

    explicit RemoteBackend(RemoteConfig config, Log log = nullptr) : config_(std::move(config)), log_(std::move(log)) {
        config_.validate();
        const char* token = std::getenv(config_.token_env.c_str());
        if (!token || !*token) throw ConfigError("remote: environment variable " + config_.token_env + " is not set");
        token_ = token;
        if (!log_) log_ = [](const std::string& m) { std::cerr << "[remote] " << m << "\n"; };
    }

    std::string name() const override { return "remote:" + config_.model; }

    std::string complete(const std::string& system, const std::string& prompt) override {
        Json body = {{"model", config_.model},
                     {"messages", Json::array({{{"role", "system"}, {"content", system}}, {{"role", "user"}, {"content", prompt}}})},
                     {"temperature", config_.temperature}};
        const auto [base, path] = remote_detail::split_url(config_.endpoint);
        for (int attempt = 0;; ++attempt) {
            std::string why;
            {
                httplib::Client client(base);
                const auto secs = std::chrono::duration<double>(config_.timeout);
                client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
                client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
                client.set_bearer_token_auth(token_);
                auto res = client.Post(path, body.dump(), "application/json");
                if (!res) {
                    why = "transport error: " + httplib::to_string(res.error());
                } else if (res->status == 200) {
                    return extract_content(res->body);
                } else if (res->status == 429 || res->status >= 500) {
                    why = "HTTP " + std::to_string(res->status);
                } else {
                    throw BackendError("remote: HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
                }
            }
            if (attempt >= config_.max_retries)
                throw BackendError("remote: giving up after " + std::to_string(attempt) + " retries (" + why + ")");
            const double wait = config_.backoff_base * std::pow(2.0, attempt);
            log("retry " + std::to_string(attempt + 1) + "/" + std::to_string(config_.max_retries) + " after " + why);
            std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        }
    }

    std::string generate(const GeneratorRequest& request) override {
        return complete("You generate realistic tabular data rows and reply only with JSON.", render_prompt(request));
    }

    std::size_t retries() const {
        std::lock_guard lock(mutex_);
        return retries_;
    }

private:
    static std::string extract_content(const std::string& body) {
        Json j = Json::parse(body, nullptr, false);
        if (j.is_discarded()) throw BackendError("remote: response body is not JSON");
        try {
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const Json::exception&) {
            throw BackendError("remote: response lacks choices[0].message.content");
        }
    }

    void log(const std::string& m) {
        {
            std::lock_guard lock(mutex_);
            ++retries_;
        }
        log_(m);
    }

    RemoteConfig config_;
    Log log_;
    std::string token_;
    mutable std::mutex mutex_;
    std::size_t retries_ = 0;
};

/// One worker call through `backend`, parsed into a block.
inline ColumnBlock remote_generate(RemoteBackend& backend, const GeneratorRequest& request) {
    request.validate();
    return parse_reply(backend.generate(request), request.targets, request.n_b, request.component);
}

inline ColumnBlock remote_generate(const RemoteConfig& config, const GeneratorRequest& request) {
    RemoteBackend backend(config);
    return remote_generate(backend, request);
}

}  // namespace t2
