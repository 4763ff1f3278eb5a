#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "t2/remote_backend.hpp"

using namespace t2;

namespace {

/// Local chat-completions stand-in: the first `failures` calls get `fail_status`.
class FixtureServer {
public:
    FixtureServer(int failures, int fail_status, std::string content) : failures_(failures), status_(fail_status) {
        server_.Post("/v1/chat/completions", [this, content](const httplib::Request& req, httplib::Response& res) {
            last_auth_ = req.get_header_value("Authorization");
            last_body_ = req.body;
            if (calls_++ < failures_) {
                res.status = status_;
                res.set_content("{}", "application/json");
                return;
            }
            const Json reply = {{"choices", Json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FixtureServer() {
        server_.stop();
        thread_.join();
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
    int calls() const { return calls_; }
    std::string last_auth() const { return last_auth_; }
    std::string last_body() const { return last_body_; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    int failures_;
    int status_;
    std::atomic<int> calls_{0};
    std::string last_auth_, last_body_;
};

GeneratorRequest request() {
    GeneratorRequest r;
    r.role = "Worker";
    r.targets = {FeatureSpec::continuous("age", 0, 120)};
    r.n_b = 2;
    return r;
}

RemoteConfig config_for(const FixtureServer& s) {
    RemoteConfig c;
    c.endpoint = s.endpoint();
    c.model = "fixture-model";
    c.backoff_base = 0.01;
    c.timeout = 5;
    c.token_env = "T2_TEST_TOKEN";
    return c;
}

const char* kReply = "```json\n[{\"age\": 40}, {\"age\": 41}]\n```";

}  // namespace

TEST(Remote, ValidReplyIsParsed) {
    ::setenv("T2_TEST_TOKEN", "secret-token", 1);
    FixtureServer s(0, 429, kReply);
    RemoteBackend b(config_for(s), [](const std::string&) {});
    const auto block = remote_generate(b, request());
    ASSERT_EQ(block.rows.size(), 2u);
    EXPECT_EQ(std::get<double>(block.rows[1][0]), 41.0);
    EXPECT_EQ(s.last_auth(), "Bearer secret-token");
    const auto body = Json::parse(s.last_body());
    EXPECT_EQ(body["model"], "fixture-model");
    EXPECT_EQ(body["temperature"], 1.0);
    ASSERT_EQ(body["messages"].size(), 2u);
    EXPECT_EQ(body["messages"][0]["role"], "system");
    EXPECT_EQ(body["messages"][1]["role"], "user");
    EXPECT_EQ(s.last_body().find("secret-token"), std::string::npos);
}

TEST(Remote, RetriesRateLimitsThenSucceeds) {
    ::setenv("T2_TEST_TOKEN", "secret-token", 1);
    FixtureServer s(2, 429, kReply);
    std::vector<std::string> log;
    RemoteBackend b(config_for(s), [&](const std::string& m) { log.push_back(m); });
    EXPECT_EQ(remote_generate(b, request()).rows.size(), 2u);
    EXPECT_EQ(b.retries(), 2u);
    EXPECT_EQ(log.size(), 2u);
    EXPECT_EQ(s.calls(), 3);
}

TEST(Remote, GivesUpAfterMaxRetries) {
    ::setenv("T2_TEST_TOKEN", "secret-token", 1);
    FixtureServer s(100, 503, kReply);
    auto c = config_for(s);
    c.max_retries = 2;
    RemoteBackend b(c, [](const std::string&) {});
    EXPECT_THROW(remote_generate(b, request()), BackendError);
    EXPECT_EQ(s.calls(), 3);
}

TEST(Remote, ClientErrorsAreNotRetried) {
    ::setenv("T2_TEST_TOKEN", "secret-token", 1);
    FixtureServer s(100, 400, kReply);
    RemoteBackend b(config_for(s), [](const std::string&) {});
    EXPECT_THROW(b.complete("s", "p"), BackendError);
    EXPECT_EQ(s.calls(), 1);
}

TEST(Remote, UnparsableReplyIsADataError) {
    ::setenv("T2_TEST_TOKEN", "secret-token", 1);
    FixtureServer s(0, 429, "I cannot help with that.");
    RemoteBackend b(config_for(s), [](const std::string&) {});
    EXPECT_THROW(remote_generate(b, request()), DataError);
}

TEST(Remote, MissingTokenFailsBeforeAnyRequest) {
    ::unsetenv("T2_TEST_TOKEN");
    FixtureServer s(0, 429, kReply);
    EXPECT_THROW(RemoteBackend(config_for(s)), ConfigError);
    EXPECT_THROW(remote_generate(config_for(s), request()), ConfigError);
    EXPECT_EQ(s.calls(), 0);
}

TEST(Remote, ConfigValidation) {
    RemoteConfig c;
    c.max_retries = -1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = RemoteConfig{};
    c.endpoint = "ftp://x";
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_EQ(remote_detail::split_url("http://h:8/a/b").second, "/a/b");
    const auto back = remote_config_from_json(remote_config_to_json(RemoteConfig{}));
    EXPECT_EQ(back.model, "gpt-4o");
}
