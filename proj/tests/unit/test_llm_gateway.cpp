#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <random>
#include <thread>

#include "metasynth/error.hpp"
#include "metasynth/llm_gateway.hpp"

using namespace metasynth;
using namespace metasynth::llm;
using namespace std::chrono_literals;

namespace {

ProviderError::Kind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ProviderError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected ProviderError";
  return ProviderError::Kind::bad_response;
}

/// Local chat server: fails the first `failures` requests with `fail_status`.
class StubServer {
 public:
  StubServer(int failures, int fail_status) : failures_(failures), fail_status_(fail_status) {
    server_.Post("/v1/chat", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = ++attempts_;
      last_auth_ = req.get_header_value("Authorization");
      if (n <= failures_) {
        res.status = fail_status_;
        res.set_content("{}", "application/json");
        return;
      }
      res.set_content(R"({"content":"pong","finish_reason":"stop","usage":{"input_tokens":3,"output_tokens":1}})",
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int attempts() const { return attempts_; }
  std::string last_auth() const { return last_auth_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int failures_;
  int fail_status_;
  std::atomic<int> attempts_{0};
  std::string last_auth_;
};

ProviderConfig http_config(const std::string& endpoint) {
  ProviderConfig c;
  c.kind = ProviderConfig::Kind::http_api;
  c.endpoint = endpoint;
  c.model = "stub";
  c.credentials_env_var = "METASYNTH_TEST_KEY";
  c.timeout_seconds = 5;
  return c;
}

/// Transport that counts embed batches and returns one-hot-ish vectors.
class CountingTransport final : public Transport {
 public:
  ChatResponse send(const ChatRequest&) override { return {"ok", FinishReason::stop, {}}; }
  std::vector<Embedding> send_embed(const std::vector<std::string>& texts) override {
    ++batches;
    max_batch = std::max(max_batch, texts.size());
    std::vector<Embedding> out;
    for (const auto& t : texts) out.push_back({static_cast<double>(t.size()), 1.0});
    return out;
  }
  int batches = 0;
  std::size_t max_batch = 0;
};

/// Transport that always throws a transient error.
class FlakyTransport final : public Transport {
 public:
  ChatResponse send(const ChatRequest&) override {
    ++attempts;
    throw TransientError("timeout");
  }
  std::vector<Embedding> send_embed(const std::vector<std::string>&) override { throw TransientError("timeout"); }
  int attempts = 0;
};

}  // namespace

TEST(ScriptedProvider, RepliesInCallOrderThenExhausts) {
  ScriptedProvider p(script_of({"A", "B"}));
  EXPECT_EQ(p.complete(user_request("x")).content, "A");
  EXPECT_EQ(p.complete(user_request("y")).content, "B");
  EXPECT_EQ(kind_of([&] { p.complete(user_request("z")); }), ProviderError::Kind::script_exhausted);
  EXPECT_EQ(p.captured().size(), 3u);
}

TEST(ScriptedProvider, ExpectedSubstringIsAsserted) {
  ScriptedProvider p({{"ok", std::string("needle")}});
  EXPECT_EQ(kind_of([&] { p.complete(user_request("haystack")); }), ProviderError::Kind::script_mismatch);
  ScriptedProvider q({{"ok", std::string("needle")}});
  EXPECT_EQ(q.complete(user_request("a needle here")).content, "ok");
}

TEST(ScriptedProvider, SubstitutionsApplyToResponsesAndExpectations) {
  ProviderConfig c;
  c.script = {{"doc for {{worker}}", std::string("worker {{worker}}")}};
  auto p = make_provider(c, {{"worker", "7"}});
  EXPECT_EQ(p->complete(user_request("hello worker 7")).content, "doc for 7");
}

TEST(ScriptedProvider, EmbeddingsFromMap) {
  ScriptedProvider p({}, {{"a", {1, 0}}, {"b", {0, 1}}});
  EXPECT_EQ(p.embed({"a", "b"}), (std::vector<Embedding>{{1, 0}, {0, 1}}));
  EXPECT_THROW(p.embed({}), PreconditionError);
}

TEST(ChatRequest, RolesMustAlternateStartingWithUser) {
  ChatRequest r;
  EXPECT_THROW(validate(r), PreconditionError);
  r.messages = {{Role::assistant, "x"}};
  EXPECT_THROW(validate(r), PreconditionError);
  r.messages = {{Role::user, "x"}, {Role::user, "y"}};
  EXPECT_THROW(validate(r), PreconditionError);
  r.messages = {{Role::user, "x"}, {Role::assistant, "y"}, {Role::user, "z"}};
  EXPECT_NO_THROW(validate(r));
}

TEST(ProviderConfig, JsonRoundTripAndChecks) {
  ProviderConfig c;
  c.script = {{"a", std::nullopt}, {"b", std::string("x")}};
  c.embedding_script = {{"t", {1.0, 2.0}}};
  const auto back = nlohmann::json(c).get<ProviderConfig>();
  EXPECT_EQ(back.script.size(), 2u);
  EXPECT_EQ(*back.script[1].expect_substring, "x");
  EXPECT_EQ(back.embedding_script.at("t"), (Embedding{1.0, 2.0}));
  EXPECT_FALSE(check(ProviderConfig{}).empty());
  EXPECT_FALSE(check(http_config("")).empty());
}

TEST(Gateway, RetriesThrottlingWithBackoffAgainstLocalServer) {
  StubServer server(2, 429);
  ::setenv("METASYNTH_TEST_KEY", "secret", 1);
  auto clock = std::make_shared<ManualClock>();
  auto provider = make_provider(http_config(server.endpoint()), {}, clock);
  const auto reply = provider->complete(user_request("ping"));
  EXPECT_EQ(reply.content, "pong");
  EXPECT_EQ(reply.usage.input_tokens, 3);
  EXPECT_EQ(server.attempts(), 3);
  EXPECT_EQ(server.last_auth(), "Bearer secret");
  const auto sleeps = std::dynamic_pointer_cast<Gateway>(provider)->backoff_sleeps();
  ASSERT_EQ(sleeps.size(), 2u);
  // Base 1 s then 2 s, each within +-20% jitter.
  EXPECT_GE(sleeps[0], 800ms);
  EXPECT_LE(sleeps[0], 1200ms);
  EXPECT_GE(sleeps[1], 1600ms);
  EXPECT_LE(sleeps[1], 2400ms);
}

TEST(Gateway, AuthenticationFailureIsNotRetried) {
  StubServer server(100, 401);
  ::setenv("METASYNTH_TEST_KEY", "secret", 1);
  auto provider = make_provider(http_config(server.endpoint()), {}, std::make_shared<ManualClock>());
  EXPECT_EQ(kind_of([&] { provider->complete(user_request("ping")); }), ProviderError::Kind::authentication);
  EXPECT_EQ(server.attempts(), 1);
}

TEST(Gateway, PreflightFailsWithoutCredentials) {
  auto c = http_config("http://127.0.0.1:1/v1");
  c.credentials_env_var = "METASYNTH_TEST_KEY_THAT_IS_UNSET";
  ::unsetenv("METASYNTH_TEST_KEY_THAT_IS_UNSET");
  EXPECT_EQ(kind_of([&] { preflight(c); }), ProviderError::Kind::authentication);
  EXPECT_EQ(kind_of([&] { make_provider(c); }), ProviderError::Kind::authentication);
}

TEST(Gateway, RetriesExhaustedAfterMaxRetries) {
  auto transport = std::make_shared<FlakyTransport>();
  auto clock = std::make_shared<ManualClock>();
  RetryPolicy policy;
  policy.max_retries = 5;
  Gateway g(transport, policy, 0, 16, clock);
  EXPECT_EQ(kind_of([&] { g.complete(user_request("x")); }), ProviderError::Kind::retries_exhausted);
  EXPECT_EQ(transport->attempts, 6);
  const auto sleeps = g.backoff_sleeps();
  ASSERT_EQ(sleeps.size(), 5u);
  for (std::size_t i = 1; i < sleeps.size(); ++i) EXPECT_GT(sleeps[i], sleeps[i - 1]);
}

TEST(Gateway, EmbeddingsAreBatchedTransparently) {
  auto transport = std::make_shared<CountingTransport>();
  Gateway g(transport, {}, 0, 512, std::make_shared<ManualClock>());
  std::vector<std::string> texts;
  for (int i = 0; i < 2500; ++i) texts.push_back("text " + std::to_string(i));
  const auto out = g.embed(texts);
  EXPECT_EQ(out.size(), 2500u);
  EXPECT_GE(transport->batches, 5);
  EXPECT_LE(transport->max_batch, 512u);
  EXPECT_EQ(out[1234][0], static_cast<double>(texts[1234].size()));
  EXPECT_THROW(g.embed({}), PreconditionError);
}

TEST(RateLimiter, NoSixtySecondWindowExceedsTheCap) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto clock = std::make_shared<ManualClock>();
    const int cap = 1 + static_cast<int>(rng() % 10);
    RateLimiter limiter(cap, clock);
    for (int i = 0; i < 60; ++i) {
      clock->advance(std::chrono::milliseconds(rng() % 5000));
      limiter.acquire();
    }
    const auto log = limiter.dispatch_log();
    ASSERT_EQ(log.size(), 60u);
    for (std::size_t i = 0; i < log.size(); ++i) {
      int in_window = 0;
      for (std::size_t j = i; j < log.size() && log[j] < log[i] + 60s; ++j) ++in_window;
      EXPECT_LE(in_window, cap);
    }
  }
}

TEST(RateLimiter, SharedAcrossThreads) {
  auto clock = std::make_shared<ManualClock>();
  RateLimiter limiter(5, clock);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 5; ++i) limiter.acquire();
    });
  }
  for (auto& t : threads) t.join();
  const auto log = limiter.dispatch_log();
  ASSERT_EQ(log.size(), 20u);
  auto sorted = log;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i + 5 < sorted.size(); ++i) EXPECT_GE(sorted[i + 5] - sorted[i], 60s);
}

TEST(MeteredProvider, CountsTokensAndStopsAtBudget) {
  auto inner = std::make_shared<ScriptedProvider>(script_of({"one two", "three", "four"}));
  auto budget = std::make_shared<MeteredProvider::Budget>();
  budget->limit = 4;
  MeteredProvider m(inner, budget);
  m.complete(user_request("a b"));  // 2 in + 2 out
  EXPECT_EQ(m.usage().input_tokens, 2);
  EXPECT_EQ(m.usage().output_tokens, 2);
  EXPECT_EQ(kind_of([&] { m.complete(user_request("c")); }), ProviderError::Kind::budget_exhausted);
}
