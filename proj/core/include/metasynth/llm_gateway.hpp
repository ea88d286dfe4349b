#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "metasynth/error.hpp"

namespace metasynth::llm {

enum class Role { user, assistant };

struct Message {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

struct ChatRequest {
  std::optional<std::string> system;
  std::vector<Message> messages;
  double temperature = 1.0;
  int max_tokens = 4096;
  std::vector<std::string> stop_sequences;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

/// Generation agents sample; judges are pinned to zero.
inline constexpr double kGenerationTemperature = 1.0;
inline constexpr double kJudgeTemperature = 0.0;

/// Throws PreconditionError unless messages are nonempty and alternate
/// user/assistant starting with user.
void validate(const ChatRequest& request);

/// Convenience: one user message.
ChatRequest user_request(std::string content, double temperature = kGenerationTemperature,
                         std::optional<std::string> system = std::nullopt);

/// All text the model would see (system + messages), newline-joined.
std::string flatten(const ChatRequest& request);

enum class FinishReason { stop, length, error };

struct Usage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

struct ChatResponse {
  std::string content;
  FinishReason finish_reason = FinishReason::stop;
  Usage usage;
};

using Embedding = std::vector<double>;

struct ScriptEntry {
  std::string response;
  /// When set, the request must contain this substring.
  std::optional<std::string> expect_substring;
};

struct ProviderConfig {
  enum class Kind { http_api, scripted };

  Kind kind = Kind::scripted;
  std::string endpoint;
  std::string model;
  std::string credentials_env_var = "METASYNTH_API_KEY";
  int max_retries = 5;
  /// Dispatch cap per sliding 60 s window; 0 disables limiting.
  int requests_per_minute = 0;
  std::size_t embed_batch_size = 512;
  double timeout_seconds = 120.0;
  std::vector<ScriptEntry> script;
  std::map<std::string, Embedding> embedding_script;
};

/// Lists every problem with the config (empty when valid).
std::vector<std::string> check(const ProviderConfig& config);

void to_json(nlohmann::json& j, const ProviderConfig& c);
void from_json(const nlohmann::json& j, ProviderConfig& c);

/// Time source; swapped for a manual clock in tests.
class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  using duration = std::chrono::steady_clock::duration;

  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_for(duration d) = 0;
};

class SteadyClock final : public Clock {
 public:
  time_point now() override { return std::chrono::steady_clock::now(); }
  void sleep_for(duration d) override;
};

/// Virtual time that only advances when someone sleeps. Records sleeps.
class ManualClock final : public Clock {
 public:
  time_point now() override;
  void sleep_for(duration d) override;
  void advance(duration d);
  std::vector<duration> sleeps() const;

 private:
  mutable std::mutex mu_;
  time_point now_{};
  std::vector<duration> sleeps_;
};

std::shared_ptr<Clock> steady_clock();

/// Sliding-window limiter: at most `per_minute` acquisitions in any 60 s
/// window. Shared by every thread that uses one provider.
class RateLimiter {
 public:
  RateLimiter(int per_minute, std::shared_ptr<Clock> clock);

  void acquire();
  std::vector<Clock::time_point> dispatch_log() const;

 private:
  int per_minute_;
  std::shared_ptr<Clock> clock_;
  mutable std::mutex mu_;
  std::deque<Clock::time_point> window_;
  std::vector<Clock::time_point> log_;
};

/// Thrown by transports for failures worth retrying (timeouts, 429, 5xx).
class TransientError : public Error {
 public:
  using Error::Error;
};

/// A single, unretried attempt against a backend.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual ChatResponse send(const ChatRequest& request) = 0;
  virtual std::vector<Embedding> send_embed(const std::vector<std::string>& texts) = 0;
};

/// Speaks the project's minimal JSON chat/embedding protocol over HTTP(S).
std::shared_ptr<Transport> make_http_transport(const ProviderConfig& config);

struct RetryPolicy {
  int max_retries = 5;
  double base_seconds = 1.0;
  double factor = 2.0;
  double jitter = 0.2;
  std::uint64_t jitter_seed = 0x5eed;
};

/// Model access used by every pipeline stage.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  /// One vector per text, all of one dimension. Requires nonempty input.
  virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) = 0;
};

/// Retry, backoff and rate limiting around a transport.
class Gateway final : public Provider {
 public:
  Gateway(std::shared_ptr<Transport> transport, RetryPolicy retry, int requests_per_minute,
          std::size_t embed_batch_size, std::shared_ptr<Clock> clock = steady_clock());

  ChatResponse complete(const ChatRequest& request) override;
  std::vector<Embedding> embed(const std::vector<std::string>& texts) override;

  std::vector<Clock::duration> backoff_sleeps() const;
  const RateLimiter& limiter() const noexcept { return limiter_; }

 private:
  template <typename Fn>
  auto with_retries(Fn&& attempt) -> decltype(attempt());

  std::shared_ptr<Transport> transport_;
  RetryPolicy retry_;
  std::size_t batch_size_;
  std::shared_ptr<Clock> clock_;
  RateLimiter limiter_;
  mutable std::mutex mu_;
  std::mt19937_64 jitter_rng_;
  std::vector<Clock::duration> sleeps_;
};

/// Replays a fixed response list in call order, regardless of prompt content.
/// Thread-safe; every request is captured for inspection.
class ScriptedProvider final : public Provider {
 public:
  explicit ScriptedProvider(std::vector<ScriptEntry> script,
                            std::map<std::string, Embedding> embeddings = {});

  ChatResponse complete(const ChatRequest& request) override;
  std::vector<Embedding> embed(const std::vector<std::string>& texts) override;

  std::vector<ChatRequest> captured() const;
  std::size_t calls() const;
  std::size_t remaining() const;

 private:
  mutable std::mutex mu_;
  std::vector<ScriptEntry> script_;
  std::map<std::string, Embedding> embeddings_;
  std::size_t next_ = 0;
  std::vector<ChatRequest> captured_;
};

/// Convenience for building scripts from plain strings.
std::vector<ScriptEntry> script_of(const std::vector<std::string>& responses);

/// Wraps a provider, accumulating token usage and enforcing an optional
/// budget shared across wrappers.
class MeteredProvider final : public Provider {
 public:
  struct Budget {
    std::atomic<std::int64_t> used{0};
    std::int64_t limit = 0;  // 0 = unlimited
  };

  MeteredProvider(std::shared_ptr<Provider> inner, std::shared_ptr<Budget> budget = nullptr);

  ChatResponse complete(const ChatRequest& request) override;
  std::vector<Embedding> embed(const std::vector<std::string>& texts) override;

  Usage usage() const;

 private:
  std::shared_ptr<Provider> inner_;
  std::shared_ptr<Budget> budget_;
  std::atomic<std::int64_t> input_{0};
  std::atomic<std::int64_t> output_{0};
};

/// Builds the provider a config describes. Substitutions are applied to
/// scripted responses ("{{key}}" -> value), letting parallel workers replay
/// one script with distinct content.
std::shared_ptr<Provider> make_provider(const ProviderConfig& config,
                                        const std::map<std::string, std::string>& substitutions = {},
                                        std::shared_ptr<Clock> clock = steady_clock());

/// Fails fast (ProviderError::authentication) if an http provider's
/// credentials cannot be resolved from the environment.
void preflight(const ProviderConfig& config);

}  // namespace metasynth::llm
