#include "metasynth/llm_gateway.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include "metasynth/numeric.hpp"
#include "metasynth/text.hpp"

namespace metasynth::llm {

using nlohmann::json;

void validate(const ChatRequest& request) {
  if (request.messages.empty()) throw PreconditionError("chat request has no messages");
  for (std::size_t i = 0; i < request.messages.size(); ++i) {
    const Role expected = (i % 2 == 0) ? Role::user : Role::assistant;
    if (request.messages[i].role != expected) {
      throw PreconditionError("chat request roles must alternate starting with user (message " +
                              std::to_string(i) + ")");
    }
  }
  if (request.temperature < 0) throw PreconditionError("temperature must be >= 0");
  if (request.max_tokens <= 0) throw PreconditionError("max_tokens must be positive");
}

ChatRequest user_request(std::string content, double temperature, std::optional<std::string> system) {
  ChatRequest r;
  r.system = std::move(system);
  r.messages.push_back({Role::user, std::move(content)});
  r.temperature = temperature;
  return r;
}

std::string flatten(const ChatRequest& request) {
  std::string out;
  if (request.system) out += *request.system + "\n";
  for (const auto& m : request.messages) out += m.content + "\n";
  return out;
}

std::vector<std::string> check(const ProviderConfig& config) {
  std::vector<std::string> problems;
  if (config.kind == ProviderConfig::Kind::scripted) {
    if (config.script.empty() && config.embedding_script.empty()) {
      problems.push_back("scripted provider requires a nonempty script");
    }
  } else if (config.endpoint.empty()) {
    problems.push_back("http_api provider requires an endpoint");
  }
  if (config.max_retries < 0) problems.push_back("max_retries must be >= 0");
  if (config.requests_per_minute < 0) problems.push_back("requests_per_minute must be >= 0");
  if (config.embed_batch_size == 0) problems.push_back("embed_batch_size must be positive");
  return problems;
}

void to_json(json& j, const ProviderConfig& c) {
  j = json{{"kind", c.kind == ProviderConfig::Kind::scripted ? "scripted" : "http_api"},
           {"endpoint", c.endpoint},
           {"model", c.model},
           {"credentials_env_var", c.credentials_env_var},
           {"max_retries", c.max_retries},
           {"requests_per_minute", c.requests_per_minute},
           {"embed_batch_size", c.embed_batch_size},
           {"timeout_seconds", c.timeout_seconds}};
  json script = json::array();
  for (const auto& e : c.script) {
    json entry{{"response", e.response}};
    if (e.expect_substring) entry["expect"] = *e.expect_substring;
    script.push_back(std::move(entry));
  }
  j["script"] = std::move(script);
  json emb = json::array();
  for (const auto& [text_key, vec] : c.embedding_script) emb.push_back({{"text", text_key}, {"embedding", vec}});
  j["embeddings"] = std::move(emb);
}

void from_json(const json& j, ProviderConfig& c) {
  const auto kind = j.value("kind", std::string{"scripted"});
  if (kind == "scripted") {
    c.kind = ProviderConfig::Kind::scripted;
  } else if (kind == "http_api") {
    c.kind = ProviderConfig::Kind::http_api;
  } else {
    throw ValidationError("unknown provider kind '" + kind + "'");
  }
  c.endpoint = j.value("endpoint", std::string{});
  c.model = j.value("model", std::string{});
  c.credentials_env_var = j.value("credentials_env_var", std::string{"METASYNTH_API_KEY"});
  c.max_retries = j.value("max_retries", 5);
  c.requests_per_minute = j.value("requests_per_minute", 0);
  c.embed_batch_size = j.value("embed_batch_size", std::size_t{512});
  c.timeout_seconds = j.value("timeout_seconds", 120.0);
  c.script.clear();
  if (j.contains("script")) {
    for (const auto& e : j.at("script")) {
      ScriptEntry entry;
      if (e.is_string()) {
        entry.response = e.get<std::string>();
      } else {
        entry.response = e.at("response").get<std::string>();
        if (e.contains("expect")) entry.expect_substring = e.at("expect").get<std::string>();
      }
      c.script.push_back(std::move(entry));
    }
  }
  c.embedding_script.clear();
  if (j.contains("embeddings")) {
    for (const auto& e : j.at("embeddings")) {
      c.embedding_script[e.at("text").get<std::string>()] = e.at("embedding").get<Embedding>();
    }
  }
}

void SteadyClock::sleep_for(duration d) { std::this_thread::sleep_for(d); }

Clock::time_point ManualClock::now() {
  std::lock_guard lock(mu_);
  return now_;
}

void ManualClock::sleep_for(duration d) {
  std::lock_guard lock(mu_);
  if (d > duration::zero()) now_ += d;
  sleeps_.push_back(d);
}

void ManualClock::advance(duration d) {
  std::lock_guard lock(mu_);
  now_ += d;
}

std::vector<Clock::duration> ManualClock::sleeps() const {
  std::lock_guard lock(mu_);
  return sleeps_;
}

std::shared_ptr<Clock> steady_clock() {
  static auto clock = std::make_shared<SteadyClock>();
  return clock;
}

RateLimiter::RateLimiter(int per_minute, std::shared_ptr<Clock> clock)
    : per_minute_(per_minute), clock_(std::move(clock)) {}

void RateLimiter::acquire() {
  constexpr auto kWindow = std::chrono::seconds(60);
  std::unique_lock lock(mu_);
  while (true) {
    const auto now = clock_->now();
    if (per_minute_ <= 0) {
      log_.push_back(now);
      return;
    }
    while (!window_.empty() && window_.front() + kWindow <= now) window_.pop_front();
    if (window_.size() < static_cast<std::size_t>(per_minute_)) {
      window_.push_back(now);
      log_.push_back(now);
      return;
    }
    const auto wait = window_.front() + kWindow - now;
    lock.unlock();
    clock_->sleep_for(wait);
    lock.lock();
  }
}

std::vector<Clock::time_point> RateLimiter::dispatch_log() const {
  std::lock_guard lock(mu_);
  return log_;
}

Gateway::Gateway(std::shared_ptr<Transport> transport, RetryPolicy retry, int requests_per_minute,
                 std::size_t embed_batch_size, std::shared_ptr<Clock> clock)
    : transport_(std::move(transport)),
      retry_(retry),
      batch_size_(embed_batch_size == 0 ? 1 : embed_batch_size),
      clock_(std::move(clock)),
      limiter_(requests_per_minute, clock_),
      jitter_rng_(retry.jitter_seed) {}

template <typename Fn>
auto Gateway::with_retries(Fn&& attempt) -> decltype(attempt()) {
  for (int tries = 0;; ++tries) {
    limiter_.acquire();
    try {
      return attempt();
    } catch (const TransientError& e) {
      if (tries >= retry_.max_retries) {
        throw ProviderError(ProviderError::Kind::retries_exhausted,
                            "gave up after " + std::to_string(tries + 1) + " attempts: " + e.what());
      }
      double delay = retry_.base_seconds * std::pow(retry_.factor, tries);
      {
        std::lock_guard lock(mu_);
        delay *= 1.0 + retry_.jitter * (2.0 * uniform_unit(jitter_rng_) - 1.0);
      }
      const auto d = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(delay));
      {
        std::lock_guard lock(mu_);
        sleeps_.push_back(d);
      }
      clock_->sleep_for(d);
    }
  }
}

ChatResponse Gateway::complete(const ChatRequest& request) {
  validate(request);
  return with_retries([&] { return transport_->send(request); });
}

std::vector<Embedding> Gateway::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw PreconditionError("embed requires at least one text");
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
    const auto end = std::min(texts.size(), start + batch_size_);
    std::vector<std::string> batch(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                   texts.begin() + static_cast<std::ptrdiff_t>(end));
    auto vectors = with_retries([&] { return transport_->send_embed(batch); });
    if (vectors.size() != batch.size()) {
      throw ProviderError(ProviderError::Kind::bad_response, "embedding batch returned wrong number of vectors");
    }
    for (auto& v : vectors) out.push_back(std::move(v));
  }
  for (const auto& v : out) {
    if (v.size() != out.front().size()) {
      throw ProviderError(ProviderError::Kind::bad_response, "embeddings have inconsistent dimensions");
    }
  }
  return out;
}

std::vector<Clock::duration> Gateway::backoff_sleeps() const {
  std::lock_guard lock(mu_);
  return sleeps_;
}

ScriptedProvider::ScriptedProvider(std::vector<ScriptEntry> script, std::map<std::string, Embedding> embeddings)
    : script_(std::move(script)), embeddings_(std::move(embeddings)) {}

ChatResponse ScriptedProvider::complete(const ChatRequest& request) {
  validate(request);
  std::lock_guard lock(mu_);
  captured_.push_back(request);
  if (next_ >= script_.size()) {
    throw ProviderError(ProviderError::Kind::script_exhausted,
                        "scripted provider exhausted after " + std::to_string(script_.size()) + " responses");
  }
  const auto& entry = script_[next_];
  const auto prompt = flatten(request);
  if (entry.expect_substring && prompt.find(*entry.expect_substring) == std::string::npos) {
    throw ProviderError(ProviderError::Kind::script_mismatch,
                        "script entry " + std::to_string(next_) + " expected prompt to contain '" +
                            *entry.expect_substring + "'");
  }
  ++next_;
  ChatResponse r;
  r.content = entry.response;
  r.usage.input_tokens = static_cast<std::int64_t>(text::count_words(prompt));
  r.usage.output_tokens = static_cast<std::int64_t>(text::count_words(entry.response));
  return r;
}

std::vector<Embedding> ScriptedProvider::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw PreconditionError("embed requires at least one text");
  std::vector<Embedding> out;
  for (const auto& t : texts) {
    const auto it = embeddings_.find(t);
    if (it == embeddings_.end()) {
      throw ProviderError(ProviderError::Kind::script_exhausted, "no scripted embedding for text '" + t + "'");
    }
    out.push_back(it->second);
  }
  for (const auto& v : out) {
    if (v.size() != out.front().size()) {
      throw ProviderError(ProviderError::Kind::bad_response, "scripted embeddings have inconsistent dimensions");
    }
  }
  return out;
}

std::vector<ChatRequest> ScriptedProvider::captured() const {
  std::lock_guard lock(mu_);
  return captured_;
}

std::size_t ScriptedProvider::calls() const {
  std::lock_guard lock(mu_);
  return next_;
}

std::size_t ScriptedProvider::remaining() const {
  std::lock_guard lock(mu_);
  return script_.size() - next_;
}

std::vector<ScriptEntry> script_of(const std::vector<std::string>& responses) {
  std::vector<ScriptEntry> out;
  out.reserve(responses.size());
  for (const auto& r : responses) out.push_back({r, std::nullopt});
  return out;
}

MeteredProvider::MeteredProvider(std::shared_ptr<Provider> inner, std::shared_ptr<Budget> budget)
    : inner_(std::move(inner)), budget_(std::move(budget)) {}

ChatResponse MeteredProvider::complete(const ChatRequest& request) {
  if (budget_ && budget_->limit > 0 && budget_->used.load() >= budget_->limit) {
    throw ProviderError(ProviderError::Kind::budget_exhausted, "token budget exhausted");
  }
  auto r = inner_->complete(request);
  input_ += r.usage.input_tokens;
  output_ += r.usage.output_tokens;
  if (budget_) budget_->used += r.usage.input_tokens + r.usage.output_tokens;
  return r;
}

std::vector<Embedding> MeteredProvider::embed(const std::vector<std::string>& texts) { return inner_->embed(texts); }

Usage MeteredProvider::usage() const { return {input_.load(), output_.load()}; }

std::shared_ptr<Provider> make_provider(const ProviderConfig& config,
                                        const std::map<std::string, std::string>& substitutions,
                                        std::shared_ptr<Clock> clock) {
  if (const auto problems = check(config); !problems.empty()) throw ConfigError(problems);
  if (config.kind == ProviderConfig::Kind::scripted) {
    auto script = config.script;
    for (auto& entry : script) {
      for (const auto& [key, value] : substitutions) {
        entry.response = text::replace_all(std::move(entry.response), "{{" + key + "}}", value);
        if (entry.expect_substring) {
          entry.expect_substring = text::replace_all(std::move(*entry.expect_substring), "{{" + key + "}}", value);
        }
      }
    }
    return std::make_shared<ScriptedProvider>(std::move(script), config.embedding_script);
  }
  preflight(config);
  RetryPolicy retry;
  retry.max_retries = config.max_retries;
  return std::make_shared<Gateway>(make_http_transport(config), retry, config.requests_per_minute,
                                   config.embed_batch_size, std::move(clock));
}

void preflight(const ProviderConfig& config) {
  if (config.kind != ProviderConfig::Kind::http_api || config.credentials_env_var.empty()) return;
  const char* key = std::getenv(config.credentials_env_var.c_str());
  if (!key || !*key) {
    throw ProviderError(ProviderError::Kind::authentication,
                        "environment variable " + config.credentials_env_var + " is not set");
  }
}

}  // namespace metasynth::llm
