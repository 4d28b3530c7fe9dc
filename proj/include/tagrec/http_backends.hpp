#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "tagrec/backends.hpp"
#include "tagrec/cache.hpp"

namespace tagrec {

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{20'000};
  double multiplier = 2.0;

  // Delay before retry number `retry` (1-based).
  std::chrono::milliseconds delay_for(int retry) const;
};

struct RateLimit {
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds min_interval{0};
};

/// Bounds concurrent requests and spaces request starts.
class RateLimiter {
 public:
  explicit RateLimiter(RateLimit limit);

  class Permit {
   public:
    explicit Permit(RateLimiter& owner) : owner_(&owner) {}
    Permit(Permit&& other) noexcept : owner_(std::exchange(other.owner_, nullptr)) {}
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    Permit& operator=(Permit&&) = delete;
    ~Permit() {
      if (owner_) owner_->release();
    }

   private:
    RateLimiter* owner_;
  };

  Permit acquire();
  std::size_t in_flight() const;

 private:
  void release();

  RateLimit limit_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
  std::chrono::steady_clock::time_point next_start_{};
};

/// Connection settings for one OpenAI-compatible service.
struct RemoteSettings {
  std::string name = "openai";  // env lookups use TAGREC_<NAME>_API_KEY / _BASE_URL
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model_id;
  std::optional<std::string> api_key;
  double temperature = 0.0;
  std::optional<int> max_tokens;
  std::string system_prompt;
  std::chrono::seconds timeout{120};
  RetryPolicy retry;
  RateLimit rate;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// POSTs JSON bodies with retry on transient failures (transport errors,
/// 408, 429, 5xx). 401/403 raise AuthError immediately.
class JsonPoster {
 public:
  JsonPoster(RemoteSettings settings, BackendCounters& counters, Sleeper sleeper = {});

  std::string post(const std::string& body);
  const RemoteSettings& settings() const noexcept { return settings_; }

 private:
  RemoteSettings settings_;
  BackendCounters& counters_;
  Sleeper sleeper_;
  RateLimiter limiter_;
};

/// Chat-completion call with an optional response cache in front.
class ChatCompletionClient {
 public:
  ChatCompletionClient(RemoteSettings settings, std::shared_ptr<ResponseCache> cache, RequestKind kind,
                       Sleeper sleeper = {});

  std::string complete(std::string_view prompt);

  BackendRequest request_for(std::string_view prompt) const;
  std::string backend_id() const;
  BackendStats stats() const { return counters_.snapshot(); }

 private:
  BackendCounters counters_;
  JsonPoster poster_;
  std::shared_ptr<ResponseCache> cache_;
  RequestKind kind_;
};

std::string chat_request_body(const RemoteSettings& settings, std::string_view prompt);
std::string chat_reply_content(const std::string& body);

class RemoteChatRanker final : public Ranker {
 public:
  RemoteChatRanker(RemoteSettings settings, std::shared_ptr<ResponseCache> cache, Sleeper sleeper = {});

  std::string id() const override { return client_.backend_id(); }
  BackendStats stats() const override { return client_.stats(); }

 protected:
  std::string do_rank(const RankRequest& request) override;

 private:
  ChatCompletionClient client_;
};

class RemoteChatGenerator final : public Generator {
 public:
  RemoteChatGenerator(RemoteSettings settings, std::shared_ptr<ResponseCache> cache, Sleeper sleeper = {});

  std::string id() const override { return client_.backend_id(); }
  BackendStats stats() const override { return client_.stats(); }

 protected:
  std::string do_generate(const AssembledInput& input) override;

 private:
  ChatCompletionClient client_;
};

/// Embedding service: POST {"model", "input": [...]} and read data[i].embedding.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(RemoteSettings settings, std::shared_ptr<ResponseCache> cache, Sleeper sleeper = {});

  std::string id() const override;
  BackendStats stats() const override { return counters_.snapshot(); }

 protected:
  std::vector<EmbeddingVector> do_embed(std::span<const std::string> texts) override;

 private:
  BackendCounters counters_;
  JsonPoster poster_;
  std::shared_ptr<ResponseCache> cache_;
};

}  // namespace tagrec
