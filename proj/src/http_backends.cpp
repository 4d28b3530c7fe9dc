#include "tagrec/http_backends.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "tagrec/errors.hpp"

namespace tagrec {
namespace {

using json = nlohmann::ordered_json;

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

std::string format_double(double v) { return json(v).dump(); }

}  // namespace

std::chrono::milliseconds RetryPolicy::delay_for(int retry) const {
  const double factor = std::pow(multiplier, std::max(0, retry - 1));
  const double ms = std::min(static_cast<double>(max_delay.count()), static_cast<double>(base_delay.count()) * factor);
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

RateLimiter::RateLimiter(RateLimit limit) : limit_(limit) {
  if (limit_.max_in_flight == 0) limit_.max_in_flight = 1;
}

RateLimiter::Permit RateLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < limit_.max_in_flight; });
  ++in_flight_;
  auto now = std::chrono::steady_clock::now();
  auto start = std::max(now, next_start_);
  next_start_ = start + limit_.min_interval;
  lock.unlock();
  if (start > now) std::this_thread::sleep_until(start);
  return Permit(*this);
}

void RateLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

std::size_t RateLimiter::in_flight() const {
  std::lock_guard lock(mu_);
  return in_flight_;
}

JsonPoster::JsonPoster(RemoteSettings settings, BackendCounters& counters, Sleeper sleeper)
    : settings_(std::move(settings)),
      counters_(counters),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper([](auto d) { std::this_thread::sleep_for(d); })),
      limiter_(settings_.rate) {}

std::string JsonPoster::post(const std::string& body) {
  const int attempts = std::max(1, settings_.retry.max_attempts);
  std::string last_error;
  int last_status = 0;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1) {
      counters_.retry();
      sleeper_(settings_.retry.delay_for(attempt - 1));
    }
    httplib::Result res;
    {
      auto permit = limiter_.acquire();
      counters_.remote_call();
      httplib::Client client(settings_.base_url);
      client.set_connection_timeout(std::chrono::seconds(10));
      client.set_read_timeout(settings_.timeout);
      client.set_write_timeout(settings_.timeout);
      httplib::Headers headers;
      if (settings_.api_key && !settings_.api_key->empty()) {
        headers.emplace("Authorization", "Bearer " + *settings_.api_key);
      }
      res = client.Post(settings_.path, headers, body, "application/json");
    }
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      last_status = 0;
      continue;
    }
    const int status = res->status;
    if (status >= 200 && status < 300) return res->body;
    if (status == 401 || status == 403) {
      throw AuthError(settings_.name + ": authentication failed (HTTP " + std::to_string(status) + ")", status);
    }
    last_status = status;
    last_error = "HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200);
    if (!transient_status(status)) throw BackendError(settings_.name + ": " + last_error, false, status);
  }
  throw BackendError(settings_.name + ": giving up after " + std::to_string(attempts) + " attempts; last " +
                         last_error,
                     true, last_status);
}

std::string chat_request_body(const RemoteSettings& settings, std::string_view prompt) {
  json body;
  body["model"] = settings.model_id;
  auto messages = json::array();
  if (!settings.system_prompt.empty()) messages.push_back({{"role", "system"}, {"content", settings.system_prompt}});
  messages.push_back({{"role", "user"}, {"content", prompt}});
  body["messages"] = std::move(messages);
  body["temperature"] = settings.temperature;
  if (settings.max_tokens) body["max_tokens"] = *settings.max_tokens;
  return body.dump();
}

std::string chat_reply_content(const std::string& body) {
  try {
    const json obj = json::parse(body);
    const auto& content = obj.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw BackendError("chat reply content is not a string");
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed chat completion response: ") + e.what());
  }
}

ChatCompletionClient::ChatCompletionClient(RemoteSettings settings, std::shared_ptr<ResponseCache> cache,
                                           RequestKind kind, Sleeper sleeper)
    : poster_(std::move(settings), counters_, std::move(sleeper)), cache_(std::move(cache)), kind_(kind) {
  if (poster_.settings().model_id.empty()) throw ConfigError("remote chat backend requires a model id");
}

BackendRequest ChatCompletionClient::request_for(std::string_view prompt) const {
  const auto& s = poster_.settings();
  BackendRequest req;
  req.kind = kind_;
  req.payload = std::string(prompt);
  req.model_id = s.model_id;
  req.params = {{"temperature", format_double(s.temperature)},
                {"max_tokens", s.max_tokens ? std::to_string(*s.max_tokens) : "null"},
                {"system", s.system_prompt}};
  return req;
}

std::string ChatCompletionClient::backend_id() const {
  return poster_.settings().name + ":" + poster_.settings().model_id;
}

std::string ChatCompletionClient::complete(std::string_view prompt) {
  counters_.request();
  const auto req = request_for(prompt);
  std::string key;
  if (cache_) {
    key = req.cache_key();
    if (auto hit = cache_->get(key)) {
      counters_.cache_hit();
      return hit->response;
    }
  }
  std::string content = chat_reply_content(poster_.post(chat_request_body(poster_.settings(), prompt)));
  if (cache_) cache_->put(CacheEntry{key, content, utc_timestamp(), backend_id()});
  return content;
}

RemoteChatRanker::RemoteChatRanker(RemoteSettings settings, std::shared_ptr<ResponseCache> cache, Sleeper sleeper)
    : client_(std::move(settings), std::move(cache), RequestKind::Rank, std::move(sleeper)) {}

std::string RemoteChatRanker::do_rank(const RankRequest& request) { return client_.complete(request.prompt); }

RemoteChatGenerator::RemoteChatGenerator(RemoteSettings settings, std::shared_ptr<ResponseCache> cache,
                                         Sleeper sleeper)
    : client_(std::move(settings), std::move(cache), RequestKind::Generate, std::move(sleeper)) {}

std::string RemoteChatGenerator::do_generate(const AssembledInput& input) { return client_.complete(input.text); }

RemoteEmbedder::RemoteEmbedder(RemoteSettings settings, std::shared_ptr<ResponseCache> cache, Sleeper sleeper)
    : poster_(std::move(settings), counters_, std::move(sleeper)), cache_(std::move(cache)) {
  if (poster_.settings().model_id.empty()) throw ConfigError("remote embedder requires a model id");
}

std::string RemoteEmbedder::id() const { return poster_.settings().name + ":" + poster_.settings().model_id; }

std::vector<EmbeddingVector> RemoteEmbedder::do_embed(std::span<const std::string> texts) {
  counters_.request();
  json input = json::array();
  for (const auto& t : texts) input.push_back(t);

  BackendRequest req;
  req.kind = RequestKind::Embed;
  req.payload = input.dump();
  req.model_id = poster_.settings().model_id;

  std::string vectors_json;
  std::string key;
  bool from_cache = false;
  if (cache_) {
    key = req.cache_key();
    if (auto hit = cache_->get(key)) {
      counters_.cache_hit();
      vectors_json = std::move(hit->response);
      from_cache = true;
    }
  }
  if (!from_cache) {
    json body;
    body["model"] = poster_.settings().model_id;
    body["input"] = input;
    const std::string reply = poster_.post(body.dump());
    json vectors = json::array();
    try {
      const json obj = json::parse(reply);
      const auto& data = obj.at("data");
      std::vector<std::pair<std::size_t, const json*>> rows;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t index = data[i].contains("index") ? data[i].at("index").get<std::size_t>() : i;
        rows.emplace_back(index, &data[i].at("embedding"));
      }
      std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      for (const auto& [index, emb] : rows) vectors.push_back(*emb);
    } catch (const json::exception& e) {
      throw BackendError(std::string("malformed embedding response: ") + e.what());
    }
    vectors_json = vectors.dump();
    if (cache_) cache_->put(CacheEntry{key, vectors_json, utc_timestamp(), id()});
  }

  std::vector<EmbeddingVector> out;
  try {
    const json vectors = json::parse(vectors_json);
    for (const auto& row : vectors) {
      std::vector<float> values;
      values.reserve(row.size());
      for (const auto& x : row) values.push_back(static_cast<float>(x.get<double>()));
      out.emplace_back(std::move(values));
    }
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed embedding vectors: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw BackendError(std::string("invalid embedding vector: ") + e.what());
  }
  return out;
}

}  // namespace tagrec
