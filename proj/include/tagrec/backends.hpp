#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tagrec/corpus.hpp"
#include "tagrec/embedding.hpp"
#include "tagrec/prompting.hpp"

namespace tagrec {

enum class RequestKind { Generate, Embed, Rank };

std::string_view to_string(RequestKind kind);

/// Logical request to a remote model. Its canonical serialization is the
/// cache identity: same kind, payload, model and params give the same key.
struct BackendRequest {
  RequestKind kind = RequestKind::Generate;
  std::string payload;
  std::string model_id;
  std::vector<std::pair<std::string, std::string>> params;

  std::string canonical() const;
  std::string cache_key() const;  // lowercase hex SHA-256 of canonical()
};

struct BackendStats {
  std::uint64_t requests = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t remote_calls = 0;
  std::uint64_t retries = 0;
};

// Shared counters for backends; safe to bump from concurrent workers.
class BackendCounters {
 public:
  void request() { requests_.fetch_add(1, std::memory_order_relaxed); }
  void cache_hit() { cache_hits_.fetch_add(1, std::memory_order_relaxed); }
  void remote_call() { remote_calls_.fetch_add(1, std::memory_order_relaxed); }
  void retry() { retries_.fetch_add(1, std::memory_order_relaxed); }
  BackendStats snapshot() const;

 private:
  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> remote_calls_{0};
  std::atomic<std::uint64_t> retries_{0};
};

class Generator {
 public:
  virtual ~Generator() = default;

  // Generated tag document for the assembled input; never empty.
  std::string generate(const AssembledInput& input);

  virtual std::string id() const = 0;
  virtual BackendStats stats() const { return {}; }

 protected:
  virtual std::string do_generate(const AssembledInput& input) = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;

  // One vector per text, order preserved. All vectors produced during the
  // lifetime of the embedder share one dimension; drift is an error.
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts);

  std::optional<std::size_t> session_dim() const;

  virtual std::string id() const = 0;
  virtual BackendStats stats() const { return {}; }

 protected:
  virtual std::vector<EmbeddingVector> do_embed(std::span<const std::string> texts) = 0;

 private:
  mutable std::mutex mu_;
  std::optional<std::size_t> dim_;
};

struct RankMember {
  std::string_view tag_id;
  std::string_view text;
  std::size_t retrieval_rank = 0;
};

/// One listwise ranking call. Remote rankers only see `prompt`; the
/// structured fields exist for offline oracle rankers.
struct RankRequest {
  std::string_view prompt;
  std::string_view gen_doc;
  std::span<const RankMember> members;  // presented order
  std::optional<std::string_view> gold_tag_id;
  std::uint64_t call_seed = 0;
};

class Ranker {
 public:
  virtual ~Ranker() = default;

  // Verbatim textual reply of the backend.
  std::string rank_listwise(const RankRequest& request);

  virtual std::string id() const = 0;
  virtual BackendStats stats() const { return {}; }

 protected:
  virtual std::string do_rank(const RankRequest& request) = 0;
};

/// Returns the generation stored with each record.
class FileBackedGenerator final : public Generator {
 public:
  explicit FileBackedGenerator(std::span<const NumeralRecord> records);

  std::string id() const override { return "file"; }

 protected:
  std::string do_generate(const AssembledInput& input) override;

 private:
  std::unordered_map<std::string, std::optional<std::string>> by_record_;
};

/// Offline embedder: lowercase whitespace tokens, each hashed (FNV-1a) into
/// one of `dim` buckets, counts accumulated, vector L2-normalized.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t bucket(std::string_view token) const;
  std::string id() const override { return "hash:" + std::to_string(dim_); }

 protected:
  std::vector<EmbeddingVector> do_embed(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
};

// Lowercased (ASCII) whitespace-separated tokens.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace tagrec
