#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace tagrec {

struct CacheEntry {
  std::string key;
  std::string response;
  std::string created_at;  // UTC, ISO-8601
  std::string backend_id;
};

struct CacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t writes = 0;
};

struct CacheUsage {
  std::uint64_t entries = 0;
  std::uint64_t bytes = 0;
};

/// Content-addressed response store, one JSON file per entry under
/// `<root>/<k[0:2]>/<k[2:4]>/<k>.json`.
///
/// Entries are immutable. Writers create a temp file and hard-link it into
/// place, so a concurrent reader never observes a partial entry and two
/// writers cannot silently replace each other.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }

  std::optional<CacheEntry> get(const std::string& key);

  // Idempotent for identical responses; throws CacheConflict when the key
  // already holds a different response.
  void put(const CacheEntry& entry);

  CacheStats stats() const;
  CacheUsage usage() const;
  std::uint64_t clear();

  static bool well_formed_key(const std::string& key);

 private:
  std::filesystem::path path_for(const std::string& key) const;

  std::filesystem::path root_;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
  std::atomic<std::uint64_t> writes_{0};
};

std::string sha256_hex(std::string_view bytes);
std::string utc_timestamp();

}  // namespace tagrec
