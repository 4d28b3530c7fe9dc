#include "tagrec/cache.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <functional>
#include <sstream>
#include <system_error>
#include <thread>

#include "json.hpp"
#include "tagrec/errors.hpp"

namespace tagrec {
namespace {

using json = nlohmann::ordered_json;

std::optional<CacheEntry> read_entry(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    const json obj = json::parse(ss.str());
    return CacheEntry{obj.at("key").get<std::string>(), obj.at("response").get<std::string>(),
                      obj.at("created_at").get<std::string>(), obj.at("backend_id").get<std::string>()};
  } catch (const json::exception& e) {
    throw Error("corrupt cache entry " + path.string() + ": " + e.what());
  }
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ResponseCache::ResponseCache(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

bool ResponseCache::well_formed_key(const std::string& key) {
  if (key.size() != 64) return false;
  for (char c : key) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
  if (!well_formed_key(key)) throw std::invalid_argument("malformed cache key '" + key + "'");
  return root_ / key.substr(0, 2) / key.substr(2, 2) / (key + ".json");
}

std::optional<CacheEntry> ResponseCache::get(const std::string& key) {
  auto entry = read_entry(path_for(key));
  if (entry) {
    hits_.fetch_add(1, std::memory_order_relaxed);
  } else {
    misses_.fetch_add(1, std::memory_order_relaxed);
  }
  return entry;
}

void ResponseCache::put(const CacheEntry& entry) {
  const auto target = path_for(entry.key);
  if (auto existing = read_entry(target)) {
    if (existing->response != entry.response) throw CacheConflict("cache key " + entry.key + " holds a different response");
    return;
  }
  std::filesystem::create_directories(target.parent_path());

  json obj;
  obj["key"] = entry.key;
  obj["response"] = entry.response;
  obj["created_at"] = entry.created_at;
  obj["backend_id"] = entry.backend_id;

  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  const auto tmp = target.parent_path() /
                   (entry.key + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(tid));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache entry " + tmp.string());
    out << obj.dump();
    out.flush();
    if (!out) throw Error("cache write failed for " + tmp.string());
  }
  const int rc = ::link(tmp.c_str(), target.c_str());
  const int link_errno = errno;
  std::error_code ec;
  std::filesystem::remove(tmp, ec);
  if (rc != 0) {
    if (link_errno == EEXIST) {
      auto existing = read_entry(target);
      if (existing && existing->response != entry.response) {
        throw CacheConflict("cache key " + entry.key + " holds a different response");
      }
      return;
    }
    throw Error("cannot publish cache entry " + target.string() + ": " + std::strerror(link_errno));
  }
  writes_.fetch_add(1, std::memory_order_relaxed);
}

CacheStats ResponseCache::stats() const {
  return CacheStats{hits_.load(), misses_.load(), writes_.load()};
}

CacheUsage ResponseCache::usage() const {
  CacheUsage u;
  if (!std::filesystem::exists(root_)) return u;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root_)) {
    if (e.is_regular_file() && e.path().extension() == ".json" && well_formed_key(e.path().stem().string())) {
      ++u.entries;
      u.bytes += e.file_size();
    }
  }
  return u;
}

std::uint64_t ResponseCache::clear() {
  std::uint64_t removed = 0;
  if (!std::filesystem::exists(root_)) return 0;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root_)) {
    if (e.is_regular_file() && well_formed_key(e.path().stem().string())) files.push_back(e.path());
  }
  for (const auto& f : files) removed += std::filesystem::remove(f) ? 1 : 0;
  // Drop the now-empty two-level shard directories.
  for (const auto& top : std::filesystem::directory_iterator(root_)) {
    if (!top.is_directory() || top.path().filename().string().size() != 2) continue;
    std::error_code ec;
    for (const auto& sub : std::filesystem::directory_iterator(top.path())) std::filesystem::remove(sub.path(), ec);
    std::filesystem::remove(top.path(), ec);
  }
  return removed;
}

}  // namespace tagrec
