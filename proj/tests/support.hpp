#pragma once

#include <atomic>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "tagrec/corpus.hpp"
#include "tagrec/eval.hpp"
#include "tagrec/retrieval.hpp"

namespace httplib {
class Server;
}

namespace testsupport {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& label = "tagrec");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Local OpenAI-compatible endpoint for offline tests.
///
/// Chat requests whose prompt contains numbered passages are answered with a
/// ranking (passages sorted by FNV-1a of their text); other chat requests get
/// "generated: <last prompt line>". Embedding requests get hash-embedder
/// vectors of dimension 16. Queued status codes are served first, one per
/// request.
class FakeOpenAI {
 public:
  FakeOpenAI();
  ~FakeOpenAI();
  FakeOpenAI(const FakeOpenAI&) = delete;
  FakeOpenAI& operator=(const FakeOpenAI&) = delete;

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  void fail_next(int status, std::size_t times = 1);
  std::size_t requests() const { return requests_.load(); }
  std::string last_authorization() const;
  std::string last_body() const;

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<std::size_t> requests_{0};
  mutable std::mutex mu_;
  std::deque<int> failures_;
  std::string last_auth_;
  std::string last_body_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

// Ten tag documents with disjoint vocabularies, ids "TAG-00".."TAG-09".
tagrec::TaxonomyCorpus fixture_taxonomy();
// Five records whose stored generation equals the gold tag's document.
std::vector<tagrec::NumeralRecord> fixture_dataset(const tagrec::TaxonomyCorpus& corpus);

// Exhaustive scan: cosine of every entry, sorted by (score desc, position asc).
std::vector<tagrec::Candidate> brute_force_top_k(std::span<const float> query, const tagrec::VectorIndex& index,
                                                 std::size_t k);

// Per-class confusion counts enumerated from scratch, then averaged.
tagrec::MacroMetrics brute_force_macro(const std::vector<tagrec::PredictionItem>& items);

}  // namespace testsupport
