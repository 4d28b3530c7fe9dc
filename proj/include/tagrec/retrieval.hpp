#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "tagrec/backends.hpp"
#include "tagrec/corpus.hpp"
#include "tagrec/embedding.hpp"

namespace tagrec {

struct Candidate {
  std::string tag_id;
  double score = 0.0;
  std::size_t retrieval_rank = 0;  // 1-based

  bool operator==(const Candidate&) const = default;
};

/// Dense row-major matrix of tag embeddings in taxonomy order.
///
/// Binary layout (all little-endian): u32 dim, u32 count, then per entry
/// u32 id_length, id bytes, dim x f32.
class VectorIndex {
 public:
  explicit VectorIndex(std::size_t dim);

  static VectorIndex build(const TaxonomyCorpus& corpus, Embedder& embedder, std::size_t batch_size = 32);

  void add(std::string tag_id, std::span<const float> values);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::string& tag_id(std::size_t i) const { return ids_.at(i); }
  const std::vector<std::string>& tag_ids() const noexcept { return ids_; }
  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  double norm(std::size_t i) const { return norms_[i]; }

  // True when ids match the corpus one-to-one in the same order.
  bool matches(const TaxonomyCorpus& corpus) const;

  void write(std::ostream& out) const;
  static VectorIndex read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static VectorIndex load(const std::filesystem::path& path);

  bool operator==(const VectorIndex& other) const;

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::vector<double> norms_;
  std::unordered_set<std::string> id_set_;
};

// Cosine similarity of the query against every entry (parallel over entries).
std::vector<double> score_all(const EmbeddingVector& query, const VectorIndex& index);
std::vector<double> score_all_serial(const EmbeddingVector& query, const VectorIndex& index);

// k highest-scoring entries; equal scores rank the earlier entry first.
std::vector<Candidate> top_k(const EmbeddingVector& query, const VectorIndex& index, std::size_t k);

// Single-threaded reference: serial scoring and an insertion-based bounded
// selection. Kept for testing and benchmarking the parallel kernel.
std::vector<Candidate> top_k_serial(const EmbeddingVector& query, const VectorIndex& index, std::size_t k);

std::vector<Candidate> retrieve(const NumeralRecord& record, std::string_view gen_doc, const VectorIndex& index,
                                Embedder& embedder, std::size_t k);

}  // namespace tagrec
