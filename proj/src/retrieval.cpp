#include "tagrec/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tagrec/errors.hpp"

namespace tagrec {

EmbeddingVector::EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("EmbeddingVector: dimension must be positive");
  for (float v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("EmbeddingVector: non-finite value");
  }
}

double squared_norm(std::span<const float> v) {
  double acc = 0.0;
  for (float x : v) acc += static_cast<double>(x) * static_cast<double>(x);
  return acc;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("cosine_similarity: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()) + ")");
  }
  const double na = squared_norm(a.values());
  const double nb = squared_norm(b.values());
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine_similarity: zero-norm vector");
  return dot(a.values(), b.values()) / (std::sqrt(na) * std::sqrt(nb));
}

VectorIndex::VectorIndex(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("VectorIndex: dimension must be positive");
}

void VectorIndex::add(std::string tag_id, std::span<const float> values) {
  if (values.size() != dim_) {
    throw std::invalid_argument("VectorIndex::add: '" + tag_id + "' has dim " + std::to_string(values.size()) +
                                ", index dim is " + std::to_string(dim_));
  }
  if (tag_id.empty()) throw std::invalid_argument("VectorIndex::add: empty tag_id");
  if (id_set_.contains(tag_id)) throw std::invalid_argument("VectorIndex::add: duplicate tag_id '" + tag_id + "'");
  for (float v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("VectorIndex::add: non-finite value for '" + tag_id + "'");
  }
  const double n2 = squared_norm(values);
  if (n2 == 0.0) throw std::invalid_argument("VectorIndex::add: zero-norm embedding for '" + tag_id + "'");
  id_set_.insert(tag_id);
  ids_.push_back(std::move(tag_id));
  data_.insert(data_.end(), values.begin(), values.end());
  norms_.push_back(std::sqrt(n2));
}

VectorIndex VectorIndex::build(const TaxonomyCorpus& corpus, Embedder& embedder, std::size_t batch_size) {
  if (corpus.empty()) throw std::invalid_argument("VectorIndex::build: empty corpus");
  if (batch_size == 0) throw std::invalid_argument("VectorIndex::build: batch_size must be positive");

  std::optional<VectorIndex> index;
  const auto docs = corpus.docs();
  std::vector<std::string> texts;
  for (std::size_t begin = 0; begin < docs.size(); begin += batch_size) {
    const std::size_t end = std::min(docs.size(), begin + batch_size);
    texts.clear();
    for (std::size_t i = begin; i < end; ++i) texts.push_back(docs[i].text);

    std::vector<EmbeddingVector> vectors;
    try {
      vectors = embedder.embed_batch(texts);
    } catch (const BackendError& e) {
      throw BackendError("embedding tags '" + docs[begin].tag_id + "'..'" + docs[end - 1].tag_id + "': " + e.what(),
                         e.transient(), e.status());
    }
    for (std::size_t i = begin; i < end; ++i) {
      const auto& v = vectors[i - begin];
      if (!index) index.emplace(v.dim());
      if (v.dim() != index->dim()) {
        throw BackendError("embedding dimension disagreement at tag '" + docs[i].tag_id + "': " +
                           std::to_string(v.dim()) + " vs " + std::to_string(index->dim()));
      }
      try {
        index->add(docs[i].tag_id, v.values());
      } catch (const std::invalid_argument& e) {
        throw BackendError(std::string("bad embedding: ") + e.what());
      }
    }
  }
  return std::move(*index);
}

bool VectorIndex::matches(const TaxonomyCorpus& corpus) const {
  if (corpus.size() != ids_.size()) return false;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (corpus.at(i).tag_id != ids_[i]) return false;
  }
  return true;
}

bool VectorIndex::operator==(const VectorIndex& other) const {
  return dim_ == other.dim_ && ids_ == other.ids_ && data_ == other.data_;
}

std::vector<double> score_all(const EmbeddingVector& query, const VectorIndex& index) {
  if (query.dim() != index.dim()) {
    throw std::invalid_argument("score_all: query dim " + std::to_string(query.dim()) + " != index dim " +
                                std::to_string(index.dim()));
  }
  const double qn2 = squared_norm(query.values());
  if (qn2 == 0.0) throw std::invalid_argument("score_all: zero-norm query");
  const double qn = std::sqrt(qn2);
  const auto q = query.values();
  const auto n = static_cast<std::ptrdiff_t>(index.size());
  std::vector<double> scores(index.size());

  // Each dot product stays sequential so scores are bit-identical to the
  // serial path regardless of thread count.
#pragma omp parallel for schedule(static) if (n > 256)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    scores[idx] = dot(q, index.row(idx)) / (qn * index.norm(idx));
  }
  return scores;
}

std::vector<double> score_all_serial(const EmbeddingVector& query, const VectorIndex& index) {
  if (query.dim() != index.dim()) {
    throw std::invalid_argument("score_all_serial: dimension mismatch");
  }
  const double qn2 = squared_norm(query.values());
  if (qn2 == 0.0) throw std::invalid_argument("score_all_serial: zero-norm query");
  const double qn = std::sqrt(qn2);
  std::vector<double> scores;
  scores.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    scores.push_back(dot(query.values(), index.row(i)) / (qn * index.norm(i)));
  }
  return scores;
}

namespace {

void check_k(std::size_t k, const VectorIndex& index) {
  if (k < 1 || k > index.size()) {
    throw std::invalid_argument("top_k: k=" + std::to_string(k) + " outside 1.." + std::to_string(index.size()));
  }
}

}  // namespace

std::vector<Candidate> top_k(const EmbeddingVector& query, const VectorIndex& index, std::size_t k) {
  check_k(k, index);
  const auto scores = score_all(query, index);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  std::vector<Candidate> out;
  out.reserve(k);
  for (std::size_t r = 0; r < k; ++r) out.push_back({index.tag_id(order[r]), scores[order[r]], r + 1});
  return out;
}

std::vector<Candidate> top_k_serial(const EmbeddingVector& query, const VectorIndex& index, std::size_t k) {
  check_k(k, index);
  const auto scores = score_all_serial(query, index);
  // Sorted buffer of the best k positions seen so far. A later entry only
  // displaces on a strictly greater score, which keeps earlier entries ahead
  // on ties.
  std::vector<std::size_t> best;
  best.reserve(k + 1);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (best.size() == k && !(scores[i] > scores[best.back()])) continue;
    auto pos = best.end();
    while (pos != best.begin() && scores[*(pos - 1)] < scores[i]) --pos;
    best.insert(pos, i);
    if (best.size() > k) best.pop_back();
  }
  std::vector<Candidate> out;
  out.reserve(k);
  for (std::size_t r = 0; r < best.size(); ++r) out.push_back({index.tag_id(best[r]), scores[best[r]], r + 1});
  return out;
}

std::vector<Candidate> retrieve(const NumeralRecord& record, std::string_view gen_doc, const VectorIndex& index,
                                Embedder& embedder, std::size_t k) {
  if (gen_doc.empty()) {
    throw std::invalid_argument("retrieve: empty generated document for record '" + record.record_id + "'");
  }
  const std::vector<std::string> texts{std::string(gen_doc)};
  auto vectors = embedder.embed_batch(texts);
  return top_k(vectors.front(), index, k);
}

}  // namespace tagrec
