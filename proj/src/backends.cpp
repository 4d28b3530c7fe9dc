#include "tagrec/backends.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "tagrec/cache.hpp"
#include "tagrec/errors.hpp"
#include "tagrec/rng.hpp"

namespace tagrec {

std::string_view to_string(RequestKind kind) {
  switch (kind) {
    case RequestKind::Generate: return "generate";
    case RequestKind::Embed: return "embed";
    case RequestKind::Rank: return "rank";
  }
  return "unknown";
}

std::string BackendRequest::canonical() const {
  nlohmann::ordered_json obj;
  obj["kind"] = to_string(kind);
  obj["model_id"] = model_id;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& [k, v] : params) arr.push_back({k, v});
  obj["params"] = std::move(arr);
  obj["payload"] = payload;
  return obj.dump();
}

std::string BackendRequest::cache_key() const { return sha256_hex(canonical()); }

BackendStats BackendCounters::snapshot() const {
  return BackendStats{requests_.load(), cache_hits_.load(), remote_calls_.load(), retries_.load()};
}

std::string Generator::generate(const AssembledInput& input) {
  if (input.text.empty()) throw std::invalid_argument("generate: empty input");
  std::string out = do_generate(input);
  if (out.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw BackendError("generator '" + id() + "' returned an empty document for record '" + input.record_id + "'");
  }
  return out;
}

std::vector<EmbeddingVector> Embedder::embed_batch(std::span<const std::string> texts) {
  if (texts.empty()) throw std::invalid_argument("embed_batch: empty batch");
  for (const auto& t : texts) {
    if (t.empty()) throw std::invalid_argument("embed_batch: empty text in batch");
  }
  auto vectors = do_embed(texts);
  if (vectors.size() != texts.size()) {
    throw BackendError("embedder '" + id() + "' returned " + std::to_string(vectors.size()) + " vectors for " +
                       std::to_string(texts.size()) + " texts");
  }
  std::lock_guard lock(mu_);
  for (const auto& v : vectors) {
    if (!dim_) dim_ = v.dim();
    if (v.dim() != *dim_) {
      throw BackendError("embedder '" + id() + "' dimension drift: " + std::to_string(v.dim()) + " after " +
                         std::to_string(*dim_));
    }
  }
  return vectors;
}

std::optional<std::size_t> Embedder::session_dim() const {
  std::lock_guard lock(mu_);
  return dim_;
}

std::string Ranker::rank_listwise(const RankRequest& request) {
  if (request.prompt.empty()) throw std::invalid_argument("rank_listwise: empty prompt");
  return do_rank(request);
}

FileBackedGenerator::FileBackedGenerator(std::span<const NumeralRecord> records) {
  for (const auto& r : records) by_record_.emplace(r.record_id, r.gen_tag_doc);
}

std::string FileBackedGenerator::do_generate(const AssembledInput& input) {
  auto it = by_record_.find(input.record_id);
  if (it == by_record_.end() || !it->second || it->second->empty()) {
    throw MissingGeneration("no stored generation for record '" + input.record_id + "'");
  }
  return *it->second;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

HashEmbedder::HashEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("HashEmbedder: dim must be positive");
}

std::size_t HashEmbedder::bucket(std::string_view token) const {
  return static_cast<std::size_t>(fnv1a64(token) % dim_);
}

std::vector<EmbeddingVector> HashEmbedder::do_embed(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  std::vector<double> counts(dim_);
  for (const auto& text : texts) {
    std::fill(counts.begin(), counts.end(), 0.0);
    const auto tokens = tokenize(text);
    if (tokens.empty()) throw BackendError("hash embedder: text has no tokens");
    for (const auto& tok : tokens) counts[bucket(tok)] += 1.0;
    double n2 = 0.0;
    for (double c : counts) n2 += c * c;
    const double inv = 1.0 / std::sqrt(n2);
    std::vector<float> values(dim_);
    for (std::size_t i = 0; i < dim_; ++i) values[i] = static_cast<float>(counts[i] * inv);
    out.emplace_back(std::move(values));
  }
  return out;
}

}  // namespace tagrec
