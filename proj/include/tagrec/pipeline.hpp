#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tagrec/backends.hpp"
#include "tagrec/corpus.hpp"
#include "tagrec/prompting.hpp"
#include "tagrec/rerank.hpp"
#include "tagrec/retrieval.hpp"

namespace tagrec {

/// Everything one end-to-end run needs. Backends must be safe for
/// concurrent calls when `workers` > 1.
struct PipelineContext {
  const TaxonomyCorpus* corpus = nullptr;
  std::span<const NumeralRecord> records;
  const VectorIndex* index = nullptr;
  Generator* generator = nullptr;
  Embedder* embedder = nullptr;
  Ranker* ranker = nullptr;
  std::string instruction;
  const PromptTemplate* prompt = nullptr;
  std::size_t workers = 1;
  // Forward gold tags to the ranker (oracle rankers need them; remote
  // rankers ignore them).
  bool expose_gold_to_ranker = false;
};

struct RecordFailure {
  std::string record_id;
  std::string stage;  // "generate", "retrieve" or "rerank"
  std::string message;
};

/// Generation and retrieval output for one record; shared by every rerank
/// configuration of a sweep.
struct PreparedRecord {
  const NumeralRecord* record = nullptr;
  std::string gen_doc;
  std::vector<Candidate> candidates;
  bool gold_in_top_k = false;
};

struct Preparation {
  std::size_t top_k = 0;
  std::vector<PreparedRecord> prepared;  // dataset order
  std::vector<RecordFailure> failures;
};

struct Prediction {
  std::string record_id;
  std::string predicted_tag_id;
  std::optional<std::string> gold_tag_id;
  std::map<std::string, std::size_t> votes;
  bool gold_in_top_k = false;
};

struct RunOutput {
  std::vector<Prediction> predictions;  // sorted by record_id
  std::vector<RerankTrace> traces;      // sorted by record_id
  std::vector<RecordFailure> failures;  // sorted by record_id
  std::size_t fallback_events = 0;
};

// Generation then Top-k retrieval for every record. Per-record failures are
// collected; authentication failures abort.
Preparation prepare_records(const PipelineContext& ctx, std::size_t top_k);

RunOutput rerank_prepared(const PipelineContext& ctx, const Preparation& prep, const RerankConfig& config);

RunOutput run_pipeline(const PipelineContext& ctx, const RerankConfig& config);

}  // namespace tagrec
