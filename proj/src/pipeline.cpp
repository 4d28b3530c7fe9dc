#include "tagrec/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <stdexcept>

#include "tagrec/errors.hpp"

namespace tagrec {
namespace {

void check_context(const PipelineContext& ctx) {
  if (!ctx.corpus || !ctx.index || !ctx.generator || !ctx.embedder || !ctx.ranker) {
    throw std::invalid_argument("pipeline context is incomplete");
  }
  if (!ctx.index->matches(*ctx.corpus)) {
    throw ConfigError("vector index does not match the taxonomy (rebuild it with embed-index --force)");
  }
  if (ctx.instruction.empty()) throw ConfigError("instruction prompt is empty");
}

// Runs body(i) for i in [0, n) on up to `workers` threads. The first
// AuthError or ConfigError is rethrown once all iterations finish.
template <typename Body>
void for_each_record(std::size_t n, std::size_t workers, Body&& body) {
  std::exception_ptr systemic;
  const auto count = static_cast<std::ptrdiff_t>(n);
  [[maybe_unused]] const int threads = static_cast<int>(std::max<std::size_t>(1, workers));
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (const AuthError&) {
#pragma omp critical(tagrec_pipeline_systemic)
      if (!systemic) systemic = std::current_exception();
    } catch (const ConfigError&) {
#pragma omp critical(tagrec_pipeline_systemic)
      if (!systemic) systemic = std::current_exception();
    }
  }
  if (systemic) std::rethrow_exception(systemic);
}

}  // namespace

Preparation prepare_records(const PipelineContext& ctx, std::size_t top_k) {
  check_context(ctx);
  if (top_k < 1 || top_k > ctx.index->size()) {
    throw ConfigError("top_k " + std::to_string(top_k) + " outside 1.." + std::to_string(ctx.index->size()));
  }

  const std::size_t n = ctx.records.size();
  std::vector<std::optional<PreparedRecord>> slots(n);
  std::vector<std::optional<RecordFailure>> failures(n);

  for_each_record(n, ctx.workers, [&](std::size_t i) {
    const NumeralRecord& rec = ctx.records[i];
    std::string stage = "generate";
    try {
      PreparedRecord p;
      p.record = &rec;
      p.gen_doc = ctx.generator->generate(assemble_generation_input(ctx.instruction, rec));
      stage = "retrieve";
      p.candidates = retrieve(rec, p.gen_doc, *ctx.index, *ctx.embedder, top_k);
      if (rec.gold_tag_id) {
        p.gold_in_top_k = std::any_of(p.candidates.begin(), p.candidates.end(),
                                      [&](const Candidate& c) { return c.tag_id == *rec.gold_tag_id; });
      }
      slots[i] = std::move(p);
    } catch (const AuthError&) {
      throw;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      failures[i] = RecordFailure{rec.record_id, stage, e.what()};
    }
  });

  Preparation prep;
  prep.top_k = top_k;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) prep.prepared.push_back(std::move(*slots[i]));
    if (failures[i]) prep.failures.push_back(std::move(*failures[i]));
  }
  return prep;
}

RunOutput rerank_prepared(const PipelineContext& ctx, const Preparation& prep, const RerankConfig& config) {
  check_context(ctx);
  config.validate();
  if (config.top_k != prep.top_k) {
    throw ConfigError("rerank top_k " + std::to_string(config.top_k) + " differs from retrieval top_k " +
                      std::to_string(prep.top_k));
  }

  const std::size_t n = prep.prepared.size();
  std::vector<std::optional<RerankResult>> results(n);
  std::vector<std::optional<RecordFailure>> failures(n);

  for_each_record(n, ctx.workers, [&](std::size_t i) {
    const PreparedRecord& p = prep.prepared[i];
    try {
      RankContext rc;
      rc.gen_doc = p.gen_doc;
      rc.corpus = ctx.corpus;
      rc.prompt = ctx.prompt;
      if (ctx.expose_gold_to_ranker && p.record->gold_tag_id) rc.gold_tag_id = *p.record->gold_tag_id;
      results[i] = rerank_record(p.record->record_id, rc, p.candidates, config, *ctx.ranker);
    } catch (const AuthError&) {
      throw;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      failures[i] = RecordFailure{p.record->record_id, "rerank", e.what()};
    }
  });

  RunOutput out;
  out.failures = prep.failures;
  for (std::size_t i = 0; i < n; ++i) {
    if (failures[i]) {
      out.failures.push_back(std::move(*failures[i]));
      continue;
    }
    const PreparedRecord& p = prep.prepared[i];
    auto& result = *results[i];
    out.fallback_events += result.trace.fallback_events.size();
    out.predictions.push_back(Prediction{p.record->record_id, result.predicted_tag_id, p.record->gold_tag_id,
                                         result.trace.tally.counts, p.gold_in_top_k});
    out.traces.push_back(std::move(result.trace));
  }
  auto by_id = [](const auto& a, const auto& b) { return a.record_id < b.record_id; };
  std::sort(out.predictions.begin(), out.predictions.end(), by_id);
  std::sort(out.traces.begin(), out.traces.end(), by_id);
  std::stable_sort(out.failures.begin(), out.failures.end(), by_id);
  return out;
}

RunOutput run_pipeline(const PipelineContext& ctx, const RerankConfig& config) {
  config.validate();
  return rerank_prepared(ctx, prepare_records(ctx, config.top_k), config);
}

}  // namespace tagrec
