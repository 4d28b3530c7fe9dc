#include "tagrec/sim.hpp"

#include <cstdio>
#include <exception>
#include <stdexcept>

namespace tagrec {
namespace {

std::string synthetic_id(std::size_t rank) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "SYN-%03zu", rank);
  return buf;
}

struct TrialOutcome {
  bool recovered = false;
  std::size_t gold_votes = 0;
  std::size_t fallbacks = 0;
};

TrialOutcome run_trial(const TaxonomyCorpus& corpus, const RerankConfig& config, Ranker& ranker, std::size_t trial) {
  const SyntheticTrial t = synthetic_trial(config, trial);
  RerankConfig cfg = config;
  cfg.seed = t.seed;
  RankContext ctx{t.gen_doc, &corpus, std::string_view(t.gold_tag_id), nullptr};
  const auto result = rerank_record(t.record_id, ctx, t.candidates, cfg, ranker);
  return TrialOutcome{result.predicted_tag_id == t.gold_tag_id, result.trace.tally.count(t.gold_tag_id),
                      result.trace.fallback_events.size()};
}

RecoveryResult summarize(std::vector<TrialOutcome> outcomes) {
  RecoveryResult r;
  r.n_trials = outcomes.size();
  std::size_t votes = 0;
  for (const auto& o : outcomes) {
    r.recovered += o.recovered ? 1 : 0;
    votes += o.gold_votes;
    r.fallback_events += o.fallbacks;
    r.recovered_by_trial.push_back(o.recovered ? 1 : 0);
    r.gold_votes_by_trial.push_back(o.gold_votes);
  }
  r.rate = static_cast<double>(r.recovered) / static_cast<double>(r.n_trials);
  r.mean_gold_votes = static_cast<double>(votes) / static_cast<double>(r.n_trials);
  return r;
}

void check_args(std::size_t n_trials, const RerankConfig& config, const OracleSpec& spec) {
  if (n_trials < 1) throw std::invalid_argument("recovery_experiment: n_trials must be at least 1");
  config.validate();
  spec.validate();
}

}  // namespace

TaxonomyCorpus synthetic_corpus(std::size_t top_k) {
  std::vector<TagDocument> docs;
  docs.reserve(top_k);
  for (std::size_t rank = 1; rank <= top_k; ++rank) {
    const std::string id = synthetic_id(rank);
    docs.push_back({id, "synthetic tag document " + id + " describing concept " + std::to_string(rank)});
  }
  return TaxonomyCorpus(std::move(docs));
}

SyntheticTrial synthetic_trial(const RerankConfig& config, std::size_t trial) {
  SyntheticTrial t;
  t.seed = mix_seed(config.seed, trial);
  t.record_id = "trial-" + std::to_string(trial);
  Rng rng(t.seed);
  const std::size_t gold_rank = 1 + rng.below(config.top_k);
  t.candidates.reserve(config.top_k);
  for (std::size_t rank = 1; rank <= config.top_k; ++rank) {
    t.candidates.push_back({synthetic_id(rank), 1.0 - 0.01 * static_cast<double>(rank), rank});
  }
  t.gold_tag_id = synthetic_id(gold_rank);
  t.gen_doc = "synthetic tag document " + t.gold_tag_id + " describing concept " + std::to_string(gold_rank);
  return t;
}

RecoveryResult recovery_experiment(std::size_t n_trials, const RerankConfig& config, const OracleSpec& spec) {
  check_args(n_trials, config, spec);
  const TaxonomyCorpus corpus = synthetic_corpus(config.top_k);
  OracleRanker ranker(spec);
  std::vector<TrialOutcome> outcomes(n_trials);
  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(n_trials);

#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      outcomes[static_cast<std::size_t>(i)] = run_trial(corpus, config, ranker, static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(tagrec_sim_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return summarize(std::move(outcomes));
}

RecoveryResult recovery_experiment_serial(std::size_t n_trials, const RerankConfig& config, const OracleSpec& spec) {
  check_args(n_trials, config, spec);
  const TaxonomyCorpus corpus = synthetic_corpus(config.top_k);
  OracleRanker ranker(spec);
  std::vector<TrialOutcome> outcomes;
  outcomes.reserve(n_trials);
  for (std::size_t i = 0; i < n_trials; ++i) outcomes.push_back(run_trial(corpus, config, ranker, i));
  return summarize(std::move(outcomes));
}

}  // namespace tagrec
