#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tagrec/oracle.hpp"
#include "tagrec/rerank.hpp"

namespace tagrec {

struct RecoveryResult {
  std::size_t n_trials = 0;
  std::size_t recovered = 0;
  double rate = 0.0;
  double mean_gold_votes = 0.0;
  std::size_t fallback_events = 0;
  std::vector<std::uint8_t> recovered_by_trial;
  std::vector<std::size_t> gold_votes_by_trial;

  bool operator==(const RecoveryResult&) const = default;
};

/// One synthetic trial: `top_k` candidates at ranks 1..top_k with a gold
/// whose rank is uniform over 1..top_k.
struct SyntheticTrial {
  std::uint64_t seed = 0;
  std::string record_id;
  std::string gold_tag_id;
  std::string gen_doc;
  std::vector<Candidate> candidates;
};

// Corpus of the `top_k` synthetic tag documents shared by all trials.
TaxonomyCorpus synthetic_corpus(std::size_t top_k);
SyntheticTrial synthetic_trial(const RerankConfig& config, std::size_t trial);

// Fraction of trials whose prediction equals the gold tag. Trials run in
// parallel; every trial derives its own seed from (config.seed, trial), so the
// result does not depend on the thread count.
RecoveryResult recovery_experiment(std::size_t n_trials, const RerankConfig& config, const OracleSpec& spec);

// Single-threaded reference for recovery_experiment.
RecoveryResult recovery_experiment_serial(std::size_t n_trials, const RerankConfig& config, const OracleSpec& spec);

}  // namespace tagrec
