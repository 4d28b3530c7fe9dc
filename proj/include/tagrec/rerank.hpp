#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tagrec/backends.hpp"
#include "tagrec/corpus.hpp"
#include "tagrec/prompting.hpp"
#include "tagrec/retrieval.hpp"
#include "tagrec/rng.hpp"

namespace tagrec {

enum class Ordering { OrderPreserving, OrderShuffled };

// AlgorithmOne: every group winner of a round gets a vote.
// EqThreeSingle: one vote per round, for the winner of a final listwise call
// over that round's group winners.
enum class VoteMode { AlgorithmOne, EqThreeSingle };

std::string_view to_string(Ordering o);
std::string_view to_string(VoteMode m);
Ordering parse_ordering(std::string_view text);
VoteMode parse_vote_mode(std::string_view text);

struct RerankConfig {
  std::size_t group_size = 5;
  std::size_t iterations = 8;
  Ordering ordering = Ordering::OrderPreserving;
  std::uint64_t seed = 0;
  std::size_t top_k = 10;
  VoteMode vote_mode = VoteMode::AlgorithmOne;

  void validate() const;  // throws ConfigError
  std::size_t groups_per_round() const { return (top_k + group_size - 1) / group_size; }
  std::size_t votes_per_round() const { return vote_mode == VoteMode::AlgorithmOne ? groups_per_round() : 1; }
};

struct GroupAssignment {
  std::size_t iteration = 0;                    // 1-based round number
  std::vector<std::vector<Candidate>> groups;  // presented order within each group
};

GroupAssignment partition_into_groups(std::span<const Candidate> candidates, std::size_t group_size, Ordering ordering,
                                      Rng& rng);

struct FallbackEvent {
  std::size_t round = 0;
  std::size_t group = 0;  // 0-based; equals group count for the round-final call
  std::string reason;
};

struct GroupOutcome {
  std::vector<std::string> presented;  // tag ids in presented order
  std::optional<std::string> reply;    // absent when no backend call was made
  std::vector<std::size_t> order;      // parsed permutation, 1-based
  std::string winner;
  bool fallback = false;
};

/// Shared per-record inputs to the group ranking calls.
struct RankContext {
  std::string_view gen_doc;
  const TaxonomyCorpus* corpus = nullptr;   // source of candidate texts
  std::optional<std::string_view> gold_tag_id;  // forwarded to oracle rankers only
  const PromptTemplate* prompt = nullptr;   // null selects the builtin template
};

// Winner of one group. A singleton group needs no backend call. On an
// unparseable reply the first presented member wins and `fallback` is set.
GroupOutcome rank_group(const RankContext& ctx, std::span<const Candidate> group, Ranker& ranker,
                        std::uint64_t call_seed);

struct VoteTally {
  std::map<std::string, std::size_t> counts;
  std::size_t total_rounds = 0;

  std::size_t total_votes() const;
  std::size_t count(const std::string& tag_id) const;
};

VoteTally tally_votes(std::span<const std::vector<std::string>> winners_per_iteration);

// Highest vote count; ties go to the smallest retrieval rank.
std::string select_prediction(const VoteTally& tally, std::span<const Candidate> candidates);

struct RoundTrace {
  std::size_t round = 0;
  std::vector<GroupOutcome> groups;
  std::optional<GroupOutcome> final_call;  // EqThreeSingle with more than one group
  std::vector<std::string> voted;          // ids receiving a vote this round
};

struct RerankTrace {
  std::string record_id;
  std::vector<Candidate> candidates;
  RerankConfig config;
  std::vector<RoundTrace> rounds;
  VoteTally tally;
  std::string predicted_tag_id;
  std::vector<FallbackEvent> fallback_events;
};

struct RerankResult {
  std::string predicted_tag_id;
  RerankTrace trace;
};

// Generator seed for one round of one record; independent of scheduling.
std::uint64_t round_seed(std::uint64_t config_seed, std::string_view record_id, std::size_t round);

RerankResult rerank_record(std::string_view record_id, const RankContext& ctx, std::span<const Candidate> candidates,
                           const RerankConfig& config, Ranker& ranker);

}  // namespace tagrec
