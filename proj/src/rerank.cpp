#include "tagrec/rerank.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "tagrec/errors.hpp"

namespace tagrec {

std::string_view to_string(Ordering o) {
  return o == Ordering::OrderPreserving ? "order-preserving" : "order-shuffled";
}

std::string_view to_string(VoteMode m) {
  return m == VoteMode::AlgorithmOne ? "algorithm-one" : "eq-three-single";
}

Ordering parse_ordering(std::string_view text) {
  if (text == "order-preserving" || text == "preserving" || text == "OrderPreserving") return Ordering::OrderPreserving;
  if (text == "order-shuffled" || text == "shuffled" || text == "OrderShuffled") return Ordering::OrderShuffled;
  throw ConfigError("unknown ordering '" + std::string(text) + "' (expected order-preserving|order-shuffled)");
}

VoteMode parse_vote_mode(std::string_view text) {
  if (text == "algorithm-one" || text == "AlgorithmOne") return VoteMode::AlgorithmOne;
  if (text == "eq-three-single" || text == "EqThreeSingle") return VoteMode::EqThreeSingle;
  throw ConfigError("unknown vote mode '" + std::string(text) + "' (expected algorithm-one|eq-three-single)");
}

void RerankConfig::validate() const {
  if (top_k < 1) throw ConfigError("top_k must be at least 1");
  if (group_size < 1) throw ConfigError("group_size must be at least 1");
  if (group_size > top_k) {
    throw ConfigError("group_size " + std::to_string(group_size) + " exceeds top_k " + std::to_string(top_k));
  }
  if (iterations < 1) throw ConfigError("iterations must be at least 1");
}

GroupAssignment partition_into_groups(std::span<const Candidate> candidates, std::size_t group_size, Ordering ordering,
                                      Rng& rng) {
  if (group_size < 1) throw std::invalid_argument("partition_into_groups: group_size must be at least 1");
  if (candidates.empty()) throw std::invalid_argument("partition_into_groups: no candidates");

  std::vector<std::size_t> draw(candidates.size());
  std::iota(draw.begin(), draw.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(draw));

  GroupAssignment out;
  for (std::size_t begin = 0; begin < draw.size(); begin += group_size) {
    const std::size_t end = std::min(draw.size(), begin + group_size);
    std::vector<Candidate> group;
    group.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) group.push_back(candidates[draw[i]]);
    if (ordering == Ordering::OrderPreserving) {
      std::sort(group.begin(), group.end(),
                [](const Candidate& a, const Candidate& b) { return a.retrieval_rank < b.retrieval_rank; });
    }
    out.groups.push_back(std::move(group));
  }
  return out;
}

GroupOutcome rank_group(const RankContext& ctx, std::span<const Candidate> group, Ranker& ranker,
                        std::uint64_t call_seed) {
  if (group.empty()) throw std::invalid_argument("rank_group: empty group");
  if (ctx.corpus == nullptr) throw std::invalid_argument("rank_group: no corpus for candidate texts");

  GroupOutcome out;
  out.presented.reserve(group.size());
  for (const auto& c : group) out.presented.push_back(c.tag_id);

  if (group.size() == 1) {
    out.order = {1};
    out.winner = group.front().tag_id;
    return out;
  }

  std::vector<RankMember> members;
  std::vector<std::string_view> texts;
  members.reserve(group.size());
  texts.reserve(group.size());
  for (const auto& c : group) {
    const TagDocument* doc = ctx.corpus->find(c.tag_id);
    if (doc == nullptr) throw std::invalid_argument("rank_group: candidate '" + c.tag_id + "' not in corpus");
    members.push_back({doc->tag_id, doc->text, c.retrieval_rank});
    texts.emplace_back(doc->text);
  }
  const PromptTemplate& tpl = ctx.prompt != nullptr ? *ctx.prompt : PromptTemplate::builtin();
  const std::string prompt = build_rerank_prompt(ctx.gen_doc, texts, tpl);

  RankRequest request{prompt, ctx.gen_doc, members, ctx.gold_tag_id, call_seed};
  std::string reply = ranker.rank_listwise(request);
  try {
    auto parsed = parse_ranking_reply(reply, group.size());
    out.order = std::move(parsed.order);
    out.winner = group[out.order.front() - 1].tag_id;
  } catch (const UnparseableReply&) {
    out.order.resize(group.size());
    std::iota(out.order.begin(), out.order.end(), std::size_t{1});
    out.winner = group.front().tag_id;
    out.fallback = true;
  }
  out.reply = std::move(reply);
  return out;
}

std::size_t VoteTally::total_votes() const {
  std::size_t total = 0;
  for (const auto& [id, n] : counts) total += n;
  return total;
}

std::size_t VoteTally::count(const std::string& tag_id) const {
  auto it = counts.find(tag_id);
  return it == counts.end() ? 0 : it->second;
}

VoteTally tally_votes(std::span<const std::vector<std::string>> winners_per_iteration) {
  if (winners_per_iteration.empty()) throw std::invalid_argument("tally_votes: no iterations");
  VoteTally tally;
  tally.total_rounds = winners_per_iteration.size();
  for (const auto& round : winners_per_iteration) {
    for (const auto& id : round) ++tally.counts[id];
  }
  return tally;
}

std::string select_prediction(const VoteTally& tally, std::span<const Candidate> candidates) {
  if (tally.counts.empty()) throw std::invalid_argument("select_prediction: empty tally");
  const Candidate* best = nullptr;
  std::size_t best_votes = 0;
  for (const auto& [id, votes] : tally.counts) {
    auto it = std::find_if(candidates.begin(), candidates.end(), [&](const Candidate& c) { return c.tag_id == id; });
    if (it == candidates.end()) {
      throw std::invalid_argument("select_prediction: tallied id '" + id + "' is not a candidate");
    }
    if (best == nullptr || votes > best_votes ||
        (votes == best_votes && it->retrieval_rank < best->retrieval_rank)) {
      best = &*it;
      best_votes = votes;
    }
  }
  return best->tag_id;
}

std::uint64_t round_seed(std::uint64_t config_seed, std::string_view record_id, std::size_t round) {
  return mix_seed(mix_seed(config_seed, fnv1a64(record_id)), round);
}

RerankResult rerank_record(std::string_view record_id, const RankContext& ctx, std::span<const Candidate> candidates,
                           const RerankConfig& config, Ranker& ranker) {
  config.validate();
  if (candidates.size() != config.top_k) {
    throw std::invalid_argument("rerank_record: expected " + std::to_string(config.top_k) + " candidates, got " +
                                std::to_string(candidates.size()));
  }
  if (ctx.gen_doc.empty()) throw std::invalid_argument("rerank_record: empty generated document");

  RerankTrace trace;
  trace.record_id = std::string(record_id);
  trace.candidates.assign(candidates.begin(), candidates.end());
  trace.config = config;

  std::vector<std::vector<std::string>> voted;
  voted.reserve(config.iterations);

  for (std::size_t round = 1; round <= config.iterations; ++round) {
    const std::uint64_t seed = round_seed(config.seed, record_id, round);
    Rng rng(seed);
    auto assignment = partition_into_groups(candidates, config.group_size, config.ordering, rng);
    assignment.iteration = round;

    RoundTrace rt;
    rt.round = round;
    std::vector<Candidate> winners;
    for (std::size_t g = 0; g < assignment.groups.size(); ++g) {
      auto outcome = rank_group(ctx, assignment.groups[g], ranker, mix_seed(seed, g + 1));
      if (outcome.fallback) trace.fallback_events.push_back({round, g, "unparseable reply"});
      const auto& group = assignment.groups[g];
      winners.push_back(*std::find_if(group.begin(), group.end(),
                                      [&](const Candidate& c) { return c.tag_id == outcome.winner; }));
      rt.groups.push_back(std::move(outcome));
    }

    if (config.vote_mode == VoteMode::AlgorithmOne || winners.size() == 1) {
      for (const auto& w : winners) rt.voted.push_back(w.tag_id);
    } else {
      if (config.ordering == Ordering::OrderPreserving) {
        std::sort(winners.begin(), winners.end(),
                  [](const Candidate& a, const Candidate& b) { return a.retrieval_rank < b.retrieval_rank; });
      }
      const std::size_t final_index = assignment.groups.size();
      auto final_call = rank_group(ctx, winners, ranker, mix_seed(seed, final_index + 1));
      if (final_call.fallback) trace.fallback_events.push_back({round, final_index, "unparseable reply"});
      rt.voted.push_back(final_call.winner);
      rt.final_call = std::move(final_call);
    }
    voted.push_back(rt.voted);
    trace.rounds.push_back(std::move(rt));
  }

  trace.tally = tally_votes(voted);
  trace.predicted_tag_id = select_prediction(trace.tally, candidates);
  RerankResult result{trace.predicted_tag_id, std::move(trace)};
  return result;
}

}  // namespace tagrec
