// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "tagrec/config.hpp"
#include "tagrec/errors.hpp"
#include "tagrec/eval.hpp"
#include "tagrec/oracle.hpp"
#include "tagrec/pipeline.hpp"
#include "tagrec/prompting.hpp"
#include "tagrec/rerank.hpp"
#include "tagrec/retrieval.hpp"
#include "tagrec/sim.hpp"
#include "tagrec/trace.hpp"

using namespace tagrec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::vector<float> random_row(Rng& rng, std::size_t dim, bool coarse) {
  std::vector<float> v(dim);
  for (auto& x : v) {
    x = coarse ? static_cast<float>(static_cast<int>(rng.below(3)) - 1) : static_cast<float>(rng.unit() * 2.0 - 1.0);
  }
  v[rng.below(dim)] = 1.0f + static_cast<float>(rng.below(2));
  return v;
}

Outcome retrieval_equivalence() {
  const auto start = Clock::now();
  Rng rng(1001);
  std::size_t mismatches = 0;
  for (int instance = 0; instance < 500; ++instance) {
    const std::size_t dim = 4 + rng.below(61);
    const std::size_t n = 1 + rng.below(200);
    // Every other instance draws from a {-1,0,1,2} grid so equal scores occur.
    const bool coarse = instance % 2 == 0;
    VectorIndex index(dim);
    for (std::size_t i = 0; i < n; ++i) index.add("T" + std::to_string(i), random_row(rng, dim, coarse));
    const EmbeddingVector query(random_row(rng, dim, coarse));
    const std::size_t k = 1 + rng.below(n);
    if (top_k(query, index, k) != testsupport::brute_force_top_k(query.values(), index, k)) ++mismatches;
  }
  const double secs = elapsed(start);
  return {mismatches == 0 && secs < 10.0, fmt("500 instances, %zu mismatches, %.2fs (limit 10s)", mismatches, secs)};
}

std::vector<Candidate> synthetic_candidates(const TaxonomyCorpus& corpus) {
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) out.push_back({corpus.at(i).tag_id, 1.0 - 0.01 * i, i + 1});
  return out;
}

Outcome vote_conservation() {
  const std::vector<std::string> oracles{"perfect", "noisy:0.3", "lexical", "position-biased", "position-biased:0.7",
                                         "identity-echo"};
  Rng rng(2002);
  std::size_t violations = 0;
  for (int run = 0; run < 1000; ++run) {
    RerankConfig cfg;
    cfg.top_k = 1 + rng.below(20);
    cfg.group_size = 1 + rng.below(cfg.top_k);
    cfg.iterations = 1 + rng.below(12);
    cfg.ordering = rng.below(2) ? Ordering::OrderShuffled : Ordering::OrderPreserving;
    cfg.seed = rng.next();
    const auto corpus = synthetic_corpus(cfg.top_k);
    const auto cands = synthetic_candidates(corpus);
    const auto& gold = corpus.at(rng.below(cfg.top_k));
    OracleRanker ranker(OracleSpec::parse(oracles[rng.below(oracles.size())], cfg.seed));
    RankContext ctx{gold.text, &corpus, std::string_view(gold.tag_id), nullptr};
    for (auto mode : {VoteMode::AlgorithmOne, VoteMode::EqThreeSingle}) {
      cfg.vote_mode = mode;
      const auto res = rerank_record("run-" + std::to_string(run), ctx, cands, cfg, ranker);
      const std::size_t expected =
          mode == VoteMode::AlgorithmOne ? cfg.iterations * ((cfg.top_k + cfg.group_size - 1) / cfg.group_size)
                                         : cfg.iterations;
      if (res.trace.tally.total_votes() != expected) ++violations;
    }
  }
  return {violations == 0, fmt("1000 runs x 2 vote modes, %zu violations", violations)};
}

RerankConfig standard_config(std::uint64_t seed) {
  RerankConfig cfg;
  cfg.top_k = 10;
  cfg.group_size = 5;
  cfg.iterations = 8;
  cfg.seed = seed;
  return cfg;
}

Outcome perfect_gold_votes() {
  const auto result = recovery_experiment(1000, standard_config(3003), OracleSpec::parse("perfect"));
  std::size_t off = 0;
  for (auto v : result.gold_votes_by_trial) off += v == 8 ? 0 : 1;
  return {off == 0 && result.n_trials == 1000, fmt("1000 runs, %zu with f(gold) != 8", off)};
}

Outcome perfect_recovery() {
  const auto start = Clock::now();
  const auto perfect = OracleSpec::parse("perfect");
  const auto r5 = recovery_experiment(1000, standard_config(4004), perfect);
  auto full = standard_config(4004);
  full.group_size = 10;
  const auto r10 = recovery_experiment(1000, full, perfect);
  const double secs = elapsed(start);
  return {r5.rate >= 0.98 && r10.rate == 1.0 && secs < 30.0,
          fmt("g=5: %.4f (>= 0.98), g=10: %.4f (== 1), %.2fs (limit 30s)", r5.rate, r10.rate, secs)};
}

Outcome iteration_monotonicity() {
  const auto perfect = OracleSpec::parse("perfect");
  std::vector<double> rates;
  for (std::size_t t : {1u, 2u, 4u, 8u}) {
    auto cfg = standard_config(5005);
    cfg.iterations = t;
    rates.push_back(recovery_experiment(1000, cfg, perfect).rate);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < rates.size(); ++i) monotone = monotone && rates[i] >= rates[i - 1];
  return {monotone, fmt("T=1,2,4,8: %.3f %.3f %.3f %.3f", rates[0], rates[1], rates[2], rates[3])};
}

Outcome ordering_direction() {
  const auto spec = OracleSpec::parse("position-biased:1.0", 6006);
  auto preserving = standard_config(6006);
  auto shuffled = preserving;
  shuffled.ordering = Ordering::OrderShuffled;
  const double p = recovery_experiment(1000, preserving, spec).rate;
  const double s = recovery_experiment(1000, shuffled, spec).rate;
  return {p >= s, fmt("position-biased:1.0, preserving %.3f vs shuffled %.3f", p, s)};
}

Outcome metrics_equivalence() {
  Rng rng(7007);
  double worst = 0.0;
  for (int set = 0; set < 200; ++set) {
    const std::size_t classes = 1 + rng.below(10);
    const std::size_t n = 1 + rng.below(100);
    std::vector<PredictionItem> items;
    for (std::size_t i = 0; i < n; ++i) {
      items.push_back({std::to_string(i), "C" + std::to_string(rng.below(classes)),
                       "C" + std::to_string(rng.below(classes + 2))});
    }
    const auto expected = testsupport::brute_force_macro(items);
    const auto got = macro_metrics(PredictionSet(items));
    worst = std::max({worst, std::abs(got.precision - expected.precision), std::abs(got.recall - expected.recall),
                      std::abs(got.f1 - expected.f1)});
  }
  const double fixture = macro_metrics(PredictionSet({{"1", "A", "A"}, {"2", "A", "A"}, {"3", "B", "A"}})).f1;
  return {worst <= 1e-12 && fixture == 0.4,
          fmt("200 sets, max |diff| %.3g (tol 1e-12), fixture macro_f1 %g%s", worst, fixture, fixture == 0.4 ? " (exact)" : " (inexact)")};
}

bool is_permutation_1n(const std::vector<std::size_t>& order, std::size_t n) {
  if (order.size() != n) return false;
  std::vector<bool> seen(n + 1, false);
  for (auto v : order) {
    if (v < 1 || v > n || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

Outcome parsing_robustness() {
  Rng rng(8008);
  std::size_t ok = 0, typed = 0, bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t n = 1 + rng.below(20);
    std::string raw;
    const std::size_t pieces = rng.below(40);
    for (std::size_t p = 0; p < pieces; ++p) {
      switch (rng.below(6)) {
        case 0: raw += "[" + std::to_string(rng.below(25)) + "]"; break;
        case 1: raw += " > "; break;
        case 2: raw += "[" + std::to_string(rng.next()) + std::to_string(rng.next()) + "]"; break;
        case 3: raw += "[-" + std::to_string(rng.below(5)) + "]"; break;
        case 4: raw += static_cast<char>(rng.below(256)); break;
        default: raw += "[[ ]]"[rng.below(5)]; break;
      }
    }
    try {
      const auto reply = parse_ranking_reply(raw, n);
      if (is_permutation_1n(reply.order, n)) {
        ++ok;
      } else {
        ++bad;
      }
    } catch (const UnparseableReply&) {
      ++typed;
    } catch (...) {
      ++bad;
    }
  }
  bool examples = parse_ranking_reply("[3] > [1] > [2]", 3).order == std::vector<std::size_t>{3, 1, 2} &&
                  parse_ranking_reply("The ranking: [2] > [2] > [1]", 3).order == std::vector<std::size_t>{2, 1, 3};
  try {
    parse_ranking_reply("no brackets here", 3);
    examples = false;
  } catch (const UnparseableReply&) {
  }
  return {bad == 0 && examples,
          fmt("10000 fuzzed: %zu permutations, %zu typed errors, %zu bad; repair examples %s", ok, typed, bad,
              examples ? "hold" : "FAIL")};
}

struct ReplayRun {
  std::string predictions;
  std::string traces;
  std::uint64_t requests = 0;
  std::uint64_t cache_hits = 0;
};

ReplayRun replay_once(const RunConfig& cfg, const TaxonomyCorpus& corpus, const std::vector<NumeralRecord>& records) {
  auto backends = make_backends(cfg, records);
  const auto index = VectorIndex::build(corpus, *backends.embedder, cfg.embed_batch);
  PipelineContext ctx;
  ctx.corpus = &corpus;
  ctx.records = records;
  ctx.index = &index;
  ctx.generator = backends.generator.get();
  ctx.embedder = backends.embedder.get();
  ctx.ranker = backends.ranker.get();
  ctx.instruction = cfg.instruction_text();
  ctx.workers = cfg.workers;
  const auto out = run_pipeline(ctx, cfg.rerank);
  if (!out.failures.empty()) throw Error("replay run had failures: " + out.failures[0].message);

  std::ostringstream p, t;
  write_predictions(p, out.predictions);
  write_traces(t, out.traces);
  ReplayRun run{p.str(), t.str(), 0, 0};
  for (const auto& s : {backends.generator->stats(), backends.embedder->stats(), backends.ranker->stats()}) {
    run.requests += s.requests;
    run.cache_hits += s.cache_hits;
  }
  return run;
}

Outcome determinism_and_replay() {
  testsupport::FakeOpenAI server;
  testsupport::TempDir dir("tagrec-accept");
  const auto corpus = testsupport::fixture_taxonomy();
  auto records = testsupport::fixture_dataset(corpus);
  for (auto& r : records) r.gen_tag_doc.reset();

  const std::string remote = ", \"base_url\": \"" + server.base_url() + "\"";
  const std::string text = "{\"cache_dir\": \"cache\","
                           " \"generator\": {\"kind\": \"openai:gen-model\"" + remote + "},"
                           " \"embedder\": {\"kind\": \"openai:embed-model\"" + remote + "},"
                           " \"ranker\": {\"kind\": \"openai:rank-model\"" + remote + "},"
                           " \"rerank\": {\"top_k\": 10, \"group_size\": 3, \"iterations\": 4, \"seed\": 9,"
                           " \"ordering\": \"order-shuffled\"}, \"concurrency\": {\"workers\": 3}}";
  const auto cfg = RunConfig::from_json_text(text, dir.path());

  const auto first = replay_once(cfg, corpus, records);
  const std::size_t remote_after_first = server.requests();
  const auto second = replay_once(cfg, corpus, records);
  const std::size_t remote_in_second = server.requests() - remote_after_first;

  testsupport::write_file(dir / "run1.predictions.jsonl", first.predictions);
  testsupport::write_file(dir / "run2.predictions.jsonl", second.predictions);
  const bool identical = first.predictions == second.predictions && first.traces == second.traces &&
                         testsupport::read_file(dir / "run1.predictions.jsonl") ==
                             testsupport::read_file(dir / "run2.predictions.jsonl");
  const bool warm = remote_in_second == 0 && second.cache_hits == second.requests && second.requests > 0;
  return {identical && warm && remote_after_first > 0,
          fmt("byte-identical %s; second run: %llu requests, %llu cache hits, %zu remote calls", identical ? "yes" : "no",
              static_cast<unsigned long long>(second.requests), static_cast<unsigned long long>(second.cache_hits),
              remote_in_second)};
}

Outcome end_to_end_fixture() {
  const auto corpus = testsupport::fixture_taxonomy();
  const auto records = testsupport::fixture_dataset(corpus);
  HashEmbedder embedder(256);
  const auto index = VectorIndex::build(corpus, embedder);
  FileBackedGenerator generator(records);
  OracleRanker ranker(OracleSpec::parse("perfect"));
  PipelineContext ctx;
  ctx.corpus = &corpus;
  ctx.records = records;
  ctx.index = &index;
  ctx.generator = &generator;
  ctx.embedder = &embedder;
  ctx.ranker = &ranker;
  ctx.instruction = std::string(kDefaultInstruction);
  ctx.expose_gold_to_ranker = true;
  const auto out = run_pipeline(ctx, RerankConfig{});
  const auto report = evaluate_predictions(out.predictions, records);
  return {corpus.size() == 10 && records.size() == 5 && report.n_records == 5 && report.hits_at_1 == 1.0 &&
              report.macro_f1 == 1.0,
          fmt("10 tags, 5 records: Hits@1 %.4f, macro_f1 %.4f", report.hits_at_1, report.macro_f1)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"retrieval equals exhaustive scan", retrieval_equivalence},
      {"vote conservation", vote_conservation},
      {"perfect-oracle gold votes", perfect_gold_votes},
      {"perfect-oracle recovery", perfect_recovery},
      {"iteration monotonicity", iteration_monotonicity},
      {"order-preserving >= order-shuffled", ordering_direction},
      {"macro metrics equal brute force", metrics_equivalence},
      {"reply parsing robustness", parsing_robustness},
      {"determinism and cache replay", determinism_and_replay},
      {"end-to-end fixture", end_to_end_fixture},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
