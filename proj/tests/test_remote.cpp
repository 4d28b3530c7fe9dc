#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "tagrec/cache.hpp"
#include "tagrec/config.hpp"
#include "tagrec/errors.hpp"
#include "tagrec/http_backends.hpp"
#include "tagrec/oracle.hpp"
#include "tagrec/pipeline.hpp"
#include "tagrec/sweep.hpp"

using namespace tagrec;
using namespace std::chrono_literals;

namespace {

RemoteSettings settings_for(const testsupport::FakeOpenAI& server, const std::string& path = "/v1/chat/completions") {
  RemoteSettings s;
  s.base_url = server.base_url();
  s.path = path;
  s.model_id = "fake-model";
  s.api_key = "sk-test";
  s.timeout = 5s;
  return s;
}

Sleeper recording_sleeper(std::vector<std::chrono::milliseconds>& delays) {
  return [&delays](std::chrono::milliseconds d) { delays.push_back(d); };
}

}  // namespace

TEST_CASE("sha256 and request keys") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  BackendRequest a{RequestKind::Rank, "prompt", "m", {{"temperature", "0"}}};
  BackendRequest b = a;
  CHECK(a.cache_key() == b.cache_key());
  b.model_id = "other";
  CHECK(a.cache_key() != b.cache_key());
  b = a;
  b.params[0].second = "0.5";
  CHECK(a.cache_key() != b.cache_key());
  b = a;
  b.kind = RequestKind::Generate;
  CHECK(a.cache_key() != b.cache_key());
  CHECK(ResponseCache::well_formed_key(a.cache_key()));
  CHECK_FALSE(ResponseCache::well_formed_key("../../etc/passwd"));
}

TEST_CASE("cache put is idempotent and detects conflicts") {
  testsupport::TempDir dir;
  ResponseCache cache(dir.path());
  const std::string key = sha256_hex("k");
  CHECK_FALSE(cache.get(key).has_value());
  cache.put({key, "[1] > [2]", utc_timestamp(), "test"});
  cache.put({key, "[1] > [2]", utc_timestamp(), "test"});
  CHECK_THROWS_AS(cache.put({key, "[2] > [1]", utc_timestamp(), "test"}), CacheConflict);
  const auto hit = cache.get(key);
  REQUIRE(hit.has_value());
  CHECK(hit->response == "[1] > [2]");
  const auto stats = cache.stats();
  CHECK(stats.hits >= 1);
  CHECK(stats.writes == 1);
  CHECK(cache.usage().entries == 1);
  CHECK(std::filesystem::exists(dir.path() / key.substr(0, 2) / key.substr(2, 2) / (key + ".json")));
  CHECK(cache.clear() == 1);
  CHECK(cache.usage().entries == 0);
  CHECK_THROWS_AS(cache.get("nothex"), std::invalid_argument);
}

TEST_CASE("concurrent writers of the same entry agree") {
  testsupport::TempDir dir;
  ResponseCache cache(dir.path());
  const std::string key = sha256_hex("shared");
  std::atomic<int> errors{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      try {
        for (int i = 0; i < 20; ++i) cache.put({key, "same", "ts", "b"});
      } catch (...) {
        ++errors;
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(errors == 0);
  CHECK(cache.usage().entries == 1);
}

TEST_CASE("retry policy delays") {
  RetryPolicy p;
  CHECK(p.delay_for(1) == 500ms);
  CHECK(p.delay_for(2) == 1000ms);
  CHECK(p.delay_for(3) == 2000ms);
  CHECK(p.delay_for(20) == 20000ms);
}

TEST_CASE("rate limiter bounds in-flight requests") {
  RateLimiter limiter({2, 0ms});
  std::atomic<int> current{0}, peak{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 6; ++t) {
    threads.emplace_back([&] {
      auto permit = limiter.acquire();
      const int now = ++current;
      int prev = peak.load();
      while (now > prev && !peak.compare_exchange_weak(prev, now)) {
      }
      std::this_thread::sleep_for(10ms);
      --current;
    });
  }
  for (auto& t : threads) t.join();
  CHECK(peak.load() <= 2);
  CHECK(limiter.in_flight() == 0);
}

TEST_CASE("chat request and reply bodies") {
  RemoteSettings s;
  s.model_id = "m";
  s.system_prompt = "sys";
  s.max_tokens = 64;
  const auto body = nlohmann::json::parse(chat_request_body(s, "hello"));
  CHECK(body["model"] == "m");
  CHECK(body["messages"].size() == 2);
  CHECK(body["messages"][1]["content"] == "hello");
  CHECK(body["max_tokens"] == 64);
  CHECK(chat_reply_content(R"({"choices":[{"message":{"content":"[1]"}}]})") == "[1]");
  CHECK_THROWS_AS(chat_reply_content(R"({"choices":[]})"), BackendError);
  CHECK_THROWS_AS(chat_reply_content("not json"), BackendError);
}

TEST_CASE("remote ranker retries transient failures then caches") {
  testsupport::FakeOpenAI server;
  testsupport::TempDir dir;
  auto cache = std::make_shared<ResponseCache>(dir.path());
  std::vector<std::chrono::milliseconds> delays;
  RemoteChatRanker ranker(settings_for(server), cache, recording_sleeper(delays));
  server.fail_next(503);
  server.fail_next(429);
  const std::string prompt = "Candidate documents:\n[1] beta\n[2] alpha\n";
  RankRequest req{prompt, "g", {}, std::nullopt, 0};
  const auto reply = ranker.rank_listwise(req);
  CHECK(!reply.empty());
  CHECK(server.requests() == 3);
  CHECK(delays == std::vector<std::chrono::milliseconds>{500ms, 1000ms});
  CHECK(server.last_authorization() == "Bearer sk-test");

  CHECK(ranker.rank_listwise(req) == reply);
  CHECK(server.requests() == 3);
  const auto stats = ranker.stats();
  CHECK(stats.requests == 2);
  CHECK(stats.cache_hits == 1);
  CHECK(stats.retries == 2);
  CHECK(stats.remote_calls == 3);
}

TEST_CASE("remote errors are typed") {
  testsupport::FakeOpenAI server;
  std::vector<std::chrono::milliseconds> delays;
  RemoteChatGenerator gen(settings_for(server), nullptr, recording_sleeper(delays));
  server.fail_next(401);
  CHECK_THROWS_AS(gen.generate({"r", "prompt"}), AuthError);
  server.fail_next(400);
  try {
    gen.generate({"r", "prompt"});
    FAIL("expected an error");
  } catch (const BackendError& e) {
    CHECK_FALSE(e.transient());
    CHECK(e.status() == 400);
  }
  server.fail_next(500, 5);
  try {
    gen.generate({"r", "prompt"});
    FAIL("expected an error");
  } catch (const BackendError& e) {
    CHECK(e.transient());
  }
  CHECK(gen.generate({"r", "a\nquestion"}) == "generated: question");

  RemoteSettings dead = settings_for(server);
  dead.base_url = "http://127.0.0.1:1";
  dead.retry.max_attempts = 2;
  RemoteChatGenerator unreachable(dead, nullptr, recording_sleeper(delays));
  CHECK_THROWS_AS(unreachable.generate({"r", "p"}), BackendError);
}

TEST_CASE("remote embedder honours the index field and caches") {
  testsupport::FakeOpenAI server;
  testsupport::TempDir dir;
  auto cache = std::make_shared<ResponseCache>(dir.path());
  RemoteEmbedder embedder(settings_for(server, "/v1/embeddings"), cache);
  const std::vector<std::string> texts{"cash held", "goodwill impairment", "tax"};
  const auto remote = embedder.embed_batch(texts);
  HashEmbedder local(16);
  CHECK(remote == local.embed_batch(texts));
  const auto again = embedder.embed_batch(texts);
  CHECK(again == remote);
  CHECK(server.requests() == 1);
  CHECK(embedder.stats().cache_hits == 1);
}

TEST_CASE("config file parsing and precedence inputs") {
  testsupport::TempDir dir;
  testsupport::write_file(dir / "cfg.json", R"({
    "taxonomy": "tax.jsonl",
    "dataset": "/abs/data.jsonl",
    "ranker": {"kind": "oracle", "oracle": "noisy:0.2", "seed": 4},
    "embedder": "hash:64",
    "generator": {"kind": "openai", "model": "gpt-x", "base_url": "http://localhost:9"},
    "rerank": {"top_k": 8, "group_size": 4, "iterations": 3, "ordering": "order-shuffled",
               "vote_mode": "eq-three-single", "seed": 12},
    "concurrency": {"workers": 3}
  })");
  const auto cfg = RunConfig::load(dir / "cfg.json");
  CHECK(cfg.taxonomy == dir / "tax.jsonl");
  CHECK(cfg.dataset == "/abs/data.jsonl");
  CHECK(cfg.ranker.oracle == "noisy:0.2");
  CHECK(cfg.ranker.oracle_seed == 4u);
  CHECK(cfg.embedder.dim == 64);
  CHECK(cfg.generator.remote.model_id == "gpt-x");
  CHECK(cfg.generator.remote.base_url == "http://localhost:9");
  CHECK(cfg.rerank.top_k == 8);
  CHECK(cfg.rerank.ordering == Ordering::OrderShuffled);
  CHECK(cfg.rerank.vote_mode == VoteMode::EqThreeSingle);
  CHECK(cfg.workers == 3);
  CHECK(cfg.instruction_text() == kDefaultInstruction);
  CHECK(nlohmann::json::parse(cfg.snapshot_json())["rerank"]["seed"] == 12);

  CHECK_THROWS_AS(RunConfig::from_json_text("{"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_text(R"({"rerank": {"ordering": "up"}})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_text(R"({"ranker": "oracle:noisy"})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::load(dir / "missing.json"), ConfigError);
}

TEST_CASE("environment names and overrides") {
  CHECK(env_var_name("openai", "API_KEY") == "TAGREC_OPENAI_API_KEY");
  CHECK(env_var_name("my-llm.v2", "BASE_URL") == "TAGREC_MY_LLM_V2_BASE_URL");
  ::setenv("TAGREC_UNITTEST_API_KEY", "secret", 1);
  RemoteSettings s;
  s.name = "unittest";
  apply_environment(s);
  CHECK(s.api_key == std::optional<std::string>("secret"));
  ::unsetenv("TAGREC_UNITTEST_API_KEY");
}

TEST_CASE("pipeline end to end with offline backends") {
  const auto corpus = testsupport::fixture_taxonomy();
  auto records = testsupport::fixture_dataset(corpus);
  records[2].gen_tag_doc.reset();

  HashEmbedder embedder(64);
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
  ctx.workers = 4;
  ctx.expose_gold_to_ranker = true;

  const auto out = run_pipeline(ctx, RerankConfig{});
  REQUIRE(out.failures.size() == 1);
  CHECK(out.failures[0].record_id == "rec-3");
  CHECK(out.failures[0].stage == "generate");
  REQUIRE(out.predictions.size() == 4);
  for (const auto& p : out.predictions) {
    CHECK(p.predicted_tag_id == *p.gold_tag_id);
    CHECK(p.gold_in_top_k);
  }
  CHECK(std::is_sorted(out.predictions.begin(), out.predictions.end(),
                       [](const Prediction& a, const Prediction& b) { return a.record_id < b.record_id; }));

  ctx.workers = 1;
  const auto serial = run_pipeline(ctx, RerankConfig{});
  REQUIRE(serial.traces.size() == out.traces.size());
  for (std::size_t i = 0; i < serial.predictions.size(); ++i) {
    CHECK(serial.predictions[i].votes == out.predictions[i].votes);
  }

  const std::vector<std::string> values{"1", "2", "4", "20"};
  const auto table = sweep(ctx, RerankConfig{}, SweepAxis::Iterations, values);
  REQUIRE(table.cells.size() == 4);
  CHECK(table.cells[0].report->hits_at_1 == 1.0);
  CHECK(table.cells[3].label == "1-20 iters");
  CHECK(table.to_text().find("Iteration Range") != std::string::npos);

  TaxonomyCorpus other(std::vector<TagDocument>{{"X", "unrelated"}});
  ctx.corpus = &other;
  CHECK_THROWS_AS(run_pipeline(ctx, RerankConfig{}), ConfigError);
}

TEST_CASE("pipeline aborts on authentication failure") {
  testsupport::FakeOpenAI server;
  const auto corpus = testsupport::fixture_taxonomy();
  const auto records = testsupport::fixture_dataset(corpus);
  HashEmbedder embedder(32);
  const auto index = VectorIndex::build(corpus, embedder);
  RemoteChatGenerator generator(settings_for(server), nullptr);
  OracleRanker ranker(OracleSpec::parse("identity-echo"));
  PipelineContext ctx;
  ctx.corpus = &corpus;
  ctx.records = records;
  ctx.index = &index;
  ctx.generator = &generator;
  ctx.embedder = &embedder;
  ctx.ranker = &ranker;
  ctx.instruction = "Describe the numeral.";
  server.fail_next(401, 100);
  CHECK_THROWS_AS(run_pipeline(ctx, RerankConfig{}), AuthError);
}
