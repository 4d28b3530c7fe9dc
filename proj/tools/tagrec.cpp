// tagrec: command-line driver for the numeral-to-XBRL-tag pipeline.
//
// Exit codes: 0 success, 1 systemic error (config, index, backend auth), 2 usage.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tagrec/config.hpp"
#include "tagrec/corpus.hpp"
#include "tagrec/errors.hpp"
#include "tagrec/eval.hpp"
#include "tagrec/pipeline.hpp"
#include "tagrec/retrieval.hpp"
#include "tagrec/sim.hpp"
#include "tagrec/sweep.hpp"
#include "tagrec/trace.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

/// Raw flag values; only flags given on the command line override the config.
struct Overrides {
  std::string config;
  std::string taxonomy, dataset, index, trace_out, cache_dir, out, manifest_out, prompt_template, instruction_path;
  std::optional<std::size_t> top_k, group_size, iterations, workers;
  std::optional<std::string> ordering, vote_mode, ranker, embedder, generator;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

void add_run_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON configuration file");
  cmd->add_option("--taxonomy", o.taxonomy, "Taxonomy JSON-Lines file");
  cmd->add_option("--dataset", o.dataset, "Dataset JSON-Lines file");
  cmd->add_option("--index", o.index, "Vector index file");
  cmd->add_option("--cache-dir", o.cache_dir, "Response cache directory");
  cmd->add_option("--embedder", o.embedder, "Embedder: hash[:dim] | openai:<model>");
  cmd->add_option("--workers", o.workers, "Record-level worker threads");
}

void add_rerank_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--top-k", o.top_k, "Candidates retrieved per record");
  cmd->add_option("--group-size", o.group_size, "Candidates per ranking group");
  cmd->add_option("--iterations", o.iterations, "Re-ranking rounds");
  cmd->add_option("--ordering", o.ordering, "order-preserving | order-shuffled");
  cmd->add_option("--vote-mode", o.vote_mode, "algorithm-one | eq-three-single");
  cmd->add_option("--seed", o.seed, "Partition seed");
  cmd->add_option("--ranker", o.ranker, "Ranker: oracle:<spec> | openai:<model>");
}

void add_pipeline_flags(CLI::App* cmd, Overrides& o) {
  add_run_flags(cmd, o);
  add_rerank_flags(cmd, o);
  cmd->add_option("--generator", o.generator, "Generator: file | openai:<model>");
  cmd->add_option("--trace-out", o.trace_out, "Write re-ranking traces (JSON-Lines)");
  cmd->add_option("--prompt-template", o.prompt_template, "Re-ranking prompt template file");
  cmd->add_option("--instruction-file", o.instruction_path, "Generation instruction prompt file");
}

tagrec::RunConfig resolve_config(const Overrides& o) {
  tagrec::RunConfig cfg = o.config.empty() ? tagrec::RunConfig{} : tagrec::RunConfig::load(o.config);
  if (!o.taxonomy.empty()) cfg.taxonomy = o.taxonomy;
  if (!o.dataset.empty()) cfg.dataset = o.dataset;
  if (!o.index.empty()) cfg.index = o.index;
  if (!o.cache_dir.empty()) cfg.cache_dir = o.cache_dir;
  if (!o.trace_out.empty()) cfg.trace_out = o.trace_out;
  if (!o.out.empty()) cfg.predictions_out = o.out;
  if (!o.manifest_out.empty()) cfg.manifest_out = o.manifest_out;
  if (!o.prompt_template.empty()) cfg.prompt_template_path = o.prompt_template;
  if (!o.instruction_path.empty()) {
    cfg.instruction_path = o.instruction_path;
    cfg.instruction.reset();
  }
  if (o.top_k) cfg.rerank.top_k = *o.top_k;
  if (o.group_size) cfg.rerank.group_size = *o.group_size;
  if (o.iterations) cfg.rerank.iterations = *o.iterations;
  if (o.ordering) cfg.rerank.ordering = tagrec::parse_ordering(*o.ordering);
  if (o.vote_mode) cfg.rerank.vote_mode = tagrec::parse_vote_mode(*o.vote_mode);
  if (o.seed) cfg.rerank.seed = *o.seed;
  if (o.workers) cfg.workers = *o.workers;
  if (o.ranker) cfg.ranker = tagrec::BackendSpec::parse("ranker", *o.ranker);
  if (o.embedder) cfg.embedder = tagrec::BackendSpec::parse("embedder", *o.embedder);
  if (o.generator) cfg.generator = tagrec::BackendSpec::parse("generator", *o.generator);
  cfg.rerank.validate();
  return cfg;
}

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw tagrec::ConfigError(std::string(what) + " path is not set");
  if (!fs::is_regular_file(path)) throw tagrec::ConfigError(std::string(what) + " not found: " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw tagrec::Error("cannot write " + path.string());
  out << text;
}

json stats_json(const tagrec::BackendStats& s) {
  return {{"requests", s.requests}, {"cache_hits", s.cache_hits}, {"remote_calls", s.remote_calls},
          {"retries", s.retries}};
}

int cmd_embed_index(const Overrides& o) {
  const auto cfg = resolve_config(o);
  require_file(cfg.taxonomy, "taxonomy");
  if (cfg.index.empty()) throw tagrec::ConfigError("index path is not set (--index)");
  if (fs::exists(cfg.index) && !o.force) {
    throw tagrec::ConfigError("index " + cfg.index.string() + " exists; pass --force to rebuild it");
  }
  const auto corpus = tagrec::load_taxonomy(cfg.taxonomy);
  std::shared_ptr<tagrec::ResponseCache> cache;
  if (!cfg.cache_dir.empty()) cache = std::make_shared<tagrec::ResponseCache>(cfg.cache_dir);
  auto embedder = tagrec::make_embedder(cfg.embedder, cache);
  const auto index = tagrec::VectorIndex::build(corpus, *embedder, cfg.embed_batch);
  if (cfg.index.has_parent_path()) fs::create_directories(cfg.index.parent_path());
  index.save(cfg.index);
  std::cout << "indexed " << index.size() << " tags, dim " << index.dim() << " -> " << cfg.index.string() << "\n";
  return 0;
}

struct LoadedRun {
  tagrec::RunConfig cfg;
  tagrec::TaxonomyCorpus corpus;
  std::vector<tagrec::NumeralRecord> records;
  std::optional<tagrec::VectorIndex> index;
  tagrec::BackendSet backends;
  std::optional<tagrec::PromptTemplate> prompt;
  std::string instruction;
  bool index_built = false;

  tagrec::PipelineContext context() const {
    tagrec::PipelineContext ctx;
    ctx.corpus = &corpus;
    ctx.records = records;
    ctx.index = &*index;
    ctx.generator = backends.generator.get();
    ctx.embedder = backends.embedder.get();
    ctx.ranker = backends.ranker.get();
    ctx.instruction = instruction;
    ctx.prompt = prompt ? &*prompt : &tagrec::PromptTemplate::builtin();
    ctx.workers = cfg.workers;
    ctx.expose_gold_to_ranker = backends.ranker_is_oracle;
    return ctx;
  }
};

LoadedRun load_run(const Overrides& o) {
  LoadedRun run;
  run.cfg = resolve_config(o);
  require_file(run.cfg.taxonomy, "taxonomy");
  require_file(run.cfg.dataset, "dataset");
  if (!run.cfg.prompt_template_path.empty()) require_file(run.cfg.prompt_template_path, "prompt template");
  run.instruction = run.cfg.instruction_text();
  if (!run.cfg.prompt_template_path.empty()) run.prompt = tagrec::PromptTemplate::from_file(run.cfg.prompt_template_path);

  run.corpus = tagrec::load_taxonomy(run.cfg.taxonomy);
  run.records = tagrec::load_dataset(run.cfg.dataset, &run.corpus);
  run.backends = tagrec::make_backends(run.cfg, run.records);

  if (!run.cfg.index.empty() && fs::exists(run.cfg.index)) {
    run.index = tagrec::VectorIndex::load(run.cfg.index);
    if (!run.index->matches(run.corpus)) {
      throw tagrec::ConfigError("index " + run.cfg.index.string() +
                                " does not match the taxonomy; rebuild it with embed-index --force");
    }
  } else {
    run.index = tagrec::VectorIndex::build(run.corpus, *run.backends.embedder, run.cfg.embed_batch);
    run.index_built = true;
    if (!run.cfg.index.empty()) run.index->save(run.cfg.index);
  }
  return run;
}

json manifest_json(const LoadedRun& run, const tagrec::RunOutput& out) {
  json m;
  m["tool"] = "tagrec";
  m["created_at"] = tagrec::utc_timestamp();
  m["config"] = json::parse(run.cfg.snapshot_json());
  m["seed"] = run.cfg.rerank.seed;
  m["prompt_template"] = run.prompt ? run.prompt->version() : tagrec::PromptTemplate::builtin().version();
  m["instruction"] = run.instruction;
  m["backends"] = {{"generator", run.backends.generator->id()},
                   {"embedder", run.backends.embedder->id()},
                   {"ranker", run.backends.ranker->id()}};
  m["backend_stats"] = {{"generator", stats_json(run.backends.generator->stats())},
                        {"embedder", stats_json(run.backends.embedder->stats())},
                        {"ranker", stats_json(run.backends.ranker->stats())}};
  if (run.backends.cache) {
    const auto s = run.backends.cache->stats();
    m["cache"] = {{"dir", run.backends.cache->root().string()}, {"hits", s.hits}, {"misses", s.misses},
                  {"writes", s.writes}};
  } else {
    m["cache"] = nullptr;
  }
  m["index"] = {{"path", run.cfg.index.string()}, {"entries", run.index->size()}, {"dim", run.index->dim()},
                {"built_this_run", run.index_built}};
  m["records"] = run.records.size();
  m["predicted"] = out.predictions.size();
  m["fallback_events"] = out.fallback_events;
  json failures = json::array();
  for (const auto& f : out.failures) {
    failures.push_back({{"record_id", f.record_id}, {"stage", f.stage}, {"message", f.message}});
  }
  m["failures"] = std::move(failures);
  return m;
}

int cmd_run(const Overrides& o) {
  auto run = load_run(o);
  const auto out = tagrec::run_pipeline(run.context(), run.cfg.rerank);

  std::ostringstream preds;
  tagrec::write_predictions(preds, out.predictions);
  write_text(run.cfg.predictions_out, preds.str());
  if (!run.cfg.trace_out.empty()) {
    std::ostringstream traces;
    tagrec::write_traces(traces, out.traces);
    write_text(run.cfg.trace_out, traces.str());
  }
  write_text(run.cfg.manifest_path(), manifest_json(run, out).dump(2) + "\n");

  for (const auto& f : out.failures) {
    std::cerr << "warning: record " << f.record_id << " failed at " << f.stage << ": " << f.message << "\n";
  }
  std::size_t correct = 0;
  std::size_t with_gold = 0;
  for (const auto& p : out.predictions) {
    if (!p.gold_tag_id) continue;
    ++with_gold;
    correct += p.predicted_tag_id == *p.gold_tag_id ? 1 : 0;
  }
  const auto rs = run.backends.ranker->stats();
  std::cout << "records=" << run.records.size() << " predicted=" << out.predictions.size()
            << " failed=" << out.failures.size() << " fallbacks=" << out.fallback_events << " correct=" << correct
            << "/" << with_gold << " ranker_requests=" << rs.requests << " ranker_cache_hits=" << rs.cache_hits
            << " ranker_remote_calls=" << rs.remote_calls << "\n";
  return 0;
}

int cmd_evaluate(const std::string& predictions_path, const std::string& dataset_path, const std::string& report_out) {
  require_file(predictions_path, "predictions");
  require_file(dataset_path, "dataset");
  const auto predictions = tagrec::load_predictions(predictions_path);
  if (predictions.empty()) throw tagrec::Error("predictions file " + predictions_path + " is empty");
  const auto dataset = tagrec::load_dataset(dataset_path);
  const auto report = tagrec::evaluate_predictions(predictions, dataset);

  const std::vector<tagrec::TableRow> rows{{"XBRLTagRec", report}};
  std::cout << tagrec::format_metrics_table("Method", rows, false);
  std::cout << "records=" << report.n_records << " classes=" << report.n_classes
            << " skipped_without_gold=" << report.skipped_without_gold
            << " missing_predictions=" << report.missing_predictions;
  if (report.gold_in_top_k_rate) std::cout << " gold_in_top_k=" << *report.gold_in_top_k_rate;
  std::cout << "\n";
  if (!report_out.empty()) write_text(report_out, tagrec::report_json(report) + "\n");
  return 0;
}

std::vector<std::string> split_values(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& item : raw) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (part.empty()) continue;
      const auto dots = part.find("..");
      if (dots != std::string::npos) {
        const auto lo = std::stoul(part.substr(0, dots));
        const auto hi = std::stoul(part.substr(dots + 2));
        for (auto v = lo; v <= hi; ++v) out.push_back(std::to_string(v));
      } else {
        out.push_back(part);
      }
    }
  }
  return out;
}

int cmd_sweep(const Overrides& o, const std::string& axis_text, const std::vector<std::string>& raw_values,
              const std::string& table_out, const std::string& text_out) {
  auto run = load_run(o);
  const auto axis = tagrec::parse_sweep_axis(axis_text);
  const auto values = split_values(raw_values);
  const auto table = tagrec::sweep(run.context(), run.cfg.rerank, axis, values);
  const std::string text = table.to_text();
  std::cout << text;
  if (!table_out.empty()) write_text(table_out, table.to_json() + "\n");
  if (!text_out.empty()) write_text(text_out, text);
  for (const auto& c : table.cells) {
    if (!c.report) std::cerr << "warning: cell " << c.value << " failed: " << c.error << "\n";
  }
  return 0;
}

int cmd_simulate(const Overrides& o, std::size_t trials, const std::string& out_path) {
  tagrec::RunConfig cfg = resolve_config(o);
  if (cfg.ranker.kind != "oracle") throw tagrec::ConfigError("simulate requires an oracle ranker (--ranker oracle:<spec>)");
  const auto spec = tagrec::OracleSpec::parse(cfg.ranker.oracle, cfg.ranker.oracle_seed.value_or(cfg.rerank.seed));
  const auto result = tagrec::recovery_experiment(trials, cfg.rerank, spec);

  json summary;
  summary["oracle"] = spec.to_string();
  summary["oracle_seed"] = spec.seed;
  summary["config"] = {{"top_k", cfg.rerank.top_k},
                       {"group_size", cfg.rerank.group_size},
                       {"iterations", cfg.rerank.iterations},
                       {"ordering", tagrec::to_string(cfg.rerank.ordering)},
                       {"vote_mode", tagrec::to_string(cfg.rerank.vote_mode)},
                       {"seed", cfg.rerank.seed}};
  summary["trials"] = result.n_trials;
  summary["recovered"] = result.recovered;
  summary["recovery_rate"] = result.rate;
  summary["mean_gold_votes"] = result.mean_gold_votes;
  summary["fallback_events"] = result.fallback_events;
  const std::string text = summary.dump(2) + "\n";
  std::cout << text;
  if (!out_path.empty()) write_text(out_path, text);
  return 0;
}

int cmd_cache(const Overrides& o, bool clear) {
  tagrec::RunConfig cfg = o.config.empty() ? tagrec::RunConfig{} : tagrec::RunConfig::load(o.config);
  if (!o.cache_dir.empty()) cfg.cache_dir = o.cache_dir;
  if (cfg.cache_dir.empty()) throw tagrec::ConfigError("cache directory is not set (--cache-dir)");
  tagrec::ResponseCache cache(cfg.cache_dir);
  if (clear) {
    std::cout << "removed " << cache.clear() << " entries from " << cfg.cache_dir.string() << "\n";
  } else {
    const auto u = cache.usage();
    std::cout << "cache " << cfg.cache_dir.string() << ": entries=" << u.entries << " bytes=" << u.bytes << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tagrec: match financial numerals to XBRL taxonomy tags"};
  app.require_subcommand(1);

  Overrides embed_o;
  auto* embed = app.add_subcommand("embed-index", "Embed the taxonomy and persist the vector index");
  add_run_flags(embed, embed_o);
  embed->add_flag("--force", embed_o.force, "Overwrite an existing index");

  Overrides run_o;
  auto* run = app.add_subcommand("run", "Generate, retrieve and re-rank every dataset record");
  add_pipeline_flags(run, run_o);
  run->add_option("--out", run_o.out, "Predictions output (JSON-Lines)");
  run->add_option("--manifest-out", run_o.manifest_out, "Run manifest (default <out>.manifest.json)");
  run->add_flag("--force", run_o.force, "Accepted for symmetry; outputs are always overwritten");

  std::string eval_predictions, eval_dataset, eval_report;
  Overrides eval_o;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against dataset gold tags");
  evaluate->add_option("--predictions", eval_predictions, "Predictions JSON-Lines")->required();
  evaluate->add_option("--dataset", eval_dataset, "Dataset JSON-Lines")->required();
  evaluate->add_option("--report-out", eval_report, "Write the report as JSON");

  Overrides sweep_o;
  std::string sweep_axis, sweep_table, sweep_text;
  std::vector<std::string> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Evaluate one re-ranking parameter over several values");
  add_pipeline_flags(sweep, sweep_o);
  sweep->add_option("--axis", sweep_axis, "iterations | group-size | ordering")->required();
  sweep->add_option("--values", sweep_values, "Values, comma separated; integer ranges as a..b")->required();
  sweep->add_option("--table-out", sweep_table, "Write the table as JSON");
  sweep->add_option("--text-out", sweep_text, "Write the aligned text table");

  Overrides sim_o;
  std::size_t sim_trials = 1000;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo gold recovery with an oracle ranker");
  simulate->add_option("--config", sim_o.config, "JSON configuration file");
  add_rerank_flags(simulate, sim_o);
  simulate->add_option("--trials", sim_trials, "Number of synthetic trials");
  simulate->add_option("--out", sim_out, "Write the JSON summary");

  Overrides cache_o;
  auto* cache = app.add_subcommand("cache", "Inspect or clear the response cache");
  cache->require_subcommand(1);
  auto* cache_stats = cache->add_subcommand("stats", "Count cached entries");
  auto* cache_clear = cache->add_subcommand("clear", "Remove all cached entries");
  for (auto* c : {cache_stats, cache_clear}) {
    c->add_option("--config", cache_o.config, "JSON configuration file");
    c->add_option("--cache-dir", cache_o.cache_dir, "Response cache directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*embed) return cmd_embed_index(embed_o);
    if (*run) return cmd_run(run_o);
    if (*evaluate) return cmd_evaluate(eval_predictions, eval_dataset, eval_report);
    if (*sweep) return cmd_sweep(sweep_o, sweep_axis, sweep_values, sweep_table, sweep_text);
    if (*simulate) return cmd_simulate(sim_o, sim_trials, sim_out);
    if (*cache) return cmd_cache(cache_o, cache_clear->parsed());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
