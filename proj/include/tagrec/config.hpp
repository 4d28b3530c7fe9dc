#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "tagrec/backends.hpp"
#include "tagrec/cache.hpp"
#include "tagrec/http_backends.hpp"
#include "tagrec/rerank.hpp"

namespace tagrec {

/// Backend selection. Shorthand forms accepted on the command line:
///   generator  file | openai:<model>
///   embedder   hash[:<dim>] | openai:<model>
///   ranker     oracle:<oracle spec> | openai:<model>
struct BackendSpec {
  std::string kind;     // "file", "hash", "oracle" or "openai"
  std::string oracle;   // oracle spec text, e.g. "noisy:0.3"
  std::optional<std::uint64_t> oracle_seed;  // defaults to the rerank seed
  std::size_t dim = 256;                     // hash embedder
  RemoteSettings remote;                     // openai-compatible services

  static BackendSpec parse(std::string_view role, std::string_view text);
  std::string describe() const;
};

struct RunConfig {
  std::filesystem::path taxonomy;
  std::filesystem::path dataset;
  std::filesystem::path index;
  std::filesystem::path cache_dir;
  std::filesystem::path trace_out;
  std::filesystem::path predictions_out = "predictions.jsonl";
  std::filesystem::path manifest_out;  // default: <predictions_out>.manifest.json
  std::optional<std::string> instruction;
  std::filesystem::path instruction_path;
  std::filesystem::path prompt_template_path;

  BackendSpec generator = BackendSpec::parse("generator", "file");
  BackendSpec embedder = BackendSpec::parse("embedder", "hash:256");
  BackendSpec ranker = BackendSpec::parse("ranker", "oracle:perfect");

  RerankConfig rerank;
  std::size_t workers = 1;
  std::size_t embed_batch = 32;

  // Relative paths in the file resolve against the file's directory.
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig from_json_text(std::string_view text, const std::filesystem::path& base_dir = {});

  std::string snapshot_json() const;
  std::string instruction_text() const;
  std::filesystem::path manifest_path() const;
};

// TAGREC_<NAME>_API_KEY and TAGREC_<NAME>_BASE_URL, NAME upper-cased with
// non-alphanumerics mapped to '_'.
std::string env_var_name(std::string_view backend_name, std::string_view suffix);
void apply_environment(RemoteSettings& settings);

extern const std::string_view kDefaultInstruction;

struct BackendSet {
  std::shared_ptr<ResponseCache> cache;
  std::unique_ptr<Generator> generator;
  std::unique_ptr<Embedder> embedder;
  std::unique_ptr<Ranker> ranker;
  bool ranker_is_oracle = false;
};

std::unique_ptr<Embedder> make_embedder(const BackendSpec& spec, std::shared_ptr<ResponseCache> cache);
BackendSet make_backends(const RunConfig& config, std::span<const NumeralRecord> records);

}  // namespace tagrec
