#include "tagrec/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tagrec/errors.hpp"
#include "tagrec/oracle.hpp"

namespace tagrec {
namespace {

using json = nlohmann::ordered_json;

const std::string_view kInstruction =
    "Generate the XBRL tag document that describes the target numeral in the financial statement below.";

std::size_t parse_size(std::string_view text, std::string_view what) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(std::string(text), &used);
    if (used != text.size()) throw std::invalid_argument("trailing");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("invalid " + std::string(what) + " '" + std::string(text) + "'");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.empty() || path.is_absolute() || base.empty()) return path;
  return base / path;
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end() && !it->is_null()) out = it->get<T>();
}

void read_remote(const json& obj, RemoteSettings& s) {
  read_opt(obj, "name", s.name);
  read_opt(obj, "base_url", s.base_url);
  read_opt(obj, "path", s.path);
  read_opt(obj, "model", s.model_id);
  read_opt(obj, "temperature", s.temperature);
  read_opt(obj, "system_prompt", s.system_prompt);
  if (auto it = obj.find("max_tokens"); it != obj.end() && !it->is_null()) s.max_tokens = it->get<int>();
  if (auto it = obj.find("timeout_s"); it != obj.end()) s.timeout = std::chrono::seconds(it->get<long>());
  if (auto it = obj.find("retry"); it != obj.end()) {
    read_opt(*it, "max_attempts", s.retry.max_attempts);
    if (auto d = it->find("base_delay_ms"); d != it->end()) s.retry.base_delay = std::chrono::milliseconds(d->get<long>());
    if (auto d = it->find("max_delay_ms"); d != it->end()) s.retry.max_delay = std::chrono::milliseconds(d->get<long>());
    read_opt(*it, "multiplier", s.retry.multiplier);
  }
  if (auto it = obj.find("rate"); it != obj.end()) {
    read_opt(*it, "max_in_flight", s.rate.max_in_flight);
    if (auto d = it->find("min_interval_ms"); d != it->end()) {
      s.rate.min_interval = std::chrono::milliseconds(d->get<long>());
    }
  }
}

BackendSpec read_backend(std::string_view role, const json& value) {
  if (value.is_string()) return BackendSpec::parse(role, value.get<std::string>());
  if (!value.is_object()) throw ConfigError(std::string(role) + ": expected a string or an object");
  BackendSpec spec = BackendSpec::parse(role, value.value("kind", std::string()));
  read_opt(value, "oracle", spec.oracle);
  if (auto it = value.find("seed"); it != value.end() && !it->is_null()) spec.oracle_seed = it->get<std::uint64_t>();
  read_opt(value, "dim", spec.dim);
  read_remote(value, spec.remote);
  if (spec.kind == "oracle") OracleSpec::parse(spec.oracle);
  return spec;
}

json backend_json(const BackendSpec& spec) {
  json obj;
  obj["kind"] = spec.kind;
  if (spec.kind == "oracle") {
    obj["oracle"] = spec.oracle;
    obj["seed"] = spec.oracle_seed ? json(*spec.oracle_seed) : json(nullptr);
  } else if (spec.kind == "hash") {
    obj["dim"] = spec.dim;
  } else if (spec.kind == "openai") {
    const auto& s = spec.remote;
    obj["name"] = s.name;
    obj["base_url"] = s.base_url;
    obj["path"] = s.path;
    obj["model"] = s.model_id;
    obj["temperature"] = s.temperature;
    obj["max_tokens"] = s.max_tokens ? json(*s.max_tokens) : json(nullptr);
    obj["system_prompt"] = s.system_prompt;
    obj["timeout_s"] = s.timeout.count();
    obj["retry"] = {{"max_attempts", s.retry.max_attempts},
                    {"base_delay_ms", s.retry.base_delay.count()},
                    {"max_delay_ms", s.retry.max_delay.count()},
                    {"multiplier", s.retry.multiplier}};
    obj["rate"] = {{"max_in_flight", s.rate.max_in_flight}, {"min_interval_ms", s.rate.min_interval.count()}};
  }
  return obj;
}

}  // namespace

const std::string_view kDefaultInstruction = kInstruction;

BackendSpec BackendSpec::parse(std::string_view role, std::string_view text) {
  BackendSpec spec;
  const auto colon = text.find(':');
  spec.kind = std::string(text.substr(0, colon));
  const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);

  if (spec.kind == "file") {
    if (role != "generator") throw ConfigError("'file' backend is only available as a generator");
  } else if (spec.kind == "hash") {
    if (role != "embedder") throw ConfigError("'hash' backend is only available as an embedder");
    if (!arg.empty()) spec.dim = parse_size(arg, "hash embedder dim");
    if (spec.dim == 0) throw ConfigError("hash embedder dim must be positive");
  } else if (spec.kind == "oracle") {
    if (role != "ranker") throw ConfigError("'oracle' backend is only available as a ranker");
    spec.oracle = arg.empty() ? "perfect" : std::string(arg);
    OracleSpec::parse(spec.oracle);
  } else if (spec.kind == "openai") {
    spec.remote.model_id = std::string(arg);
    if (role == "embedder") spec.remote.path = "/v1/embeddings";
    if (role == "ranker") spec.remote.max_tokens = 64;
  } else {
    throw ConfigError("unknown " + std::string(role) + " backend '" + std::string(text) + "'");
  }
  return spec;
}

std::string BackendSpec::describe() const {
  if (kind == "hash") return "hash:" + std::to_string(dim);
  if (kind == "oracle") return "oracle:" + oracle;
  if (kind == "openai") return remote.name + ":" + remote.model_id;
  return kind;
}

RunConfig RunConfig::from_json_text(std::string_view text, const std::filesystem::path& base_dir) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (!obj.is_object()) throw ConfigError("config must be a JSON object");

  RunConfig cfg;
  try {
    auto path_field = [&](const char* key, std::filesystem::path& out) {
      if (auto it = obj.find(key); it != obj.end() && !it->is_null()) out = resolve(base_dir, it->get<std::string>());
    };
    path_field("taxonomy", cfg.taxonomy);
    path_field("dataset", cfg.dataset);
    path_field("index", cfg.index);
    path_field("cache_dir", cfg.cache_dir);
    path_field("trace_out", cfg.trace_out);
    path_field("predictions_out", cfg.predictions_out);
    path_field("manifest_out", cfg.manifest_out);
    path_field("instruction_path", cfg.instruction_path);
    path_field("prompt_template", cfg.prompt_template_path);
    if (auto it = obj.find("instruction"); it != obj.end() && !it->is_null()) cfg.instruction = it->get<std::string>();

    if (auto it = obj.find("generator"); it != obj.end()) cfg.generator = read_backend("generator", *it);
    if (auto it = obj.find("embedder"); it != obj.end()) cfg.embedder = read_backend("embedder", *it);
    if (auto it = obj.find("ranker"); it != obj.end()) cfg.ranker = read_backend("ranker", *it);

    if (auto it = obj.find("rerank"); it != obj.end()) {
      const auto& r = *it;
      read_opt(r, "top_k", cfg.rerank.top_k);
      read_opt(r, "group_size", cfg.rerank.group_size);
      read_opt(r, "iterations", cfg.rerank.iterations);
      read_opt(r, "seed", cfg.rerank.seed);
      if (auto o = r.find("ordering"); o != r.end()) cfg.rerank.ordering = parse_ordering(o->get<std::string>());
      if (auto v = r.find("vote_mode"); v != r.end()) cfg.rerank.vote_mode = parse_vote_mode(v->get<std::string>());
    }
    if (auto it = obj.find("concurrency"); it != obj.end()) {
      read_opt(*it, "workers", cfg.workers);
      read_opt(*it, "embed_batch", cfg.embed_batch);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str(), path.parent_path());
}

std::string RunConfig::instruction_text() const {
  if (instruction) return *instruction;
  if (!instruction_path.empty()) {
    std::ifstream in(instruction_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open instruction file " + instruction_path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text;
  }
  return std::string(kDefaultInstruction);
}

std::filesystem::path RunConfig::manifest_path() const {
  if (!manifest_out.empty()) return manifest_out;
  return std::filesystem::path(predictions_out.string() + ".manifest.json");
}

std::string RunConfig::snapshot_json() const {
  json obj;
  obj["taxonomy"] = taxonomy.string();
  obj["dataset"] = dataset.string();
  obj["index"] = index.string();
  obj["cache_dir"] = cache_dir.string();
  obj["trace_out"] = trace_out.string();
  obj["predictions_out"] = predictions_out.string();
  obj["instruction"] = instruction_text();
  obj["prompt_template"] = prompt_template_path.string();
  obj["generator"] = backend_json(generator);
  obj["embedder"] = backend_json(embedder);
  obj["ranker"] = backend_json(ranker);
  obj["rerank"] = {{"top_k", rerank.top_k},
                   {"group_size", rerank.group_size},
                   {"iterations", rerank.iterations},
                   {"ordering", to_string(rerank.ordering)},
                   {"vote_mode", to_string(rerank.vote_mode)},
                   {"seed", rerank.seed}};
  obj["concurrency"] = {{"workers", workers}, {"embed_batch", embed_batch}};
  return obj.dump(2);
}

std::string env_var_name(std::string_view backend_name, std::string_view suffix) {
  std::string name = "TAGREC_";
  for (char c : backend_name) {
    name.push_back(std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
                                                                : '_');
  }
  name.push_back('_');
  name.append(suffix);
  return name;
}

void apply_environment(RemoteSettings& settings) {
  if (const char* key = std::getenv(env_var_name(settings.name, "API_KEY").c_str()); key && *key) {
    settings.api_key = key;
  }
  if (const char* url = std::getenv(env_var_name(settings.name, "BASE_URL").c_str()); url && *url) {
    settings.base_url = url;
  }
}

std::unique_ptr<Embedder> make_embedder(const BackendSpec& spec, std::shared_ptr<ResponseCache> cache) {
  if (spec.kind == "hash") return std::make_unique<HashEmbedder>(spec.dim);
  if (spec.kind == "openai") {
    RemoteSettings s = spec.remote;
    apply_environment(s);
    return std::make_unique<RemoteEmbedder>(std::move(s), std::move(cache));
  }
  throw ConfigError("unsupported embedder '" + spec.describe() + "'");
}

BackendSet make_backends(const RunConfig& config, std::span<const NumeralRecord> records) {
  BackendSet set;
  if (!config.cache_dir.empty()) set.cache = std::make_shared<ResponseCache>(config.cache_dir);

  if (config.generator.kind == "file") {
    set.generator = std::make_unique<FileBackedGenerator>(records);
  } else if (config.generator.kind == "openai") {
    RemoteSettings s = config.generator.remote;
    apply_environment(s);
    set.generator = std::make_unique<RemoteChatGenerator>(std::move(s), set.cache);
  } else {
    throw ConfigError("unsupported generator '" + config.generator.describe() + "'");
  }

  set.embedder = make_embedder(config.embedder, set.cache);

  if (config.ranker.kind == "oracle") {
    set.ranker = std::make_unique<OracleRanker>(
        OracleSpec::parse(config.ranker.oracle, config.ranker.oracle_seed.value_or(config.rerank.seed)));
    set.ranker_is_oracle = true;
  } else if (config.ranker.kind == "openai") {
    RemoteSettings s = config.ranker.remote;
    apply_environment(s);
    set.ranker = std::make_unique<RemoteChatRanker>(std::move(s), set.cache);
  } else {
    throw ConfigError("unsupported ranker '" + config.ranker.describe() + "'");
  }
  return set;
}

}  // namespace tagrec
