#include "onco/config.hpp"

#include <set>

#include <json.hpp>

#include "onco/errors.hpp"
#include "onco/io.hpp"

namespace onco {

using nlohmann::json;

namespace {

void reject_unknown(const json& object, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& [key, _] : object.items())
    if (!known.count(key))
      throw config_error("unknown config key '" + key + "' in " + where);
}

}  // namespace

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw config_error("config parse failure: " + std::string(e.what()));
  }
  if (!doc.is_object()) throw config_error("config must be a JSON object");
  reject_unknown(doc,
                 {"corpus", "registry", "query_sets", "index_cache", "output_dir", "embedder",
                  "llm", "chunking", "per_concept_k", "parallel_requests", "rng_seed"},
                 "top level");

  PipelineConfig config;
  auto path_of = [&](const char* key) -> std::optional<std::filesystem::path> {
    if (!doc.contains(key)) return std::nullopt;
    return std::filesystem::path(doc[key].get<std::string>());
  };
  config.corpus_path = path_of("corpus");
  config.registry_path = path_of("registry");
  config.query_sets_path = path_of("query_sets");
  config.index_cache_path = path_of("index_cache");
  config.output_dir = path_of("output_dir");

  if (doc.contains("embedder")) {
    const json& e = doc["embedder"];
    reject_unknown(e, {"kind", "dim", "endpoint", "model_name", "batch_size",
                       "parallel_requests", "max_attempts", "backoff_initial_ms",
                       "timeout_seconds"},
                   "embedder");
    if (e.contains("kind")) {
      std::string kind = e["kind"].get<std::string>();
      if (kind == "local") config.embedder.kind = EmbedderSpec::Kind::local;
      else if (kind == "remote") config.embedder.kind = EmbedderSpec::Kind::remote;
      else throw config_error("embedder.kind must be local or remote");
    }
    if (e.contains("dim")) config.embedder.dim = e["dim"].get<size_t>();
    if (e.contains("endpoint")) config.embedder.endpoint = e["endpoint"].get<std::string>();
    if (e.contains("model_name"))
      config.embedder.model_name = e["model_name"].get<std::string>();
    if (e.contains("batch_size")) config.embedder.batch_size = e["batch_size"].get<size_t>();
    if (e.contains("parallel_requests"))
      config.embedder.parallel_requests = e["parallel_requests"].get<int>();
    if (e.contains("max_attempts")) config.embedder.max_attempts = e["max_attempts"].get<int>();
    if (e.contains("backoff_initial_ms"))
      config.embedder.backoff_initial_ms = e["backoff_initial_ms"].get<int>();
    if (e.contains("timeout_seconds"))
      config.embedder.timeout_seconds = e["timeout_seconds"].get<int>();
    config.embedder.validate();
  }

  if (doc.contains("llm")) {
    const json& l = doc["llm"];
    reject_unknown(l, {"endpoint", "model", "temperature", "max_retries", "timeout_seconds",
                       "backoff_initial_ms"},
                   "llm");
    if (l.contains("endpoint")) config.llm.endpoint = l["endpoint"].get<std::string>();
    if (l.contains("model")) config.llm.model = l["model"].get<std::string>();
    if (l.contains("temperature")) config.llm.temperature = l["temperature"].get<double>();
    if (l.contains("max_retries")) config.llm.max_retries = l["max_retries"].get<int>();
    if (l.contains("timeout_seconds"))
      config.llm.timeout_seconds = l["timeout_seconds"].get<int>();
    if (l.contains("backoff_initial_ms"))
      config.llm.backoff_initial_ms = l["backoff_initial_ms"].get<int>();
  }

  if (doc.contains("chunking")) {
    const json& c = doc["chunking"];
    reject_unknown(c, {"max_chunk_chars", "min_chunk_chars"}, "chunking");
    if (c.contains("max_chunk_chars"))
      config.chunking.max_chunk_chars = c["max_chunk_chars"].get<size_t>();
    if (c.contains("min_chunk_chars"))
      config.chunking.min_chunk_chars = c["min_chunk_chars"].get<size_t>();
    try {
      config.chunking.validate();
    } catch (const Error& e) {
      throw config_error(e.what());
    }
  }

  if (doc.contains("per_concept_k")) config.per_concept_k = doc["per_concept_k"].get<size_t>();
  if (doc.contains("parallel_requests"))
    config.parallel_requests = doc["parallel_requests"].get<int>();
  if (doc.contains("rng_seed")) config.rng_seed = doc["rng_seed"].get<uint64_t>();

  // Referenced input paths must exist up front.
  for (const auto& [name, p] :
       {std::pair<std::string, std::optional<std::filesystem::path>>{"corpus", config.corpus_path},
        {"registry", config.registry_path},
        {"query_sets", config.query_sets_path}}) {
    if (p && !std::filesystem::exists(*p))
      throw config_error("config path does not exist: " + name + " = " + p->string());
  }
  return config;
}

}  // namespace onco
