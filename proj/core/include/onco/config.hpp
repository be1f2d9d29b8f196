#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "onco/corpus.hpp"
#include "onco/embedding.hpp"
#include "onco/llm.hpp"

namespace onco {

// Shared pipeline configuration file (JSON). Unknown keys are rejected.
// Secrets never live here: API keys come from LLM_API_KEY / EMBED_API_KEY.
struct PipelineConfig {
  std::optional<std::filesystem::path> corpus_path;
  std::optional<std::filesystem::path> registry_path;
  std::optional<std::filesystem::path> query_sets_path;
  std::optional<std::filesystem::path> index_cache_path;
  std::optional<std::filesystem::path> output_dir;
  EmbedderSpec embedder;
  LlmSpec llm;
  ChunkingConfig chunking;
  size_t per_concept_k = 5000;
  int parallel_requests = 4;
  uint64_t rng_seed = 42;

  static PipelineConfig load(const std::filesystem::path& path);
};

}  // namespace onco
