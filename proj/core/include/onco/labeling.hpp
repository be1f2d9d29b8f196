#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "onco/concepts.hpp"
#include "onco/corpus.hpp"
#include "onco/llm.hpp"
#include "onco/retrieval.hpp"

namespace onco {

enum class Provenance { raw, regex_filtered, self_verified };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

// Silver label for one (chunk, concept) pair. `provenance` records the last
// pipeline stage that set the label.
struct CotLabel {
  std::string chunk_id;
  ConceptId concept_id = ConceptId::current_diagnosis;
  std::string reasoning;
  std::vector<std::string> evidence_terms;
  bool label = false;
  Provenance provenance = Provenance::raw;
};

// Prompt text is data: templates are swappable without code changes.
// Placeholders: {concept_id} {concept_name} {definition} {chunk_id}
// {chunk_text} {matched_span}.
struct PromptTemplates {
  std::string label_template;
  std::string verify_template;

  static PromptTemplates defaults();
  static PromptTemplates load(const std::filesystem::path& dir);
};

// Structured-response contract the templates instruct the model to follow.
struct ParsedLabelResponse {
  std::string reasoning;
  std::vector<std::string> evidence_terms;
  bool label = false;
};
ParsedLabelResponse parse_label_response(const std::string& response);

CotLabel label_chunk(const Chunk& chunk, const ConceptDef& concept_def, LlmClient& llm,
                     const PromptTemplates& templates = PromptTemplates::defaults());

// False-positive guard: drops evidence terms not found verbatim in the chunk
// and flips unsupported positives to false. Never flips false to true.
CotLabel regex_filter(CotLabel label, const Chunk& chunk, const ConceptDef& concept_def);

// False-negative recovery: re-asks the LLM only for negatives whose chunk
// text matches a concept pattern. Never flips true to false.
CotLabel self_verify(CotLabel label, const Chunk& chunk, const ConceptDef& concept_def,
                     LlmClient& llm,
                     const PromptTemplates& templates = PromptTemplates::defaults());

// Full loop, checkpointed after every label so interrupted runs resume
// without re-querying completed pairs.
std::vector<CotLabel> run_labeling(const CandidateSet& candidates,
                                   const std::vector<Chunk>& chunks,
                                   const ConceptRegistry& registry, LlmClient& llm,
                                   const std::filesystem::path& checkpoint_path,
                                   const PromptTemplates& templates = PromptTemplates::defaults());

enum class TrainingMode { single_concept, multi_concept };

size_t emit_training_set(const std::vector<CotLabel>& labels, const std::vector<Chunk>& chunks,
                         TrainingMode mode, const std::filesystem::path& path);

void write_labels(const std::filesystem::path& path, const std::vector<CotLabel>& labels);
std::vector<CotLabel> read_labels(const std::filesystem::path& path);

// Matched substrings of any concept pattern in the text (case-insensitive).
std::vector<std::string> pattern_matches(const std::string& text, const ConceptDef& concept_def);

}  // namespace onco
