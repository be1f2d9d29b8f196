#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "onco/llm.hpp"

namespace onco {

// The 13 oncology retrieval concepts, in registry enumeration order.
enum class ConceptId {
  current_diagnosis,
  disease_status,
  tumor_characteristics,
  tumor_staging,
  combined_stage,
  treatment_outcomes,
  treatment_types,
  biomarkers_assessed,
  surgical_interventions,
  diagnostic_assessments,
  diagnosis_date,
  family_history,
  scores,
};

inline constexpr size_t kConceptCount = 13;

const std::array<ConceptId, kConceptCount>& all_concepts();
std::string to_string(ConceptId id);
std::optional<ConceptId> concept_from_string(const std::string& s);

struct ConceptDef {
  ConceptId id = ConceptId::current_diagnosis;
  std::string display_name;
  std::string definition;
  std::vector<std::string> patterns;      // case-insensitive regexes
  std::vector<std::string> seed_queries;  // non-empty
};

using ConceptRegistry = std::map<ConceptId, ConceptDef>;

// The shipped default registry (identical to data/registry.txt).
const ConceptRegistry& builtin_registry();

ConceptRegistry load_registry(const std::filesystem::path& path);
void save_registry(const ConceptRegistry& registry, const std::filesystem::path& path);
std::string registry_to_text(const ConceptRegistry& registry);

struct QuerySet {
  ConceptId concept_id = ConceptId::current_diagnosis;
  std::vector<std::string> queries;  // deduplicated case-insensitively, non-empty strings
};

// Deduplicates case-insensitively, preserving first occurrences.
std::vector<std::string> dedupe_queries(const std::vector<std::string>& queries);

QuerySet expand_queries(const ConceptDef& concept_def, LlmClient& llm, size_t count = 30);

std::map<ConceptId, QuerySet> static_query_sets(const ConceptRegistry& registry,
                                                const std::filesystem::path& path);

// Fallback query sets built from registry seed queries, used when no curated
// query-set file is supplied.
std::map<ConceptId, QuerySet> seed_query_sets(const ConceptRegistry& registry);

void write_query_sets(const std::filesystem::path& path,
                      const std::map<ConceptId, QuerySet>& sets);

}  // namespace onco
