#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "onco/concepts.hpp"
#include "onco/corpus.hpp"
#include "onco/evaluation.hpp"

namespace onco {

struct SynthSpec {
  size_t n_patients = 20;
  size_t notes_per_patient = 5;
  std::map<ConceptId, double> plant_rate;  // probability per concept per note
  double distractor_rate = 0.0;
  uint64_t rng_seed = 42;

  static SynthSpec uniform(size_t patients, size_t notes, double rate, double distractors,
                           uint64_t seed);
  void validate() const;
};

// One planted concept mention: note-relative byte span of the template
// sentence that carries it.
struct PlantedMention {
  std::string note_id;
  size_t start = 0;
  size_t end = 0;
  ConceptId concept_id = ConceptId::current_diagnosis;
  std::string text;
};

struct SynthResult {
  std::vector<PatientNote> notes;
  std::vector<PlantedMention> truth;
};

SynthResult generate_corpus(const SynthSpec& spec);

// Relevance by containment: (chunk, concept) is relevant iff a planted span
// for that concept lies within the chunk. A straddled or uncovered span is a
// chunker bug and a hard error.
std::vector<GoldAnnotation> truth_to_gold(const std::vector<PlantedMention>& truth,
                                          const std::vector<Chunk>& chunks);

void write_truth(const std::filesystem::path& path, const std::vector<PlantedMention>& truth);
std::vector<PlantedMention> read_truth(const std::filesystem::path& path);

// The per-concept template bank used for planting (single sentences).
const std::map<ConceptId, std::vector<std::string>>& synth_templates();
const std::vector<std::string>& synth_fillers();
const std::vector<std::string>& synth_distractors();

}  // namespace onco
