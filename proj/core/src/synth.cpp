#include "onco/synth.hpp"

#include <random>
#include <sstream>

#include <json.hpp>

#include "onco/errors.hpp"
#include "onco/io.hpp"

namespace onco {

using nlohmann::json;

SynthSpec SynthSpec::uniform(size_t patients, size_t notes, double rate, double distractors,
                             uint64_t seed) {
  SynthSpec spec;
  spec.n_patients = patients;
  spec.notes_per_patient = notes;
  for (ConceptId id : all_concepts()) spec.plant_rate[id] = rate;
  spec.distractor_rate = distractors;
  spec.rng_seed = seed;
  return spec;
}

void SynthSpec::validate() const {
  if (n_patients == 0) throw validation_error("synth: n_patients must be positive");
  if (notes_per_patient == 0) throw validation_error("synth: notes_per_patient must be positive");
  for (const auto& [id, rate] : plant_rate)
    if (rate < 0.0 || rate > 1.0)
      throw validation_error("synth: plant_rate out of [0,1] for " + to_string(id));
  if (distractor_rate < 0.0 || distractor_rate > 1.0)
    throw validation_error("synth: distractor_rate out of [0,1]");
}

const std::map<ConceptId, std::vector<std::string>>& synth_templates() {
  // Each template is one sentence that matches its own concept's registry
  // patterns and no other concept's (enforced by tests).
  static const std::map<ConceptId, std::vector<std::string>> bank = {
      {ConceptId::current_diagnosis,
       {"The patient was diagnosed with adenocarcinoma of the sigmoid colon.",
        "Confirmed diagnosis of invasive lobular breast cancer.",
        "Oncology consult confirmed diagnosis of squamous cell carcinoma of the tongue."}},
      {ConceptId::disease_status,
       {"Disease status: locally advanced, borderline resectable.",
        "Restaging showed metastatic disease involving the liver.",
        "The mass remains resectable per multidisciplinary review."}},
      {ConceptId::tumor_characteristics,
       {"Histology shows poorly differentiated ductal carcinoma measuring 2.3 cm.",
        "The tumor is moderately differentiated, grade 2.",
        "Histologic grade 3 with extensive necrosis."}},
      {ConceptId::tumor_staging,
       {"TNM assessment: T2N1M0.", "Pathologic classification T3N1M0 on final pathology.",
        "Clinical staging documented as stage IIb."}},
      {ConceptId::combined_stage,
       {"AJCC stage grouping: IIB.", "Overall stage group II per the eighth edition.",
        "AJCC anatomic stage grouping recorded as IIIA."}},
      {ConceptId::treatment_outcomes,
       {"Follow-up assessment demonstrates partial response to therapy.",
        "The patient achieved complete remission after cycle six.",
        "Evaluation shows stable disease on the current regimen."}},
      {ConceptId::treatment_types,
       {"Adjuvant chemotherapy with FOLFOX was initiated.",
        "The patient is receiving immunotherapy with pembrolizumab.",
        "Hormone therapy with letrozole continues."}},
      {ConceptId::biomarkers_assessed,
       {"Molecular testing detected a KRAS G12C mutation.",
        "HER2 immunohistochemistry returned 2+ with FISH amplification.",
        "PD-L1 expression measured at 45 percent."}},
      {ConceptId::surgical_interventions,
       {"The patient underwent laparoscopic sigmoid colectomy.",
        "Status post right upper lobectomy.",
        "Surgical resection of the primary lesion was completed."}},
      {ConceptId::diagnostic_assessments,
       {"CT of the chest and abdomen was obtained for workup.",
        "Core needle biopsy was performed under ultrasound guidance.",
        "PET imaging was completed for initial evaluation."}},
      {ConceptId::diagnosis_date,
       {"Date of diagnosis: 2018-03-14.", "First diagnosed on 2019-07-02 by pathology.",
        "Diagnosis date recorded as 2020-11-30 in the registry."}},
      {ConceptId::family_history,
       {"Family history: mother with breast cancer at age 54.",
        "Paternal grandfather had colon cancer.",
        "Family history is significant for ovarian cancer in a sister."}},
      {ConceptId::scores,
       {"ECOG performance status 1.", "Karnofsky score 80 at today's visit.",
        "ECOG 0, fully active."}},
  };
  return bank;
}

const std::vector<std::string>& synth_fillers() {
  static const std::vector<std::string> fillers = {
      "The patient returned to clinic for routine follow-up.",
      "Vital signs were reviewed and were within normal limits.",
      "Medication reconciliation was completed at check-in.",
      "The care team discussed scheduling and transportation.",
      "Questions were answered and printed materials provided.",
      "Sleep and appetite were reported as adequate.",
  };
  return fillers;
}

const std::vector<std::string>& synth_distractors() {
  // Deliberately pattern-adjacent vocabulary that must not match any
  // registry pattern.
  static const std::vector<std::string> distractors = {
      "The patient mentioned stage fright before a community recital.",
      "A gradebook from night classes came up in conversation.",
      "They hosted a family reunion over the weekend.",
      "The patient keeps score at local baseball games.",
      "Stage curtains for the school play were repaired.",
  };
  return distractors;
}

SynthResult generate_corpus(const SynthSpec& spec) {
  spec.validate();
  SynthResult result;

  for (size_t p = 0; p < spec.n_patients; ++p) {
    // Per-patient derived sub-seed keeps generation parallelizable and stable.
    std::mt19937_64 rng(spec.rng_seed + 0x9e3779b97f4a7c15ull * (p + 1));
    std::ostringstream pid;
    pid << "synth-p" << p;
    for (size_t n = 0; n < spec.notes_per_patient; ++n) {
      PatientNote note;
      note.patient_id = pid.str();
      note.note_id = pid.str() + "-n" + std::to_string(n);
      note.timestamp = "2024-01-01";

      std::string text;
      auto append_sentence = [&](const std::string& sentence) -> size_t {
        if (!text.empty()) text += "\n\n";
        size_t start = text.size();
        text += sentence;
        return start;
      };

      std::uniform_real_distribution<double> coin(0.0, 1.0);
      const auto& fillers = synth_fillers();
      append_sentence(fillers[rng() % fillers.size()]);

      for (ConceptId id : all_concepts()) {
        auto rate_it = spec.plant_rate.find(id);
        double rate = rate_it == spec.plant_rate.end() ? 0.0 : rate_it->second;
        double draw = coin(rng);
        const auto& templates = synth_templates().at(id);
        size_t pick = rng() % templates.size();
        if (draw < rate) {
          const std::string& sentence = templates[pick];
          size_t start = append_sentence(sentence);
          result.truth.push_back({note.note_id, start, start + sentence.size(), id, sentence});
        }
      }

      const auto& distractors = synth_distractors();
      if (coin(rng) < spec.distractor_rate)
        append_sentence(distractors[rng() % distractors.size()]);
      append_sentence(fillers[rng() % fillers.size()]);

      note.text = std::move(text);
      result.notes.push_back(std::move(note));
    }
  }
  return result;
}

std::vector<GoldAnnotation> truth_to_gold(const std::vector<PlantedMention>& truth,
                                          const std::vector<Chunk>& chunks) {
  std::map<std::pair<std::string, ConceptId>, bool> relevant;
  for (const auto& mention : truth) {
    const Chunk* container = nullptr;
    bool overlaps = false;
    for (const auto& chunk : chunks) {
      if (chunk.note_id != mention.note_id) continue;
      if (mention.start >= chunk.start_offset && mention.end <= chunk.end_offset) {
        container = &chunk;
        break;
      }
      if (mention.start < chunk.end_offset && mention.end > chunk.start_offset) overlaps = true;
    }
    if (!container) {
      throw validation_error(
          "planted mention " + (overlaps ? std::string("straddles a chunk boundary")
                                         : std::string("is not covered by any chunk")) +
          " (note " + mention.note_id + ", concept " + to_string(mention.concept_id) + ")");
    }
    relevant[{container->chunk_id, mention.concept_id}] = true;
  }

  std::vector<GoldAnnotation> gold;
  gold.reserve(chunks.size() * kConceptCount);
  for (const auto& chunk : chunks) {
    for (ConceptId id : all_concepts()) {
      GoldAnnotation g;
      g.chunk_id = chunk.chunk_id;
      g.concept_id = id;
      g.relevant = relevant.count({chunk.chunk_id, id}) > 0;
      g.annotator = "synth";
      gold.push_back(std::move(g));
    }
  }
  return gold;
}

void write_truth(const std::filesystem::path& path, const std::vector<PlantedMention>& truth) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& m : truth) {
      json rec;
      rec["note_id"] = m.note_id;
      rec["start"] = m.start;
      rec["end"] = m.end;
      rec["concept_id"] = to_string(m.concept_id);
      rec["text"] = m.text;
      out << rec.dump() << "\n";
    }
  });
}

std::vector<PlantedMention> read_truth(const std::filesystem::path& path) {
  std::vector<PlantedMention> truth;
  for_each_line(path, [&](const std::string& line, size_t lineno) {
    if (line.empty()) return;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw validation_error("truth line " + std::to_string(lineno) + ": " + e.what());
    }
    auto id = concept_from_string(rec.at("concept_id").get<std::string>());
    if (!id) throw validation_error("truth line " + std::to_string(lineno) + ": unknown concept_id");
    truth.push_back({rec.at("note_id").get<std::string>(), rec.at("start").get<size_t>(),
                     rec.at("end").get<size_t>(), *id, rec.at("text").get<std::string>()});
  });
  return truth;
}

}  // namespace onco
