#include "onco/concepts.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "onco/errors.hpp"
#include "onco/io.hpp"

namespace onco {

using nlohmann::json;

namespace {

struct ConceptName {
  ConceptId id;
  const char* name;
};

constexpr std::array<ConceptName, kConceptCount> kConceptNames = {{
    {ConceptId::current_diagnosis, "current_diagnosis"},
    {ConceptId::disease_status, "disease_status"},
    {ConceptId::tumor_characteristics, "tumor_characteristics"},
    {ConceptId::tumor_staging, "tumor_staging"},
    {ConceptId::combined_stage, "combined_stage"},
    {ConceptId::treatment_outcomes, "treatment_outcomes"},
    {ConceptId::treatment_types, "treatment_types"},
    {ConceptId::biomarkers_assessed, "biomarkers_assessed"},
    {ConceptId::surgical_interventions, "surgical_interventions"},
    {ConceptId::diagnostic_assessments, "diagnostic_assessments"},
    {ConceptId::diagnosis_date, "diagnosis_date"},
    {ConceptId::family_history, "family_history"},
    {ConceptId::scores, "scores"},
}};

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

void validate_def(const ConceptDef& def) {
  if (def.definition.empty())
    throw validation_error("concept " + to_string(def.id) + ": empty definition");
  if (def.seed_queries.empty())
    throw validation_error("concept " + to_string(def.id) + ": no seed queries");
  for (const auto& p : def.patterns) {
    try {
      std::regex re(p, std::regex::icase);
    } catch (const std::regex_error&) {
      throw validation_error("concept " + to_string(def.id) + ": invalid pattern '" + p + "'");
    }
  }
}

void validate_registry(const ConceptRegistry& registry) {
  for (ConceptId id : all_concepts()) {
    if (!registry.count(id))
      throw validation_error("registry missing concept: " + to_string(id));
  }
  for (const auto& [id, def] : registry) {
    if (def.id != id) throw validation_error("registry key/id mismatch for " + to_string(id));
    validate_def(def);
  }
}

ConceptDef make_def(ConceptId id, std::string display, std::string definition,
                    std::vector<std::string> patterns, std::vector<std::string> seeds) {
  ConceptDef def;
  def.id = id;
  def.display_name = std::move(display);
  def.definition = std::move(definition);
  def.patterns = std::move(patterns);
  def.seed_queries = std::move(seeds);
  return def;
}

ConceptRegistry build_builtin_registry() {
  ConceptRegistry reg;
  auto add = [&reg](ConceptDef def) { reg.emplace(def.id, std::move(def)); };

  add(make_def(ConceptId::current_diagnosis, "Current Diagnosis",
               "The patient's current confirmed cancer diagnosis, including the primary "
               "site and origin of the malignancy.",
               {R"(\bdiagnosed with\b)", R"(\bconfirmed diagnosis of\b)",
                R"(\bcarcinoma of the\b)"},
               {"current cancer diagnosis", "primary malignancy site",
                "confirmed diagnosis of carcinoma", "patient diagnosed with cancer",
                "origin of the tumor", "histologically confirmed diagnosis"}));

  add(make_def(ConceptId::disease_status, "Disease Status",
               "Current status of the disease, such as locally advanced, resectable, or "
               "metastasized, with any metastasis sites.",
               {R"(\blocally advanced\b)", R"(\bmetastatic disease\b)", R"(\bdisease status\b)",
                R"(\bresectable\b)"},
               {"disease status", "locally advanced disease", "evidence of metastatic disease",
                "resectable tumor", "sites of metastasis", "extent of disease"}));

  add(make_def(ConceptId::tumor_characteristics, "Tumor Characteristics",
               "Histologic classification of the cancer based on cellular structure and "
               "tissue of origin, including tumor size and grade.",
               {R"(\bhistolog(y|ic)\b)", R"(\bgrade [1-3]\b)",
                R"(\b(well|moderately|poorly) differentiated\b)"},
               {"tumor histology", "histologic grade", "poorly differentiated tumor",
                "tumor size on pathology", "cellular differentiation", "histologic subtype"}));

  add(make_def(ConceptId::tumor_staging, "Tumor Staging",
               "Primary tumor extent (T), lymph node involvement (N), and distant "
               "metastasis (M) assessment.",
               {R"(\bT[0-4][a-c]?N[0-3]M[0-1]\b)", R"(\bstage\s+(0|i{1,3}v?|iv)[abc]?\b)",
                R"(\bTNM\b)"},
               {"TNM staging", "primary tumor T category", "lymph node involvement N stage",
                "distant metastasis M status", "pathologic tumor staging",
                "clinical stage assessment"}));

  add(make_def(ConceptId::combined_stage, "Combined Stage Grouping",
               "Overall stage grouping combining tumor size, nodal involvement, and "
               "metastasis into a single stage.",
               {R"(\bstage grouping\b)", R"(\bajcc\b)", R"(\boverall stage\b)"},
               {"AJCC stage grouping", "overall stage group", "combined stage",
                "anatomic stage group", "stage grouping at diagnosis",
                "eighth edition stage group"}));

  add(make_def(ConceptId::treatment_outcomes, "Treatment Outcomes",
               "Documented outcomes of treatment, such as remission, stable disease, "
               "partial response, or progression.",
               {R"(\bcomplete remission\b)", R"(\bpartial response\b)", R"(\bstable disease\b)",
                R"(\bdisease progression\b)"},
               {"response to treatment", "complete remission achieved", "stable disease",
                "disease progression on therapy", "partial response on imaging",
                "treatment outcome"}));

  add(make_def(ConceptId::treatment_types, "Treatment Types",
               "Treatments administered, including chemotherapy, hormone therapy, "
               "immunotherapy, and radiation.",
               {R"(\bchemotherapy\b)", R"(\bimmunotherapy\b)", R"(\bhormone therapy\b)",
                R"(\bradiation therapy\b)",
                R"(\b(folfox|carboplatin|paclitaxel|pembrolizumab|letrozole)\b)"},
               {"chemotherapy regimen", "immunotherapy administered", "hormone therapy",
                "radiation therapy course", "systemic therapy received",
                "adjuvant treatment given"}));

  add(make_def(ConceptId::biomarkers_assessed, "Biomarkers Assessed",
               "Specific biomarkers and genetic mutations tested to guide treatment "
               "decisions and prognosis.",
               {R"(\b(egfr|kras|braf|brca1|brca2|her2|msi)\b)", R"(\bpd-?l1\b)",
                R"(\bbiomarker\b)", R"(\bimmunohistochemistry\b)"},
               {"biomarker testing results", "EGFR mutation status", "HER2 expression",
                "PD-L1 testing", "genetic mutation panel", "molecular profiling"}));

  add(make_def(ConceptId::surgical_interventions, "Surgical Interventions",
               "Surgical procedures the patient has undergone in relation to the cancer "
               "diagnosis.",
               {R"(\b(lobectomy|mastectomy|colectomy|prostatectomy|hysterectomy)\b)",
                R"(\bresection\b)", R"(\bsurgical\b)", R"(\blaparoscopic\b)"},
               {"surgical resection performed", "history of mastectomy", "tumor resection",
                "laparoscopic procedure", "operative intervention", "status post surgery"}));

  add(make_def(ConceptId::diagnostic_assessments, "Diagnostic Assessments",
               "Diagnostic studies used to characterize the cancer, such as imaging and "
               "tissue sampling.",
               {R"(\b(ct|mri|pet)\b)", R"(\bbiopsy\b)", R"(\bcolonoscopy\b)",
                R"(\bultrasound\b)"},
               {"CT scan findings", "MRI of the abdomen", "PET scan performed",
                "core needle biopsy", "diagnostic workup", "colonoscopy results"}));

  add(make_def(ConceptId::diagnosis_date, "Diagnosis Date",
               "The date the cancer was first confirmed by pathologic diagnosis.",
               {R"(\bdate of diagnosis\b)", R"(\bdiagnosis date\b)",
                R"(\bdiagnosed on \d{4}-\d{2}-\d{2})"},
               {"date of diagnosis", "initial diagnosis date", "first diagnosed on",
                "pathologic confirmation date", "diagnosis established date",
                "when was the cancer diagnosed"}));

  add(make_def(ConceptId::family_history, "Family History",
               "Cancer-related family history, covering immediate and extended family "
               "members.",
               {R"(\bfamily history\b)", R"(\b(maternal|paternal)\b)",
                R"(\b(mother|father|sister|brother) (with|had)\b)"},
               {"family history of cancer", "mother with breast cancer",
                "paternal history of malignancy", "cancer in first-degree relatives",
                "hereditary cancer history", "family history significant for cancer"}));

  add(make_def(ConceptId::scores, "Scores",
               "Performance-related scores, such as ECOG and Karnofsky, and other related "
               "clinical scores.",
               {R"(\becog\b)", R"(\bkarnofsky\b)", R"(\bperformance status\b)"},
               {"ECOG performance status", "Karnofsky score", "performance status score",
                "functional status assessment", "ECOG at visit", "performance score"}));

  validate_registry(reg);
  return reg;
}

}  // namespace

const std::array<ConceptId, kConceptCount>& all_concepts() {
  static const std::array<ConceptId, kConceptCount> ids = [] {
    std::array<ConceptId, kConceptCount> out{};
    for (size_t i = 0; i < kConceptCount; ++i) out[i] = kConceptNames[i].id;
    return out;
  }();
  return ids;
}

std::string to_string(ConceptId id) {
  for (const auto& cn : kConceptNames)
    if (cn.id == id) return cn.name;
  return "unknown";
}

std::optional<ConceptId> concept_from_string(const std::string& s) {
  for (const auto& cn : kConceptNames)
    if (s == cn.name) return cn.id;
  return std::nullopt;
}

const ConceptRegistry& builtin_registry() {
  static const ConceptRegistry reg = build_builtin_registry();
  return reg;
}

std::string registry_to_text(const ConceptRegistry& registry) {
  std::ostringstream out;
  out << "# Oncology concept registry\n";
  for (const auto& [id, def] : registry) {
    out << "\n[concept]\n";
    out << "id: " << to_string(id) << "\n";
    out << "display_name: " << def.display_name << "\n";
    out << "definition: " << def.definition << "\n";
    for (const auto& p : def.patterns) out << "pattern: " << p << "\n";
    for (const auto& q : def.seed_queries) out << "seed_query: " << q << "\n";
  }
  return out.str();
}

void save_registry(const ConceptRegistry& registry, const std::filesystem::path& path) {
  atomic_write_text(path, registry_to_text(registry));
}

ConceptRegistry load_registry(const std::filesystem::path& path) {
  ConceptRegistry reg;
  ConceptDef current;
  bool in_block = false;
  auto flush = [&] {
    if (!in_block) return;
    if (current.display_name.empty()) current.display_name = to_string(current.id);
    if (reg.count(current.id))
      throw validation_error("registry: duplicate concept " + to_string(current.id));
    reg.emplace(current.id, current);
  };
  for_each_line(path, [&](const std::string& raw, size_t lineno) {
    std::string line = raw;
    if (!line.empty() && line[0] == '#') return;
    if (line.empty()) return;
    if (line == "[concept]") {
      flush();
      current = ConceptDef{};
      current.id = ConceptId::current_diagnosis;
      in_block = true;
      return;
    }
    if (!in_block)
      throw validation_error("registry line " + std::to_string(lineno) +
                             ": content outside [concept] block");
    auto colon = line.find(": ");
    if (colon == std::string::npos)
      throw validation_error("registry line " + std::to_string(lineno) + ": expected 'key: value'");
    std::string key = line.substr(0, colon);
    std::string value = line.substr(colon + 2);
    if (key == "id") {
      auto id = concept_from_string(value);
      if (!id)
        throw validation_error("registry line " + std::to_string(lineno) +
                               ": unknown concept id '" + value + "'");
      current.id = *id;
    } else if (key == "display_name") {
      current.display_name = value;
    } else if (key == "definition") {
      current.definition = value;
    } else if (key == "pattern") {
      current.patterns.push_back(value);
    } else if (key == "seed_query") {
      current.seed_queries.push_back(value);
    } else {
      throw validation_error("registry line " + std::to_string(lineno) + ": unknown key '" +
                             key + "'");
    }
  });
  flush();
  validate_registry(reg);
  return reg;
}

std::vector<std::string> dedupe_queries(const std::vector<std::string>& queries) {
  std::vector<std::string> out;
  std::vector<std::string> seen;
  for (const auto& q : queries) {
    if (q.empty()) continue;
    std::string lower = to_lower(q);
    if (std::find(seen.begin(), seen.end(), lower) != seen.end()) continue;
    seen.push_back(lower);
    out.push_back(q);
  }
  return out;
}

QuerySet expand_queries(const ConceptDef& concept_def, LlmClient& llm, size_t count) {
  if (count < 1) throw validation_error("expand_queries: count must be >= 1");
  std::vector<std::string> collected;
  const int kMaxRetries = 3;
  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    std::ostringstream prompt;
    prompt << "# request concept=" << to_string(concept_def.id) << " kind=expand attempt="
           << attempt << "\n";
    prompt << "You write search queries for a clinical notes retrieval system.\n";
    prompt << "Concept: " << concept_def.display_name << "\n";
    prompt << "Definition: " << concept_def.definition << "\n";
    prompt << "Write " << count
           << " short, varied queries phrased the way this information appears in EHR "
              "notes. One query per line, no numbering, no extra text.\n";
    std::string response = llm.complete(prompt.str());
    std::istringstream lines(response);
    std::string line;
    while (std::getline(lines, line)) {
      while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
        line.pop_back();
      size_t first = line.find_first_not_of(" \t");
      if (first == std::string::npos) continue;
      line = line.substr(first);
      if (line[0] == '#') continue;
      collected.push_back(line);
    }
    collected = dedupe_queries(collected);
    if (collected.size() >= count) break;
  }
  if (collected.size() < count) {
    throw remote_error("expand_queries: only " + std::to_string(collected.size()) +
                       " unique queries for " + to_string(concept_def.id) + " after retries");
  }
  collected.resize(count);
  QuerySet qs;
  qs.concept_id = concept_def.id;
  qs.queries = std::move(collected);
  return qs;
}

std::map<ConceptId, QuerySet> static_query_sets(const ConceptRegistry& registry,
                                                const std::filesystem::path& path) {
  std::map<ConceptId, std::vector<std::string>> raw;
  for_each_line(path, [&](const std::string& line, size_t lineno) {
    if (line.empty()) return;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw validation_error("query set line " + std::to_string(lineno) + ": " + e.what());
    }
    auto id = concept_from_string(rec.at("concept_id").get<std::string>());
    if (!id)
      throw validation_error("query set line " + std::to_string(lineno) +
                             ": unknown concept_id");
    for (const auto& q : rec.at("queries")) raw[*id].push_back(q.get<std::string>());
  });
  std::map<ConceptId, QuerySet> sets;
  for (ConceptId id : all_concepts()) {
    auto it = raw.find(id);
    if (it == raw.end())
      throw validation_error("query set file missing concept: " + to_string(id));
    auto deduped = dedupe_queries(it->second);
    if (deduped.size() < it->second.size())
      std::cerr << "warning: duplicate queries for " << to_string(id) << " deduplicated\n";
    if (deduped.empty())
      throw validation_error("query set for " + to_string(id) + " is empty");
    sets[id] = QuerySet{id, std::move(deduped)};
  }
  (void)registry;
  return sets;
}

std::map<ConceptId, QuerySet> seed_query_sets(const ConceptRegistry& registry) {
  std::map<ConceptId, QuerySet> sets;
  for (const auto& [id, def] : registry)
    sets[id] = QuerySet{id, dedupe_queries(def.seed_queries)};
  return sets;
}

void write_query_sets(const std::filesystem::path& path,
                      const std::map<ConceptId, QuerySet>& sets) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& [id, qs] : sets) {
      json rec;
      rec["concept_id"] = to_string(id);
      rec["queries"] = qs.queries;
      out << rec.dump() << "\n";
    }
  });
}

}  // namespace onco
