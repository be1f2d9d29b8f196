#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "onco/concepts.hpp"
#include "onco/errors.hpp"
#include "onco/labeling.hpp"
#include "onco/llm.hpp"
#include "onco/retrieval.hpp"

using namespace onco;
namespace fs = std::filesystem;

namespace {

Chunk make_chunk(const std::string& id, const std::string& text) {
  Chunk c;
  c.chunk_id = id;
  c.patient_id = "p1";
  c.note_id = id.substr(0, id.find('#'));
  c.start_offset = 0;
  c.end_offset = text.size();
  c.text = text;
  return c;
}

std::string response(const std::string& reasoning, const std::string& terms_json, bool label) {
  return "reasoning: " + reasoning + "\nevidence_terms: " + terms_json +
         "\nlabel: " + (label ? "true" : "false") + "\n";
}

}  // namespace

TEST_CASE("label response parsing") {
  auto parsed = parse_label_response(
      "```\nreasoning: The fragment names a TNM stage.\n"
      "evidence_terms: [\"T2N0M0\", \"stage II\"]\nlabel: true\n```");
  CHECK(parsed.reasoning == "The fragment names a TNM stage.");
  REQUIRE(parsed.evidence_terms.size() == 2);
  CHECK(parsed.evidence_terms[0] == "T2N0M0");
  CHECK(parsed.label);

  CHECK_THROWS_AS(parse_label_response("no structured fields here"), Error);
  CHECK_THROWS_AS(parse_label_response("label: maybe"), Error);
  CHECK_THROWS_AS(parse_label_response("evidence_terms: not-a-list\nlabel: true"), Error);
}

TEST_CASE("label_chunk re-asks once on a malformed response") {
  MockLlmClient llm;
  llm.push_response("garbled");
  llm.push_response(response("second try", "[\"stage II\"]", true));
  Chunk chunk = make_chunk("n1#0", "Pathology shows stage II disease.");
  const ConceptDef& def = builtin_registry().at(ConceptId::tumor_staging);
  CotLabel label = label_chunk(chunk, def, llm);
  CHECK(label.label);
  CHECK(label.provenance == Provenance::raw);
  CHECK(llm.call_count() == 2);

  MockLlmClient llm2;
  llm2.push_response("garbled");
  llm2.push_response("still garbled");
  try {
    label_chunk(chunk, def, llm2);
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::validation);
    CHECK(std::string(e.what()).find("still garbled") != std::string::npos);
  }
}

TEST_CASE("regex_filter drops hallucinated evidence and flips unsupported positives") {
  const ConceptDef& def = builtin_registry().at(ConceptId::tumor_staging);
  Chunk chunk = make_chunk("n1#0", "Discussed weekend plans; nothing clinical here.");

  CotLabel label;
  label.chunk_id = chunk.chunk_id;
  label.concept_id = def.id;
  label.label = true;
  label.evidence_terms = {"T2N0M0"};  // not in the chunk
  CotLabel filtered = regex_filter(label, chunk, def);
  CHECK_FALSE(filtered.label);
  CHECK(filtered.provenance == Provenance::regex_filtered);
  CHECK(filtered.evidence_terms.empty());

  // Pattern-supported positive with hallucinated terms keeps the label and
  // records matched spans as evidence.
  Chunk staged = make_chunk("n2#0", "Final pathology: pT2N0M0, stage IIa.");
  label.chunk_id = staged.chunk_id;
  label.evidence_terms = {"not present"};
  CotLabel kept = regex_filter(label, staged, def);
  CHECK(kept.label);
  CHECK_FALSE(kept.evidence_terms.empty());

  // Negative labels pass through untouched apart from evidence cleaning.
  label.label = false;
  label.evidence_terms = {"ghost"};
  CotLabel negative = regex_filter(label, staged, def);
  CHECK_FALSE(negative.label);
  CHECK(negative.provenance == Provenance::raw);
}

TEST_CASE("self_verify recovers pattern-matching negatives only") {
  const ConceptDef& def = builtin_registry().at(ConceptId::tumor_staging);
  Chunk staged = make_chunk("n1#0", "Imaging consistent with stage IV disease.");
  Chunk plain = make_chunk("n2#0", "Discussed diet and exercise.");

  CotLabel negative;
  negative.chunk_id = staged.chunk_id;
  negative.concept_id = def.id;
  negative.label = false;

  MockLlmClient confirm;
  confirm.set_default("verify", response("missed it", "[]", true));
  CotLabel recovered = self_verify(negative, staged, def, confirm);
  CHECK(recovered.label);
  CHECK(recovered.provenance == Provenance::self_verified);
  CHECK_FALSE(recovered.evidence_terms.empty());
  CHECK(confirm.call_count() == 1);

  // No pattern match: the LLM is never consulted.
  MockLlmClient untouched;
  negative.chunk_id = plain.chunk_id;
  CotLabel still_negative = self_verify(negative, plain, def, untouched);
  CHECK_FALSE(still_negative.label);
  CHECK(untouched.call_count() == 0);

  // A positive label is never re-queried or flipped.
  MockLlmClient idle;
  CotLabel positive = negative;
  positive.label = true;
  CotLabel unchanged = self_verify(positive, staged, def, idle);
  CHECK(unchanged.label);
  CHECK(idle.call_count() == 0);
}

TEST_CASE("filter and verify are directional and idempotent") {
  // Property: regex_filter only flips true->false; self_verify only flips
  // false->true; applying either twice equals applying it once.
  std::mt19937_64 rng(99);
  std::vector<std::string> texts = {
      "Final pathology: stage IIa.",
      "No clinical content in this fragment.",
      "ECOG performance status 1 today.",
      "Family history significant for breast cancer in mother.",
      "Margins negative; biopsy of the lesion performed.",
  };
  std::uniform_int_distribution<size_t> tpick(0, texts.size() - 1);
  std::uniform_int_distribution<int> coin(0, 1);
  const auto& registry = builtin_registry();
  for (int trial = 0; trial < 500; ++trial) {
    ConceptId id = all_concepts()[trial % kConceptCount];
    const ConceptDef& def = registry.at(id);
    Chunk chunk = make_chunk("n#0", texts[tpick(rng)]);
    CotLabel label;
    label.chunk_id = chunk.chunk_id;
    label.concept_id = id;
    label.label = coin(rng) == 1;
    if (coin(rng)) label.evidence_terms.push_back("pathology");
    if (coin(rng)) label.evidence_terms.push_back("invented term xyz");

    CotLabel once = regex_filter(label, chunk, def);
    if (!label.label) REQUIRE_FALSE(once.label);  // never false->true
    CotLabel twice = regex_filter(once, chunk, def);
    REQUIRE(twice.label == once.label);
    REQUIRE(twice.evidence_terms == once.evidence_terms);

    bool verdict = coin(rng) == 1;
    MockLlmClient llm;
    llm.set_default("verify", response("confirmed", "[]", verdict));
    CotLabel verified = self_verify(once, chunk, def, llm);
    if (once.label) REQUIRE(verified.label);  // never true->false
    MockLlmClient llm2;
    llm2.set_default("verify", response("confirmed", "[]", verdict));
    CotLabel verified_twice = self_verify(verified, chunk, def, llm2);
    REQUIRE(verified_twice.label == verified.label);
    if (verified.label) REQUIRE(llm2.call_count() == 0);  // positives are final

    // Invariant: a surviving positive always carries evidence.
    if (verified.label) REQUIRE_FALSE(verified.evidence_terms.empty());
  }
}

TEST_CASE("run_labeling resumes from the checkpoint without re-querying") {
  std::vector<Chunk> chunks = {
      make_chunk("n1#0", "Final pathology: stage IIa."),
      make_chunk("n2#0", "Nothing clinical in this one."),
  };
  CandidateSet candidates;
  candidates.per_concept_k = 2;
  candidates.pairs = {{ConceptId::tumor_staging, "n1#0", 0.1},
                      {ConceptId::tumor_staging, "n2#0", 0.2}};

  fs::path checkpoint = fs::temp_directory_path() / "onco_test_checkpoint.jsonl";
  fs::remove(checkpoint);

  MockLlmClient llm;
  llm.set_default("label", response("default", "[]", true));
  auto labels = run_labeling(candidates, chunks, builtin_registry(), llm, checkpoint);
  REQUIRE(labels.size() == 2);
  CHECK(labels[0].label);        // pattern-supported positive survives
  CHECK_FALSE(labels[1].label);  // unsupported positive flipped
  size_t first_run_calls = llm.call_count();
  CHECK(first_run_calls == 2);

  // Second run: everything is checkpointed, zero LLM traffic, same output.
  MockLlmClient silent;
  auto resumed = run_labeling(candidates, chunks, builtin_registry(), silent, checkpoint);
  CHECK(silent.call_count() == 0);
  REQUIRE(resumed.size() == labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    CHECK(resumed[i].chunk_id == labels[i].chunk_id);
    CHECK(resumed[i].label == labels[i].label);
    CHECK(resumed[i].provenance == labels[i].provenance);
  }
  fs::remove(checkpoint);

  CandidateSet unknown;
  unknown.pairs = {{ConceptId::scores, "missing#0", 0.3}};
  CHECK_THROWS_AS(run_labeling(unknown, chunks, builtin_registry(), llm, checkpoint), Error);
  fs::remove(checkpoint);
}

TEST_CASE("training set emission") {
  std::vector<Chunk> chunks = {
      make_chunk("n1#0", "Final pathology: stage IIa."),
      make_chunk("n2#0", "Family history of colon cancer."),
  };
  std::vector<CotLabel> labels;
  CotLabel a;
  a.chunk_id = "n1#0";
  a.concept_id = ConceptId::tumor_staging;
  a.label = true;
  a.reasoning = "stage mention";
  a.evidence_terms = {"stage IIa"};
  CotLabel b;
  b.chunk_id = "n1#0";
  b.concept_id = ConceptId::family_history;
  b.label = false;
  CotLabel c;
  c.chunk_id = "n2#0";
  c.concept_id = ConceptId::family_history;
  c.label = true;
  c.evidence_terms = {"Family history"};
  labels = {a, b, c};

  fs::path single = fs::temp_directory_path() / "onco_test_train_single.jsonl";
  CHECK(emit_training_set(labels, chunks, TrainingMode::single_concept, single) == 3);
  size_t lines = 0;
  std::ifstream in(single);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 3);
  fs::remove(single);

  fs::path multi = fs::temp_directory_path() / "onco_test_train_multi.jsonl";
  CHECK(emit_training_set(labels, chunks, TrainingMode::multi_concept, multi) == 2);
  fs::remove(multi);
}

TEST_CASE("labels round-trip through jsonl") {
  CotLabel label;
  label.chunk_id = "n1#0";
  label.concept_id = ConceptId::biomarkers_assessed;
  label.reasoning = "mentions HER2";
  label.evidence_terms = {"HER2 positive"};
  label.label = true;
  label.provenance = Provenance::self_verified;
  fs::path path = fs::temp_directory_path() / "onco_test_labels.jsonl";
  write_labels(path, {label});
  auto back = read_labels(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].chunk_id == label.chunk_id);
  CHECK(back[0].concept_id == label.concept_id);
  CHECK(back[0].evidence_terms == label.evidence_terms);
  CHECK(back[0].provenance == Provenance::self_verified);
  fs::remove(path);
}

TEST_CASE("prompt templates load from a directory") {
  fs::path dir = fs::temp_directory_path() / "onco_test_prompts";
  fs::create_directories(dir);
  {
    std::ofstream(dir / "label.txt") << "# request concept={concept_id} chunk={chunk_id} "
                                        "kind=label\ncustom {chunk_text}";
    std::ofstream(dir / "verify.txt") << "# request concept={concept_id} chunk={chunk_id} "
                                         "kind=verify\ncustom {matched_span}";
  }
  PromptTemplates t = PromptTemplates::load(dir);
  CHECK(t.label_template.find("custom") != std::string::npos);
  fs::remove_all(dir);
  CHECK_THROWS_AS(PromptTemplates::load(dir), Error);
}
