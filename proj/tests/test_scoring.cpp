#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "onco/concepts.hpp"
#include "onco/errors.hpp"
#include "onco/scoring.hpp"

using namespace onco;
using nlohmann::json;
namespace fs = std::filesystem;

TEST_CASE("lexical scorer flags pattern matches") {
  const auto& registry = builtin_registry();
  ConceptLabels labels = lexical_score("Pathology consistent with stage IIIb disease.", registry);
  CHECK(labels.at(ConceptId::tumor_staging));
  CHECK_FALSE(labels.at(ConceptId::family_history));

  labels = lexical_score("Family history significant for breast cancer in mother.", registry);
  CHECK(labels.at(ConceptId::family_history));
  CHECK_FALSE(labels.at(ConceptId::tumor_staging));
}

TEST_CASE("lexical scorer suppresses matches behind negation cues") {
  const auto& registry = builtin_registry();
  ConceptLabels labels =
      lexical_score("Imaging today: no evidence of metastatic disease.", registry);
  CHECK_FALSE(labels.at(ConceptId::disease_status));

  // The same term without the cue is a hit.
  labels = lexical_score("Imaging today shows metastatic disease.", registry);
  CHECK(labels.at(ConceptId::disease_status));

  // A cue far away (beyond the 40-byte window) does not suppress.
  std::string text = "Denies chest pain. " + std::string(60, 'x') +
                     " Imaging shows metastatic disease in the liver.";
  labels = lexical_score(text, registry);
  CHECK(labels.at(ConceptId::disease_status));
}

TEST_CASE("lexical scorer on empty text is all-false") {
  ConceptLabels labels = lexical_score("", builtin_registry());
  REQUIRE(labels.size() == kConceptCount);
  for (const auto& [id, flag] : labels) CHECK_FALSE(flag);
}

TEST_CASE("classify_corpus emits 13 predictions per chunk in order") {
  LexicalScorer scorer(builtin_registry());
  std::vector<Chunk> chunks(2);
  chunks[0].chunk_id = "n1#0";
  chunks[0].text = "stage IV disease";
  chunks[1].chunk_id = "n2#0";
  chunks[1].text = "nothing clinical";
  auto predictions = classify_corpus(scorer, chunks);
  REQUIRE(predictions.size() == 2 * kConceptCount);
  for (size_t c = 0; c < 2; ++c)
    for (size_t i = 0; i < kConceptCount; ++i) {
      CHECK(predictions[c * kConceptCount + i].chunk_id == chunks[c].chunk_id);
      CHECK(predictions[c * kConceptCount + i].concept_id == all_concepts()[i]);
    }
}

namespace {

struct StubScoreServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit StubScoreServer(std::function<json(const std::string&)> responder) {
    server.Post("/classify", [responder](const httplib::Request& req, httplib::Response& res) {
      json body = json::parse(req.body);
      res.set_content(responder(body.at("text").get<std::string>()).dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~StubScoreServer() {
    server.stop();
    thread.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/classify"; }
};

json full_labels(bool value) {
  json labels = json::object();
  for (ConceptId id : all_concepts()) labels[to_string(id)] = value;
  return labels;
}

}  // namespace

TEST_CASE("external scorer reads boolean labels") {
  StubScoreServer stub([](const std::string& text) {
    json labels = full_labels(false);
    if (text.find("stage") != std::string::npos) labels["tumor_staging"] = true;
    return json{{"labels", labels}};
  });
  ExternalScorer scorer(stub.url());
  ConceptLabels labels = scorer.classify("stage II tumor");
  CHECK(labels.at(ConceptId::tumor_staging));
  CHECK_FALSE(labels.at(ConceptId::scores));
}

TEST_CASE("external scorer thresholds numeric scores at 0.5") {
  StubScoreServer stub([](const std::string&) {
    json scores = json::object();
    for (ConceptId id : all_concepts()) scores[to_string(id)] = 0.2;
    scores["tumor_staging"] = 0.91;
    scores["scores"] = 0.49;  // just below the threshold
    return json{{"scores", scores}};
  });
  ExternalScorer scorer(stub.url());
  std::map<ConceptId, double> raw;
  ConceptLabels labels = scorer.external_score("anything", &raw);
  CHECK(labels.at(ConceptId::tumor_staging));
  CHECK_FALSE(labels.at(ConceptId::scores));
  CHECK(raw.at(ConceptId::tumor_staging) == doctest::Approx(0.91));
}

TEST_CASE("external scorer errors on a missing concept, naming it") {
  StubScoreServer stub([](const std::string&) {
    json labels = full_labels(false);
    labels.erase("family_history");
    return json{{"labels", labels}};
  });
  ExternalScorer scorer(stub.url());
  try {
    scorer.classify("text");
    FAIL("expected remote error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::remote);
    CHECK(std::string(e.what()).find("family_history") != std::string::npos);
  }
}

TEST_CASE("external scorer surfaces transport failures as remote errors") {
  ExternalScorer scorer("http://127.0.0.1:1/classify", 0.5, 1);
  try {
    scorer.classify("text");
    FAIL("expected remote error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::remote);
  }
}

TEST_CASE("predictions round-trip through jsonl") {
  std::vector<Prediction> preds = {
      {"n1#0", ConceptId::tumor_staging, true, 0.75},
      {"n1#0", ConceptId::scores, false, std::nullopt},
  };
  fs::path path = fs::temp_directory_path() / "onco_test_preds.jsonl";
  write_predictions(path, preds);
  auto back = read_predictions(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].predicted);
  CHECK(back[0].score == doctest::Approx(0.75));
  CHECK_FALSE(back[1].score.has_value());
  fs::remove(path);
}
