#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <thread>

#include "onco/concepts.hpp"
#include "onco/embedding.hpp"
#include "onco/errors.hpp"
#include "onco/evaluation.hpp"
#include "onco/io.hpp"
#include "onco/reference.hpp"

using namespace onco;
namespace fs = std::filesystem;

namespace {

// Independent recount: walk the gold list, look the prediction up by hand.
ConfusionCounts oracle_confusion(const std::vector<Prediction>& predictions,
                                 const std::vector<GoldAnnotation>& gold, ConceptId id) {
  ConfusionCounts counts;
  for (const auto& g : gold) {
    if (g.concept_id != id) continue;
    bool predicted = false;
    bool found = false;
    for (const auto& p : predictions) {
      if (p.concept_id == id && p.chunk_id == g.chunk_id) {
        predicted = p.predicted;
        found = true;
        break;
      }
    }
    if (!found) predicted = false;  // absent prediction counts as negative
    if (predicted && g.relevant) ++counts.tp;
    if (predicted && !g.relevant) ++counts.fp;
    if (!predicted && g.relevant) ++counts.fn;
    if (!predicted && !g.relevant) ++counts.tn;
  }
  return counts;
}

std::vector<Chunk> make_patient_chunks(size_t n_patients, size_t chunks_per_patient) {
  std::vector<Chunk> chunks;
  for (size_t p = 0; p < n_patients; ++p) {
    for (size_t c = 0; c < chunks_per_patient; ++c) {
      Chunk chunk;
      chunk.patient_id = "p" + std::to_string(p);
      chunk.note_id = chunk.patient_id + "-n" + std::to_string(c);
      chunk.chunk_id = chunk.note_id + "#0";
      chunk.text = "clinic note body " + std::to_string(p * 100 + c) + " with tumor details";
      chunk.end_offset = chunk.text.size();
      chunks.push_back(std::move(chunk));
    }
  }
  return chunks;
}

}  // namespace

TEST_CASE("confusion counting matches a brute-force recount") {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<size_t> n_chunks(1, 50);
  std::uniform_int_distribution<int> coin(0, 1), tri(0, 2);
  for (int trial = 0; trial < 1000; ++trial) {
    size_t nc = n_chunks(rng);
    std::vector<Prediction> predictions;
    std::vector<GoldAnnotation> gold;
    for (size_t i = 0; i < nc; ++i) {
      std::string chunk_id = "c" + std::to_string(i);
      for (ConceptId id : all_concepts()) {
        int p = tri(rng);
        if (p != 2) predictions.push_back({chunk_id, id, p == 1, std::nullopt});
        if (coin(rng)) gold.push_back({chunk_id, id, coin(rng) == 1, std::nullopt});
      }
    }
    for (ConceptId id : all_concepts()) {
      ConfusionCounts got = compute_confusion(predictions, gold, id);
      ConfusionCounts want = oracle_confusion(predictions, gold, id);
      REQUIRE(got.tp == want.tp);
      REQUIRE(got.fp == want.fp);
      REQUIRE(got.fn == want.fn);
      REQUIRE(got.tn == want.tn);
    }
  }
}

TEST_CASE("metrics stay undefined instead of coercing to zero") {
  // One concept with no positive predictions and no relevant gold.
  std::vector<GoldAnnotation> gold = {
      {"c0", ConceptId::tumor_staging, true, std::nullopt},
      {"c0", ConceptId::scores, false, std::nullopt},
  };
  std::vector<Prediction> predictions = {
      {"c0", ConceptId::tumor_staging, true, std::nullopt},
      {"c0", ConceptId::scores, false, std::nullopt},
  };
  MetricsReport report = compute_report(predictions, gold, Regime::classify_all);
  for (const auto& m : report.per_concept) {
    if (m.concept_id == ConceptId::tumor_staging) {
      REQUIRE(m.precision.has_value());
      CHECK(*m.precision == doctest::Approx(1.0));
      CHECK(*m.recall == doctest::Approx(1.0));
      CHECK(*m.f1 == doctest::Approx(1.0));
    } else if (m.concept_id == ConceptId::scores) {
      CHECK_FALSE(m.precision.has_value());  // tp + fp == 0
      CHECK_FALSE(m.recall.has_value());     // tp + fn == 0
      CHECK_FALSE(m.f1.has_value());
    }
  }
  // Macro average over defined concepts only: exactly 1.0, not dragged down.
  REQUIRE(report.overall_precision.has_value());
  CHECK(*report.overall_precision == doctest::Approx(1.0));
  CHECK(*report.overall_recall == doctest::Approx(1.0));
}

TEST_CASE("report construction validates its inputs") {
  std::vector<Prediction> predictions = {{"c0", ConceptId::scores, true, std::nullopt}};
  CHECK_THROWS_AS(compute_report(predictions, {}, Regime::classify_all), Error);
  std::vector<GoldAnnotation> unjudged = {{"zz", ConceptId::tumor_staging, true, std::nullopt}};
  // Gold exists but shares no (chunk, concept) pair with the predictions:
  // judged-pair intersection is computable (absent prediction = negative), so
  // this still produces a report rather than an error.
  MetricsReport report = compute_report(predictions, unjudged, Regime::classify_all);
  CHECK(report.per_concept.size() == kConceptCount);
}

TEST_CASE("gold reading rejects duplicate judgments") {
  fs::path path = fs::temp_directory_path() / "onco_test_gold_dup.jsonl";
  std::vector<GoldAnnotation> gold = {
      {"c0", ConceptId::scores, true, std::nullopt},
      {"c0", ConceptId::scores, false, std::nullopt},
  };
  write_gold(path, gold);
  CHECK_THROWS_AS(read_gold(path), Error);
  fs::remove(path);
}

TEST_CASE("gold candidate construction: 50 patients yield 2600 deterministic picks") {
  auto chunks = make_patient_chunks(50, 8);
  LocalEmbedder embedder(32);
  auto query_sets = seed_query_sets(builtin_registry());

  auto first = build_gold_candidates(chunks, query_sets, embedder, 1234);
  CHECK(first.size() == 50 * kConceptCount * 4);  // 2,600 with 13 concepts
  auto second = build_gold_candidates(chunks, query_sets, embedder, 1234);
  REQUIRE(second.size() == first.size());
  for (size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].patient_id == second[i].patient_id);
    CHECK(first[i].concept_id == second[i].concept_id);
    CHECK(first[i].chunk_id == second[i].chunk_id);
    CHECK(first[i].selection == second[i].selection);
  }

  // Per (patient, concept): 2 similar + 2 random, all distinct.
  std::map<std::pair<std::string, ConceptId>, std::vector<GoldCandidate>> grouped;
  for (const auto& c : first) grouped[{c.patient_id, c.concept_id}].push_back(c);
  for (const auto& [key, group] : grouped) {
    REQUIRE(group.size() == 4);
    std::set<std::string> ids;
    size_t similar = 0;
    for (const auto& c : group) {
      ids.insert(c.chunk_id);
      if (c.selection == Selection::similar) ++similar;
    }
    CHECK(ids.size() == 4);
    CHECK(similar == 2);
  }

  // A different seed moves the random picks.
  auto reseeded = build_gold_candidates(chunks, query_sets, embedder, 99);
  bool any_difference = false;
  for (size_t i = 0; i < first.size(); ++i)
    if (first[i].chunk_id != reseeded[i].chunk_id) any_difference = true;
  CHECK(any_difference);
}

TEST_CASE("patients with fewer than four chunks are skipped") {
  auto chunks = make_patient_chunks(2, 3);  // too small
  auto more = make_patient_chunks(1, 6);
  for (auto& c : more) {
    c.patient_id = "big";
    c.chunk_id = "big-" + c.chunk_id;
  }
  chunks.insert(chunks.end(), more.begin(), more.end());
  LocalEmbedder embedder(32);
  auto candidates =
      build_gold_candidates(chunks, seed_query_sets(builtin_registry()), embedder, 7);
  CHECK(candidates.size() == kConceptCount * 4);  // only the big patient
  for (const auto& c : candidates) CHECK(c.patient_id == "big");
}

TEST_CASE("k-sweep recall is monotone and matches prefix hand-counts") {
  // Ranked list c0..c9; gold marks c0, c3, c9 relevant, c1, c2 judged
  // irrelevant, the rest unjudged.
  std::map<ConceptId, RankedList> ranked;
  RankedList list;
  list.concept_id = ConceptId::tumor_staging;
  for (int i = 0; i < 10; ++i) list.entries.push_back({"c" + std::to_string(i), 0.1 * i});
  ranked[ConceptId::tumor_staging] = list;

  std::vector<GoldAnnotation> gold = {
      {"c0", ConceptId::tumor_staging, true, std::nullopt},
      {"c1", ConceptId::tumor_staging, false, std::nullopt},
      {"c2", ConceptId::tumor_staging, false, std::nullopt},
      {"c3", ConceptId::tumor_staging, true, std::nullopt},
      {"c9", ConceptId::tumor_staging, true, std::nullopt},
  };
  SweepResult result = k_sweep_eval(ranked, gold, {1, 4, 10});
  const auto& points = result.per_concept.at(ConceptId::tumor_staging);
  REQUIRE(points.size() == 3);
  // k=1: judged prefix = {c0 relevant} -> p = 1/1, r = 1/3.
  CHECK(*points[0].precision == doctest::Approx(1.0));
  CHECK(*points[0].recall == doctest::Approx(1.0 / 3));
  // k=4: judged prefix = {c0+, c1-, c2-, c3+} -> p = 2/4, r = 2/3.
  CHECK(*points[1].precision == doctest::Approx(0.5));
  CHECK(*points[1].recall == doctest::Approx(2.0 / 3));
  // k=10: all judged -> p = 3/5, r = 3/3.
  CHECK(*points[2].precision == doctest::Approx(0.6));
  CHECK(*points[2].recall == doctest::Approx(1.0));
  for (size_t i = 1; i < points.size(); ++i)
    CHECK(*points[i].recall >= *points[i - 1].recall);  // non-decreasing
}

TEST_CASE("sweep rendering embeds published reference trend points") {
  SweepResult result;
  result.overall = {{25, 0.5, 0.1}, {400, 0.3, 0.8}};
  fs::path path = fs::temp_directory_path() / "onco_test_sweep.csv";
  render_sweep(result, path, true);
  std::string text = read_file(path);
  CHECK(text.find("reference [published]") != std::string::npos);
  CHECK(text.find("0.12") != std::string::npos);  // Ada recall at k=25
  CHECK(text.find("0.75") != std::string::npos);  // Ada recall at k=400
  CHECK(text.find("0.39") != std::string::npos);  // Ada precision at k=25
  fs::remove(path);
}

namespace {

class SleepyScorer : public ConceptScorer {
 public:
  ConceptLabels classify(const std::string&) override {
    // Pace to a cumulative deadline so per-call scheduler jitter cancels out:
    // each call averages exactly 10 ms, keeping a 100-chunk patient at 1.0 s.
    auto now = std::chrono::steady_clock::now();
    // Re-baseline only when far behind; small wake-up overshoot must carry
    // into the next deadline so it cancels instead of accumulating.
    if (next_ == std::chrono::steady_clock::time_point{} ||
        now > next_ + std::chrono::seconds(1))
      next_ = now;
    next_ += std::chrono::milliseconds(10);
    std::this_thread::sleep_until(next_);
    ConceptLabels labels;
    for (ConceptId id : all_concepts()) labels[id] = false;
    return labels;
  }
  std::string name() const override { return "sleepy"; }

 private:
  std::chrono::steady_clock::time_point next_{};
};

}  // namespace

TEST_CASE("latency bench reports seconds per patient within tolerance") {
  // 10 ms per chunk and 100 chunks per patient: about 1 s per patient.
  auto chunks = make_patient_chunks(3, 100);
  SleepyScorer scorer;
  LatencyReport report = bench_latency(scorer, chunks);
  CHECK(report.patients == 3);
  CHECK(report.mean_seconds == doctest::Approx(1.0).epsilon(0.2));
  CHECK(report.p50_seconds == doctest::Approx(1.0).epsilon(0.2));
  REQUIRE(report.samples.size() == 3);

  fs::path path = fs::temp_directory_path() / "onco_test_latency.csv";
  render_latency(report, path, true);
  std::string text = read_file(path);
  CHECK(text.find("318") != std::string::npos);      // optimized reference
  CHECK(text.find("2289.75") != std::string::npos);  // Ada reference
  CHECK(text.find("5160") != std::string::npos);     // Mistral reference
  CHECK(text.find("reference [published]") != std::string::npos);
  fs::remove(path);
}

TEST_CASE("published per-concept values reproduce their overall rows") {
  // Macro-averaging each system's 13 (p, r) pairs must land within +-0.01 of
  // the printed overall row.
  for (const auto& system : reference_systems()) {
    double psum = 0, rsum = 0;
    for (const auto& [p, r] : system.per_concept) {
      psum += p;
      rsum += r;
    }
    CHECK(std::abs(psum / 13.0 - system.overall_precision) <= 0.01 + 1e-12);
    CHECK(std::abs(rsum / 13.0 - system.overall_recall) <= 0.01 + 1e-12);
  }
  CHECK(reference_systems().size() == 6);
}

TEST_CASE("comparison rendering is deterministic and embeds reference columns") {
  std::vector<GoldAnnotation> gold = {{"c0", ConceptId::tumor_staging, true, std::nullopt}};
  std::vector<Prediction> predictions = {{"c0", ConceptId::tumor_staging, true, std::nullopt}};
  MetricsReport report = compute_report(predictions, gold, Regime::classify_all, std::nullopt,
                                        "lexical");
  fs::path base = fs::temp_directory_path() / "onco_test_comparison";
  render_comparison({report}, {}, base, true);
  fs::path csv = base;
  csv += ".csv";
  fs::path txt = base;
  txt += ".txt";
  std::string first = read_file(csv);
  CHECK(first.find("reference [published]") != std::string::npos);
  CHECK(read_file(txt).find("overall") != std::string::npos);
  render_comparison({report}, {}, base, true);
  CHECK(read_file(csv) == first);  // byte-identical rerun
  fs::remove(csv);
  fs::remove(txt);
}
