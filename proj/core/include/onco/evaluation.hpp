#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "onco/concepts.hpp"
#include "onco/corpus.hpp"
#include "onco/embedding.hpp"
#include "onco/retrieval.hpp"
#include "onco/scoring.hpp"

namespace onco {

struct GoldAnnotation {
  std::string chunk_id;
  ConceptId concept_id = ConceptId::current_diagnosis;
  bool relevant = false;
  std::optional<std::string> annotator;
};

void write_gold(const std::filesystem::path& path, const std::vector<GoldAnnotation>& gold);
std::vector<GoldAnnotation> read_gold(const std::filesystem::path& path);

struct ConfusionCounts {
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;
  size_t tn = 0;

  size_t judged() const { return tp + fp + fn + tn; }
};

struct ConceptMetrics {
  ConceptId concept_id = ConceptId::current_diagnosis;
  std::optional<double> precision;  // undefined when nothing was retrieved
  std::optional<double> recall;     // undefined when nothing is relevant
  std::optional<double> f1;
};

enum class Regime { top_k, classify_all };
std::string to_string(Regime regime);

struct MetricsReport {
  std::vector<ConceptMetrics> per_concept;  // concept enumeration order
  std::optional<double> overall_precision;  // macro average over defined concepts
  std::optional<double> overall_recall;
  std::optional<double> overall_f1;
  Regime regime = Regime::classify_all;
  std::optional<size_t> k;
  std::string scorer_name;
};

// Test-set candidate construction: per patient and concept, the 2 most
// concept-similar chunks plus 2 seeded uniform-random distinct others.
enum class Selection { similar, random_pick };

struct GoldCandidate {
  std::string patient_id;
  ConceptId concept_id = ConceptId::current_diagnosis;
  std::string chunk_id;
  Selection selection = Selection::similar;
};

std::vector<GoldCandidate> build_gold_candidates(const std::vector<Chunk>& test_chunks,
                                                 const std::map<ConceptId, QuerySet>& query_sets,
                                                 Embedder& embedder, uint64_t rng_seed);

// Counts over judged (chunk, concept) pairs only; unjudged predictions are
// excluded from every denominator.
ConfusionCounts compute_confusion(const std::vector<Prediction>& predictions,
                                  const std::vector<GoldAnnotation>& gold,
                                  ConceptId concept_id);

MetricsReport compute_report(const std::vector<Prediction>& predictions,
                             const std::vector<GoldAnnotation>& gold, Regime regime,
                             std::optional<size_t> k = std::nullopt,
                             const std::string& scorer_name = "");

struct SweepPoint {
  size_t k = 0;
  std::optional<double> precision;
  std::optional<double> recall;
};

struct SweepResult {
  std::map<ConceptId, std::vector<SweepPoint>> per_concept;
  std::vector<SweepPoint> overall;  // macro average per k
};

SweepResult k_sweep_eval(const std::map<ConceptId, RankedList>& ranked,
                         const std::vector<GoldAnnotation>& gold,
                         const std::vector<size_t>& ks);

void render_sweep(const SweepResult& result, const std::filesystem::path& csv_path,
                  bool include_reference);

struct LatencyReport {
  std::string scorer_name;
  double mean_seconds = 0;
  double p50_seconds = 0;
  double p95_seconds = 0;
  size_t patients = 0;
  std::vector<std::pair<std::string, double>> samples;  // (patient_id, seconds)
  std::optional<double> f1;                             // joined from a MetricsReport
};

// Wall-clock (monotone) per patient: all of a patient's chunks classified.
LatencyReport bench_latency(ConceptScorer& scorer, const std::vector<Chunk>& chunks);

void render_latency(const LatencyReport& report, const std::filesystem::path& csv_path,
                    bool include_reference);

// Table-style comparison: per-concept p/r/f1 per report, plus an overall row.
// Writes <base>.csv and <base>.txt, byte-deterministic given inputs.
void render_comparison(const std::vector<MetricsReport>& reports,
                       const std::vector<LatencyReport>& latency_reports,
                       const std::filesystem::path& base_path, bool include_reference);

}  // namespace onco
