#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "onco/concepts.hpp"
#include "onco/corpus.hpp"

namespace onco {

using ConceptLabels = std::map<ConceptId, bool>;

// Per-chunk, per-concept boolean classifier: the inference-time contract a
// deployed concept retriever fulfills.
class ConceptScorer {
 public:
  virtual ~ConceptScorer() = default;
  virtual ConceptLabels classify(const std::string& chunk_text) = 0;
  virtual std::string name() const = 0;
  virtual std::string version() const { return "1"; }
};

struct Prediction {
  std::string chunk_id;
  ConceptId concept_id = ConceptId::current_diagnosis;
  bool predicted = false;
  std::optional<double> score;
};

// Pattern-based baseline: a concept is present when one of its registry
// patterns matches and no negation cue occurs shortly before the match.
ConceptLabels lexical_score(const std::string& chunk_text, const ConceptRegistry& registry);

class LexicalScorer : public ConceptScorer {
 public:
  explicit LexicalScorer(ConceptRegistry registry);
  ConceptLabels classify(const std::string& chunk_text) override;
  std::string name() const override { return "lexical"; }

 private:
  ConceptRegistry registry_;
};

// Adapter for a served model: POST {"text"} -> {"labels": {...},
// "scores": {...}?}. Scores, when present, are thresholded.
class ExternalScorer : public ConceptScorer {
 public:
  explicit ExternalScorer(std::string endpoint, double threshold = 0.5,
                          int timeout_seconds = 60);
  ConceptLabels classify(const std::string& chunk_text) override;
  std::string name() const override { return "external:" + endpoint_; }

  ConceptLabels external_score(const std::string& chunk_text,
                               std::map<ConceptId, double>* scores_out);
  double threshold() const { return threshold_; }

 private:
  std::string endpoint_;
  double threshold_;
  int timeout_seconds_;
};

// 13 predictions per chunk, in chunk order then concept enumeration order.
std::vector<Prediction> classify_corpus(ConceptScorer& scorer,
                                        const std::vector<Chunk>& chunks);

void write_predictions(const std::filesystem::path& path,
                       const std::vector<Prediction>& predictions);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

}  // namespace onco
