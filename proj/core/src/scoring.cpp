#include "onco/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "onco/errors.hpp"
#include "onco/io.hpp"

namespace onco {

using nlohmann::json;

namespace {

const std::vector<std::string>& negation_cues() {
  static const std::vector<std::string> cues = {"no evidence of", "denies", "negative for"};
  return cues;
}

constexpr size_t kNegationWindow = 40;

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// True when a negation cue ends within the window of bytes before match_pos.
bool negated(const std::string& lower_text, size_t match_pos) {
  size_t window_start = match_pos > kNegationWindow ? match_pos - kNegationWindow : 0;
  std::string window = lower_text.substr(window_start, match_pos - window_start);
  for (const auto& cue : negation_cues())
    if (window.find(cue) != std::string::npos) return true;
  return false;
}

}  // namespace

ConceptLabels lexical_score(const std::string& chunk_text, const ConceptRegistry& registry) {
  ConceptLabels labels;
  std::string lower = to_lower(chunk_text);
  for (ConceptId id : all_concepts()) labels[id] = false;
  if (chunk_text.empty()) return labels;
  for (const auto& [id, def] : registry) {
    for (const auto& pattern : def.patterns) {
      std::regex re(pattern, std::regex::icase);
      auto begin = std::sregex_iterator(chunk_text.begin(), chunk_text.end(), re);
      bool hit = false;
      for (auto it = begin; it != std::sregex_iterator(); ++it) {
        if (!negated(lower, static_cast<size_t>(it->position()))) {
          hit = true;
          break;
        }
      }
      if (hit) {
        labels[id] = true;
        break;
      }
    }
  }
  return labels;
}

LexicalScorer::LexicalScorer(ConceptRegistry registry) : registry_(std::move(registry)) {}

ConceptLabels LexicalScorer::classify(const std::string& chunk_text) {
  return lexical_score(chunk_text, registry_);
}

ExternalScorer::ExternalScorer(std::string endpoint, double threshold, int timeout_seconds)
    : endpoint_(std::move(endpoint)), threshold_(threshold), timeout_seconds_(timeout_seconds) {
  if (endpoint_.empty()) throw config_error("external scorer requires an endpoint");
}

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

ConceptLabels ExternalScorer::external_score(const std::string& chunk_text,
                                             std::map<ConceptId, double>* scores_out) {
  auto [base, path] = split_url(endpoint_);
  httplib::Client client(base);
  client.set_connection_timeout(timeout_seconds_);
  client.set_read_timeout(timeout_seconds_);

  json body;
  body["text"] = chunk_text;
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) throw remote_error("external scorer unreachable: " + endpoint_);
  if (res->status != 200)
    throw remote_error("external scorer returned status " + std::to_string(res->status));

  json parsed;
  try {
    parsed = json::parse(res->body);
  } catch (const json::exception& e) {
    throw remote_error(std::string("external scorer response parse failure: ") + e.what());
  }

  ConceptLabels labels;
  const bool has_scores = parsed.contains("scores") && !parsed["scores"].is_null();
  for (ConceptId id : all_concepts()) {
    std::string key = to_string(id);
    if (has_scores) {
      if (!parsed["scores"].contains(key))
        throw remote_error("external scorer response missing concept: " + key);
      double score = parsed["scores"][key].get<double>();
      labels[id] = score >= threshold_;
      if (scores_out) (*scores_out)[id] = score;
    } else {
      if (!parsed.contains("labels") || !parsed["labels"].contains(key))
        throw remote_error("external scorer response missing concept: " + key);
      labels[id] = parsed["labels"][key].get<bool>();
    }
  }
  return labels;
}

ConceptLabels ExternalScorer::classify(const std::string& chunk_text) {
  return external_score(chunk_text, nullptr);
}

std::vector<Prediction> classify_corpus(ConceptScorer& scorer,
                                        const std::vector<Chunk>& chunks) {
  std::vector<Prediction> predictions;
  predictions.reserve(chunks.size() * kConceptCount);
  for (const auto& chunk : chunks) {
    ConceptLabels labels = scorer.classify(chunk.text);
    for (ConceptId id : all_concepts())
      predictions.push_back({chunk.chunk_id, id, labels.at(id), std::nullopt});
  }
  return predictions;
}

void write_predictions(const std::filesystem::path& path,
                       const std::vector<Prediction>& predictions) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& p : predictions) {
      json rec;
      rec["chunk_id"] = p.chunk_id;
      rec["concept_id"] = to_string(p.concept_id);
      rec["predicted"] = p.predicted;
      if (p.score) rec["score"] = *p.score;
      out << rec.dump() << "\n";
    }
  });
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> predictions;
  for_each_line(path, [&](const std::string& line, size_t lineno) {
    if (line.empty()) return;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw validation_error("prediction line " + std::to_string(lineno) + ": " + e.what());
    }
    auto id = concept_from_string(rec.at("concept_id").get<std::string>());
    if (!id)
      throw validation_error("prediction line " + std::to_string(lineno) +
                             ": unknown concept_id");
    Prediction p;
    p.chunk_id = rec.at("chunk_id").get<std::string>();
    p.concept_id = *id;
    p.predicted = rec.at("predicted").get<bool>();
    if (rec.contains("score")) p.score = rec["score"].get<double>();
    predictions.push_back(std::move(p));
  });
  return predictions;
}

}  // namespace onco
