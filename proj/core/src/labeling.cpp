#include "onco/labeling.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "onco/errors.hpp"
#include "onco/io.hpp"

namespace onco {

using nlohmann::json;

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::raw: return "raw";
    case Provenance::regex_filtered: return "regex_filtered";
    case Provenance::self_verified: return "self_verified";
  }
  return "raw";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "regex_filtered") return Provenance::regex_filtered;
  if (s == "self_verified") return Provenance::self_verified;
  return Provenance::raw;
}

namespace {

constexpr const char* kDefaultLabelTemplate =
    "# request concept={concept_id} chunk={chunk_id} kind=label\n"
    "You annotate clinical note fragments for an oncology retrieval system.\n"
    "Concept: {concept_name}\n"
    "Definition: {definition}\n"
    "\n"
    "Note fragment:\n"
    "{chunk_text}\n"
    "\n"
    "Think through whether the fragment contains this concept, then answer in\n"
    "exactly this format:\n"
    "```\n"
    "reasoning: <one or two sentences>\n"
    "evidence_terms: [\"<span copied verbatim from the fragment>\", ...]\n"
    "label: <true|false>\n"
    "```\n"
    "Use an empty list and label: false when the concept is absent.\n";

constexpr const char* kDefaultVerifyTemplate =
    "# request concept={concept_id} chunk={chunk_id} kind=verify\n"
    "You are double-checking a negative annotation that may be a missed match.\n"
    "Concept: {concept_name}\n"
    "Definition: {definition}\n"
    "\n"
    "Note fragment:\n"
    "{chunk_text}\n"
    "\n"
    "The fragment contains the suspicious span: \"{matched_span}\".\n"
    "Does the fragment actually contain the concept? Answer in exactly this\n"
    "format:\n"
    "```\n"
    "reasoning: <one or two sentences>\n"
    "evidence_terms: [\"<span>\", ...]\n"
    "label: <true|false>\n"
    "```\n";

std::string replace_all(std::string text, const std::string& key, const std::string& value) {
  size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    text.replace(pos, key.size(), value);
    pos += value.size();
  }
  return text;
}

std::string render(const std::string& tmpl, const Chunk& chunk, const ConceptDef& concept_def,
                   const std::string& matched_span = "") {
  std::string out = tmpl;
  out = replace_all(out, "{concept_id}", to_string(concept_def.id));
  out = replace_all(out, "{concept_name}", concept_def.display_name);
  out = replace_all(out, "{definition}", concept_def.definition);
  out = replace_all(out, "{chunk_id}", chunk.chunk_id);
  out = replace_all(out, "{chunk_text}", chunk.text);
  out = replace_all(out, "{matched_span}", matched_span);
  return out;
}

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool contains_ci(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return false;
  return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

}  // namespace

PromptTemplates PromptTemplates::defaults() {
  return {kDefaultLabelTemplate, kDefaultVerifyTemplate};
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  PromptTemplates t;
  t.label_template = read_file(dir / "label.txt");
  t.verify_template = read_file(dir / "verify.txt");
  return t;
}

ParsedLabelResponse parse_label_response(const std::string& response) {
  ParsedLabelResponse parsed;
  bool saw_label = false;
  std::istringstream lines(response);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    line = line.substr(first);
    if (line.rfind("reasoning:", 0) == 0) {
      parsed.reasoning = line.substr(10);
      size_t s = parsed.reasoning.find_first_not_of(' ');
      parsed.reasoning = s == std::string::npos ? "" : parsed.reasoning.substr(s);
    } else if (line.rfind("evidence_terms:", 0) == 0) {
      std::string payload = line.substr(15);
      try {
        json arr = json::parse(payload);
        if (!arr.is_array()) throw validation_error("evidence_terms is not a list");
        parsed.evidence_terms.clear();
        for (const auto& t : arr) parsed.evidence_terms.push_back(t.get<std::string>());
      } catch (const json::exception&) {
        throw validation_error("unparseable evidence_terms: " + payload);
      }
    } else if (line.rfind("label:", 0) == 0) {
      std::string value = to_lower(line.substr(6));
      value.erase(std::remove_if(value.begin(), value.end(),
                                 [](unsigned char c) { return std::isspace(c); }),
                  value.end());
      if (value == "true" || value == "yes") {
        parsed.label = true;
      } else if (value == "false" || value == "no") {
        parsed.label = false;
      } else {
        throw validation_error("unparseable label value: " + value);
      }
      saw_label = true;
    }
  }
  if (!saw_label) throw validation_error("response missing label field");
  return parsed;
}

CotLabel label_chunk(const Chunk& chunk, const ConceptDef& concept_def, LlmClient& llm,
                     const PromptTemplates& templates) {
  std::string prompt = render(templates.label_template, chunk, concept_def);
  std::string response = llm.complete(prompt);
  ParsedLabelResponse parsed;
  try {
    parsed = parse_label_response(response);
  } catch (const Error&) {
    // One re-ask with an explicit format reminder, then give up.
    std::string retry_prompt =
        prompt + "\nYour previous reply could not be parsed. Reply with only the fenced "
                 "block in the requested format.\n";
    response = llm.complete(retry_prompt);
    try {
      parsed = parse_label_response(response);
    } catch (const Error& e) {
      throw validation_error("label_chunk: malformed LLM output for (" +
                             to_string(concept_def.id) + ", " + chunk.chunk_id + "): " + e.what() +
                             "; raw response: " + response);
    }
  }
  CotLabel label;
  label.chunk_id = chunk.chunk_id;
  label.concept_id = concept_def.id;
  label.reasoning = parsed.reasoning;
  label.evidence_terms = parsed.evidence_terms;
  label.label = parsed.label;
  label.provenance = Provenance::raw;
  return label;
}

std::vector<std::string> pattern_matches(const std::string& text, const ConceptDef& concept_def) {
  std::vector<std::string> spans;
  for (const auto& pattern : concept_def.patterns) {
    std::regex re(pattern, std::regex::icase);
    auto begin = std::sregex_iterator(text.begin(), text.end(), re);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
      std::string span = it->str();
      if (std::find(spans.begin(), spans.end(), span) == spans.end()) spans.push_back(span);
    }
  }
  return spans;
}

CotLabel regex_filter(CotLabel label, const Chunk& chunk, const ConceptDef& concept_def) {
  if (label.concept_id != concept_def.id)
    throw validation_error("regex_filter: concept mismatch for " + label.chunk_id);

  // Hallucination guard: evidence must occur verbatim in the chunk.
  std::vector<std::string> surviving;
  for (const auto& term : label.evidence_terms)
    if (contains_ci(chunk.text, term)) surviving.push_back(term);
  label.evidence_terms = std::move(surviving);

  if (!label.label) return label;

  if (label.evidence_terms.empty()) {
    auto spans = pattern_matches(chunk.text, concept_def);
    if (spans.empty()) {
      label.label = false;
      label.provenance = Provenance::regex_filtered;
    } else {
      // Positive is pattern-supported; keep it and record the spans as evidence.
      label.evidence_terms = std::move(spans);
    }
  }
  return label;
}

CotLabel self_verify(CotLabel label, const Chunk& chunk, const ConceptDef& concept_def,
                     LlmClient& llm, const PromptTemplates& templates) {
  if (label.label) return label;
  auto spans = pattern_matches(chunk.text, concept_def);
  if (spans.empty()) return label;

  std::string prompt = render(templates.verify_template, chunk, concept_def, spans.front());
  std::string response;
  try {
    response = llm.complete(prompt);
  } catch (const Error& e) {
    std::cerr << "warning: self_verify transport failure for (" << to_string(concept_def.id)
              << ", " << chunk.chunk_id << "): " << e.what() << "; label unchanged\n";
    return label;
  }
  ParsedLabelResponse parsed;
  try {
    parsed = parse_label_response(response);
  } catch (const Error& e) {
    std::cerr << "warning: self_verify unparseable response for (" << to_string(concept_def.id)
              << ", " << chunk.chunk_id << "); label unchanged\n";
    return label;
  }
  if (parsed.label) {
    label.label = true;
    label.evidence_terms = spans;
    if (!parsed.reasoning.empty()) label.reasoning = parsed.reasoning;
  }
  label.provenance = Provenance::self_verified;
  return label;
}

namespace {

json label_to_json(const CotLabel& label) {
  json rec;
  rec["chunk_id"] = label.chunk_id;
  rec["concept_id"] = to_string(label.concept_id);
  rec["reasoning"] = label.reasoning;
  rec["evidence_terms"] = label.evidence_terms;
  rec["label"] = label.label;
  rec["provenance"] = to_string(label.provenance);
  return rec;
}

CotLabel label_from_json(const json& rec) {
  CotLabel label;
  label.chunk_id = rec.at("chunk_id").get<std::string>();
  auto id = concept_from_string(rec.at("concept_id").get<std::string>());
  if (!id) throw validation_error("label record: unknown concept_id");
  label.concept_id = *id;
  label.reasoning = rec.at("reasoning").get<std::string>();
  label.evidence_terms = rec.at("evidence_terms").get<std::vector<std::string>>();
  label.label = rec.at("label").get<bool>();
  label.provenance = provenance_from_string(rec.at("provenance").get<std::string>());
  return label;
}

}  // namespace

std::vector<CotLabel> run_labeling(const CandidateSet& candidates,
                                   const std::vector<Chunk>& chunks,
                                   const ConceptRegistry& registry, LlmClient& llm,
                                   const std::filesystem::path& checkpoint_path,
                                   const PromptTemplates& templates) {
  std::unordered_map<std::string, const Chunk*> by_id;
  for (const auto& c : chunks) by_id[c.chunk_id] = &c;

  // Resume: completed (concept, chunk) pairs are never re-queried.
  std::map<std::pair<std::string, std::string>, CotLabel> done;
  if (std::filesystem::exists(checkpoint_path)) {
    for_each_line(checkpoint_path, [&](const std::string& line, size_t) {
      if (line.empty()) return;
      CotLabel label = label_from_json(json::parse(line));
      done[{to_string(label.concept_id), label.chunk_id}] = label;
    });
  }

  std::ofstream checkpoint;
  if (!checkpoint_path.empty()) {
    checkpoint.open(checkpoint_path, std::ios::app);
    if (!checkpoint) throw io_error("cannot open checkpoint: " + checkpoint_path.string());
  }

  std::vector<CotLabel> labels;
  labels.reserve(candidates.pairs.size());
  for (const auto& pair : candidates.pairs) {
    auto key = std::make_pair(to_string(pair.concept_id), pair.chunk_id);
    auto hit = done.find(key);
    if (hit != done.end()) {
      labels.push_back(hit->second);
      continue;
    }
    auto chunk_it = by_id.find(pair.chunk_id);
    if (chunk_it == by_id.end())
      throw validation_error("run_labeling: unknown chunk_id " + pair.chunk_id);
    const Chunk& chunk = *chunk_it->second;
    const ConceptDef& concept_def = registry.at(pair.concept_id);

    CotLabel label = label_chunk(chunk, concept_def, llm, templates);
    label = regex_filter(std::move(label), chunk, concept_def);
    label = self_verify(std::move(label), chunk, concept_def, llm, templates);

    if (checkpoint.is_open()) {
      checkpoint << label_to_json(label).dump() << "\n";
      checkpoint.flush();
    }
    labels.push_back(std::move(label));
  }
  return labels;
}

size_t emit_training_set(const std::vector<CotLabel>& labels, const std::vector<Chunk>& chunks,
                         TrainingMode mode, const std::filesystem::path& path) {
  std::unordered_map<std::string, const Chunk*> by_id;
  for (const auto& c : chunks) by_id[c.chunk_id] = &c;
  auto chunk_text = [&](const std::string& chunk_id) -> const std::string& {
    auto it = by_id.find(chunk_id);
    if (it == by_id.end())
      throw validation_error("emit_training_set: unknown chunk_id " + chunk_id);
    return it->second->text;
  };

  size_t written = 0;
  if (mode == TrainingMode::single_concept) {
    atomic_write(path, [&](std::ostream& out) {
      for (const auto& label : labels) {
        json rec;
        rec["chunk_id"] = label.chunk_id;
        rec["text"] = chunk_text(label.chunk_id);
        rec["concept_id"] = to_string(label.concept_id);
        rec["label"] = label.label;
        rec["rationale"] = label.reasoning;
        out << rec.dump() << "\n";
        ++written;
      }
    });
    return written;
  }

  // Multi-concept: one instance per distinct chunk, label map total over the
  // 13 concepts; unlabeled concepts default to false with a warning.
  std::vector<std::string> chunk_order;
  std::map<std::string, std::map<ConceptId, const CotLabel*>> grouped;
  for (const auto& label : labels) {
    if (!grouped.count(label.chunk_id)) chunk_order.push_back(label.chunk_id);
    grouped[label.chunk_id][label.concept_id] = &label;
  }
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& chunk_id : chunk_order) {
      const auto& concept_labels = grouped[chunk_id];
      json labels_obj = json::object();
      std::string rationale;
      size_t missing = 0;
      for (ConceptId id : all_concepts()) {
        auto it = concept_labels.find(id);
        if (it == concept_labels.end()) {
          labels_obj[to_string(id)] = false;
          ++missing;
        } else {
          labels_obj[to_string(id)] = it->second->label;
          if (rationale.empty() && !it->second->reasoning.empty())
            rationale = it->second->reasoning;
        }
      }
      if (missing > 0)
        std::cerr << "warning: chunk " << chunk_id << " missing labels for " << missing
                  << " concepts; defaulted to false\n";
      json rec;
      rec["chunk_id"] = chunk_id;
      rec["text"] = chunk_text(chunk_id);
      rec["labels"] = labels_obj;
      rec["rationale"] = rationale;
      out << rec.dump() << "\n";
      ++written;
    }
  });
  return written;
}

void write_labels(const std::filesystem::path& path, const std::vector<CotLabel>& labels) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& label : labels) out << label_to_json(label).dump() << "\n";
  });
}

std::vector<CotLabel> read_labels(const std::filesystem::path& path) {
  std::vector<CotLabel> labels;
  for_each_line(path, [&](const std::string& line, size_t lineno) {
    if (line.empty()) return;
    try {
      labels.push_back(label_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw validation_error("label line " + std::to_string(lineno) + ": " + e.what());
    }
  });
  return labels;
}

}  // namespace onco
