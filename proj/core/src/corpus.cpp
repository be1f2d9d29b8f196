#include "onco/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include <json.hpp>

#include "onco/errors.hpp"
#include "onco/io.hpp"

namespace onco {

using nlohmann::json;

void ChunkingConfig::validate() const {
  if (max_chunk_chars == 0) throw validation_error("max_chunk_chars must be positive");
  if (min_chunk_chars >= max_chunk_chars)
    throw validation_error("min_chunk_chars must be < max_chunk_chars");
  if (separators.empty()) throw validation_error("separators must be non-empty");
}

std::vector<PatientNote> ingest_notes(const std::filesystem::path& path) {
  std::vector<PatientNote> notes;
  std::unordered_set<std::string> seen_ids;
  for_each_line(path, [&](const std::string& line, size_t lineno) {
    if (line.empty()) return;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw validation_error("malformed record at line " + std::to_string(lineno) + ": " +
                             e.what());
    }
    if (!rec.is_object() || !rec.contains("patient_id") || !rec.contains("note_id") ||
        !rec.contains("text") || !rec["patient_id"].is_string() ||
        !rec["note_id"].is_string() || !rec["text"].is_string()) {
      throw validation_error("malformed record at line " + std::to_string(lineno) +
                             ": expected string fields patient_id, note_id, text");
    }
    PatientNote note;
    note.patient_id = rec["patient_id"].get<std::string>();
    note.note_id = rec["note_id"].get<std::string>();
    note.text = rec["text"].get<std::string>();
    if (rec.contains("timestamp") && rec["timestamp"].is_string())
      note.timestamp = rec["timestamp"].get<std::string>();
    if (!seen_ids.insert(note.note_id).second)
      throw validation_error("duplicate note_id: " + note.note_id);
    notes.push_back(std::move(note));
  });
  return notes;
}

void write_notes(const std::filesystem::path& path, const std::vector<PatientNote>& notes) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& n : notes) {
      json rec;
      rec["patient_id"] = n.patient_id;
      rec["note_id"] = n.note_id;
      rec["timestamp"] = n.timestamp ? json(*n.timestamp) : json(nullptr);
      rec["text"] = n.text;
      out << rec.dump() << "\n";
    }
  });
}

namespace {

struct Span {
  size_t start;
  size_t end;
  size_t len() const { return end - start; }
};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Byte index of a UTF-8 character start at or before pos.
size_t snap_to_char_start(const std::string& text, size_t pos) {
  while (pos > 0 && (static_cast<unsigned char>(text[pos]) & 0xC0) == 0x80) --pos;
  return pos;
}

size_t next_char_start(const std::string& text, size_t pos) {
  ++pos;
  while (pos < text.size() && (static_cast<unsigned char>(text[pos]) & 0xC0) == 0x80) ++pos;
  return pos;
}

// Whitespace runs that act as boundaries for the given separator, within
// [start, end). Gaps are dropped from chunks, so they must be whitespace-only.
std::vector<Span> find_gaps(const std::string& text, Span span, Separator sep) {
  std::vector<Span> gaps;
  switch (sep) {
    case Separator::blank_line:
      for (size_t i = span.start; i < span.end; ++i) {
        if (text[i] != '\n') continue;
        size_t j = i;
        size_t newlines = 0;
        while (j < span.end && is_space(text[j])) {
          if (text[j] == '\n') ++newlines;
          ++j;
        }
        if (newlines >= 2) gaps.push_back({i, j});
        i = j > i ? j - 1 : i;
      }
      break;
    case Separator::sentence_break:
      for (size_t i = span.start; i + 1 < span.end; ++i) {
        char c = text[i];
        if ((c == '.' || c == '!' || c == '?') && is_space(text[i + 1])) {
          size_t j = i + 1;
          while (j < span.end && is_space(text[j])) ++j;
          // The terminator stays with the preceding fragment.
          gaps.push_back({i + 1, j});
          i = j - 1;
        }
      }
      break;
    case Separator::newline:
      for (size_t i = span.start; i < span.end; ++i) {
        if (text[i] == '\n') gaps.push_back({i, i + 1});
      }
      break;
  }
  return gaps;
}

// Recursively splits a span into atoms of at most max_chars bytes, trying
// separators in priority order and hard-splitting only as a last resort.
void split_atoms(const std::string& text, Span span, const ChunkingConfig& config,
                 size_t level, std::vector<Span>& out) {
  if (span.len() == 0) return;
  if (span.len() <= config.max_chunk_chars) {
    out.push_back(span);
    return;
  }
  if (level >= config.separators.size()) {
    size_t pos = span.start;
    while (span.end - pos > config.max_chunk_chars) {
      size_t cut = snap_to_char_start(text, pos + config.max_chunk_chars);
      if (cut <= pos) cut = next_char_start(text, pos);
      if (cut >= span.end) break;
      out.push_back({pos, cut});
      pos = cut;
    }
    if (pos < span.end) out.push_back({pos, span.end});
    return;
  }
  auto gaps = find_gaps(text, span, config.separators[level]);
  if (gaps.empty()) {
    split_atoms(text, span, config, level + 1, out);
    return;
  }
  size_t cursor = span.start;
  for (const auto& gap : gaps) {
    if (gap.start > cursor) split_atoms(text, {cursor, gap.start}, config, level + 1, out);
    cursor = gap.end;
  }
  if (cursor < span.end) split_atoms(text, {cursor, span.end}, config, level + 1, out);
}

}  // namespace

std::vector<Chunk> chunk_note(const PatientNote& note, const ChunkingConfig& config) {
  config.validate();
  const std::string& text = note.text;
  if (text.empty()) return {};

  std::vector<Span> atoms;
  split_atoms(text, {0, text.size()}, config, 0, atoms);

  // Greedy reassembly: adjacent atoms are merged while the combined span
  // (including any whitespace between them) stays within max_chunk_chars.
  // This also merges fragments shorter than min_chunk_chars forward.
  std::vector<Span> merged;
  for (const auto& atom : atoms) {
    if (!merged.empty() && atom.end - merged.back().start <= config.max_chunk_chars) {
      merged.back().end = atom.end;
    } else {
      merged.push_back(atom);
    }
  }

  std::vector<Chunk> chunks;
  for (const auto& span : merged) {
    size_t s = span.start;
    size_t e = span.end;
    while (s < e && is_space(text[s])) ++s;
    while (e > s && is_space(text[e - 1])) --e;
    if (s == e) continue;
    Chunk chunk;
    chunk.chunk_id = note.note_id + "#" + std::to_string(chunks.size());
    chunk.patient_id = note.patient_id;
    chunk.note_id = note.note_id;
    chunk.start_offset = s;
    chunk.end_offset = e;
    chunk.text = text.substr(s, e - s);
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

std::vector<Chunk> chunk_corpus(const std::vector<PatientNote>& notes,
                                const ChunkingConfig& config) {
  std::vector<Chunk> chunks;
  std::unordered_set<std::string> seen_ids;
  for (const auto& note : notes) {
    auto note_chunks = chunk_note(note, config);
    for (auto& c : note_chunks) {
      if (!seen_ids.insert(c.chunk_id).second)
        throw validation_error("duplicate chunk_id: " + c.chunk_id);
      chunks.push_back(std::move(c));
    }
  }
  return chunks;
}

std::vector<Chunk> read_chunks(const std::filesystem::path& path) {
  std::vector<Chunk> chunks;
  for_each_line(path, [&](const std::string& line, size_t lineno) {
    if (line.empty()) return;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw validation_error("malformed chunk at line " + std::to_string(lineno) + ": " +
                             e.what());
    }
    Chunk c;
    c.chunk_id = rec.at("chunk_id").get<std::string>();
    c.patient_id = rec.at("patient_id").get<std::string>();
    c.note_id = rec.at("note_id").get<std::string>();
    c.start_offset = rec.at("start_offset").get<size_t>();
    c.end_offset = rec.at("end_offset").get<size_t>();
    c.text = rec.at("text").get<std::string>();
    chunks.push_back(std::move(c));
  });
  return chunks;
}

void write_chunks(const std::filesystem::path& path, const std::vector<Chunk>& chunks) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& c : chunks) {
      json rec;
      rec["chunk_id"] = c.chunk_id;
      rec["patient_id"] = c.patient_id;
      rec["note_id"] = c.note_id;
      rec["start_offset"] = c.start_offset;
      rec["end_offset"] = c.end_offset;
      rec["text"] = c.text;
      out << rec.dump() << "\n";
    }
  });
}

}  // namespace onco
