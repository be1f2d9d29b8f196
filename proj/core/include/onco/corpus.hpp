#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace onco {

struct PatientNote {
  std::string patient_id;
  std::string note_id;
  std::optional<std::string> timestamp;  // ISO-8601 date, when present
  std::string text;                      // UTF-8; may be empty
};

// Offset-addressed fragment of one note. `text` is always the exact byte
// slice note.text[start_offset, end_offset).
struct Chunk {
  std::string chunk_id;  // note_id + "#" + ordinal
  std::string patient_id;
  std::string note_id;
  size_t start_offset = 0;
  size_t end_offset = 0;
  std::string text;
};

enum class Separator {
  blank_line,      // one or more empty lines
  sentence_break,  // '.', '!' or '?' followed by whitespace
  newline,         // single '\n'
};

struct ChunkingConfig {
  size_t max_chunk_chars = 1000;
  size_t min_chunk_chars = 50;
  std::vector<Separator> separators = {Separator::blank_line, Separator::sentence_break,
                                       Separator::newline};

  void validate() const;
};

std::vector<PatientNote> ingest_notes(const std::filesystem::path& path);
void write_notes(const std::filesystem::path& path, const std::vector<PatientNote>& notes);

std::vector<Chunk> chunk_note(const PatientNote& note, const ChunkingConfig& config);
std::vector<Chunk> chunk_corpus(const std::vector<PatientNote>& notes,
                                const ChunkingConfig& config);

std::vector<Chunk> read_chunks(const std::filesystem::path& path);
void write_chunks(const std::filesystem::path& path, const std::vector<Chunk>& chunks);

}  // namespace onco
