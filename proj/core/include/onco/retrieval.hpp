#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "onco/concepts.hpp"
#include "onco/corpus.hpp"
#include "onco/embedding.hpp"

namespace onco {

// Exact-scan index over embedded chunks. Immutable once built.
struct ChunkIndex {
  struct Entry {
    std::string chunk_id;
    std::string patient_id;
    std::string note_id;
    EmbeddingVector vec;
  };
  std::vector<Entry> entries;
  size_t dim = 0;
  std::string embedder_fingerprint;
};

ChunkIndex build_index(const std::vector<Chunk>& chunks, Embedder& embedder);

// Ascending-distance concept assignment; ties broken by chunk_id.
struct RankedList {
  ConceptId concept_id = ConceptId::current_diagnosis;
  std::vector<std::pair<std::string, double>> entries;  // (chunk_id, distance)
};

// Per-chunk concept distance is the minimum cosine distance over the
// concept's expanded queries. Returns the top-k entries, ascending.
RankedList assign_chunks_to_concept(const ChunkIndex& index, const QuerySet& query_set,
                                    Embedder& embedder, size_t k);

struct CandidateSet {
  struct Entry {
    ConceptId concept_id;
    std::string chunk_id;
    double distance;
  };
  std::vector<Entry> pairs;
  size_t per_concept_k = 0;
};

// Top per_concept_k per concept, no cross-concept deduplication. Output is
// ordered by concept enumeration order, then ascending distance.
CandidateSet harvest_candidates(const ChunkIndex& index,
                                const std::map<ConceptId, QuerySet>& query_sets,
                                Embedder& embedder, size_t per_concept_k);

// Nested top-k prefixes of a ranked list, one per requested k (ascending ks).
std::vector<std::pair<size_t, std::vector<std::pair<std::string, double>>>> k_sweep_rank(
    const RankedList& ranked, const std::vector<size_t>& ks);

// Binary cache: header (dim, fingerprint, count) + little-endian f32 records.
void save_index(const ChunkIndex& index, const std::filesystem::path& path);
ChunkIndex load_index(const std::filesystem::path& path);

void write_candidates(const std::filesystem::path& path, const CandidateSet& candidates);
CandidateSet read_candidates(const std::filesystem::path& path);

}  // namespace onco
