#include "onco/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "onco/errors.hpp"
#include "onco/io.hpp"

namespace onco {

using nlohmann::json;

ChunkIndex build_index(const std::vector<Chunk>& chunks, Embedder& embedder) {
  if (chunks.empty()) throw validation_error("build_index: chunks must be non-empty");
  std::unordered_set<std::string> seen;
  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) {
    if (!seen.insert(c.chunk_id).second)
      throw validation_error("build_index: duplicate chunk_id " + c.chunk_id);
    texts.push_back(c.text);
  }
  auto vectors = embedder.embed(texts);
  ChunkIndex index;
  index.entries.reserve(chunks.size());
  for (size_t i = 0; i < chunks.size(); ++i) {
    index.entries.push_back(
        {chunks[i].chunk_id, chunks[i].patient_id, chunks[i].note_id, std::move(vectors[i])});
  }
  index.dim = index.entries.front().vec.dim();
  index.embedder_fingerprint = embedder.fingerprint();
  return index;
}

RankedList assign_chunks_to_concept(const ChunkIndex& index, const QuerySet& query_set,
                                    Embedder& embedder, size_t k) {
  if (index.entries.empty()) throw validation_error("assign_chunks_to_concept: empty index");
  if (query_set.queries.empty())
    throw validation_error("assign_chunks_to_concept: empty query set");
  if (k < 1) throw validation_error("assign_chunks_to_concept: k must be >= 1");

  auto query_vectors = embedder.embed(query_set.queries);

  RankedList ranked;
  ranked.concept_id = query_set.concept_id;
  ranked.entries.reserve(index.entries.size());
  for (const auto& entry : index.entries) {
    double best = 2.0;
    for (const auto& qv : query_vectors)
      best = std::min(best, cosine_distance(qv, entry.vec));
    ranked.entries.emplace_back(entry.chunk_id, best);
  }
  std::sort(ranked.entries.begin(), ranked.entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;
  });
  if (ranked.entries.size() > k) ranked.entries.resize(k);
  return ranked;
}

CandidateSet harvest_candidates(const ChunkIndex& index,
                                const std::map<ConceptId, QuerySet>& query_sets,
                                Embedder& embedder, size_t per_concept_k) {
  if (per_concept_k < 1) throw validation_error("harvest: per_concept_k must be >= 1");
  CandidateSet candidates;
  candidates.per_concept_k = per_concept_k;
  for (ConceptId id : all_concepts()) {
    auto it = query_sets.find(id);
    if (it == query_sets.end())
      throw validation_error("harvest: missing query set for " + to_string(id));
    auto ranked = assign_chunks_to_concept(index, it->second, embedder, per_concept_k);
    for (const auto& [chunk_id, distance] : ranked.entries)
      candidates.pairs.push_back({id, chunk_id, distance});
  }
  return candidates;
}

std::vector<std::pair<size_t, std::vector<std::pair<std::string, double>>>> k_sweep_rank(
    const RankedList& ranked, const std::vector<size_t>& ks) {
  if (!std::is_sorted(ks.begin(), ks.end()))
    throw validation_error("k_sweep_rank: ks must be ascending");
  std::vector<std::pair<size_t, std::vector<std::pair<std::string, double>>>> out;
  out.reserve(ks.size());
  for (size_t k : ks) {
    size_t take = std::min(k, ranked.entries.size());
    out.emplace_back(k, std::vector<std::pair<std::string, double>>(
                            ranked.entries.begin(), ranked.entries.begin() + take));
  }
  return out;
}

namespace {

constexpr char kIndexMagic[8] = {'O', 'N', 'C', 'O', 'I', 'D', 'X', '1'};

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  uint32_t len = get_u32(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  return s;
}

void put_f32(std::ostream& out, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

float get_f32(std::istream& in) {
  uint32_t bits = get_u32(in);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void save_index(const ChunkIndex& index, const std::filesystem::path& path) {
  atomic_write(path, [&](std::ostream& out) {
    out.write(kIndexMagic, sizeof(kIndexMagic));
    put_u32(out, static_cast<uint32_t>(index.dim));
    put_string(out, index.embedder_fingerprint);
    put_u32(out, static_cast<uint32_t>(index.entries.size()));
    for (const auto& entry : index.entries) {
      put_string(out, entry.chunk_id);
      put_string(out, entry.patient_id);
      put_string(out, entry.note_id);
      for (float v : entry.vec.values) put_f32(out, v);
    }
  });
}

ChunkIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read index: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kIndexMagic, 8) != 0)
    throw validation_error("not an index cache file: " + path.string());
  ChunkIndex index;
  index.dim = get_u32(in);
  index.embedder_fingerprint = get_string(in);
  uint32_t count = get_u32(in);
  index.entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    ChunkIndex::Entry entry;
    entry.chunk_id = get_string(in);
    entry.patient_id = get_string(in);
    entry.note_id = get_string(in);
    std::vector<float> values(index.dim);
    for (size_t d = 0; d < index.dim; ++d) values[d] = get_f32(in);
    if (!in) throw validation_error("truncated index cache: " + path.string());
    entry.vec = EmbeddingVector::make(std::move(values));
    index.entries.push_back(std::move(entry));
  }
  return index;
}

void write_candidates(const std::filesystem::path& path, const CandidateSet& candidates) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& pair : candidates.pairs) {
      json rec;
      rec["concept_id"] = to_string(pair.concept_id);
      rec["chunk_id"] = pair.chunk_id;
      rec["distance"] = pair.distance;
      rec["per_concept_k"] = candidates.per_concept_k;
      out << rec.dump() << "\n";
    }
  });
}

CandidateSet read_candidates(const std::filesystem::path& path) {
  CandidateSet candidates;
  for_each_line(path, [&](const std::string& line, size_t lineno) {
    if (line.empty()) return;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw validation_error("candidate line " + std::to_string(lineno) + ": " + e.what());
    }
    auto id = concept_from_string(rec.at("concept_id").get<std::string>());
    if (!id)
      throw validation_error("candidate line " + std::to_string(lineno) +
                             ": unknown concept_id");
    candidates.pairs.push_back(
        {*id, rec.at("chunk_id").get<std::string>(), rec.at("distance").get<double>()});
    candidates.per_concept_k =
        std::max(candidates.per_concept_k, rec.value("per_concept_k", size_t{0}));
  });
  return candidates;
}

}  // namespace onco
