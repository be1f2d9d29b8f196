#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "onco/concepts.hpp"
#include "onco/corpus.hpp"
#include "onco/embedding.hpp"
#include "onco/retrieval.hpp"
#include "onco/scoring.hpp"

using namespace onco;

namespace {

std::string sample_text(size_t words, uint64_t seed) {
  static const char* bank[] = {"patient", "tumor", "stage", "biopsy", "clinic", "margin",
                               "stable", "plan", "imaging", "lesion", "followup", "review"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, 11);
  std::string text;
  for (size_t i = 0; i < words; ++i) {
    if (i) text += ' ';
    text += bank[pick(rng)];
  }
  return text;
}

std::vector<Chunk> sample_chunks(size_t n) {
  std::vector<Chunk> chunks(n);
  for (size_t i = 0; i < n; ++i) {
    chunks[i].chunk_id = "n" + std::to_string(i) + "#0";
    chunks[i].patient_id = "p" + std::to_string(i % 10);
    chunks[i].note_id = "n" + std::to_string(i);
    chunks[i].text = sample_text(40, i);
    chunks[i].end_offset = chunks[i].text.size();
  }
  return chunks;
}

}  // namespace

static void BM_CosineDistance(benchmark::State& state) {
  LocalEmbedder embedder(static_cast<size_t>(state.range(0)));
  auto a = embedder.embed_one(sample_text(40, 1));
  auto b = embedder.embed_one(sample_text(40, 2));
  for (auto _ : state) benchmark::DoNotOptimize(cosine_distance(a, b));
}
BENCHMARK(BM_CosineDistance)->Arg(64)->Arg(256)->Arg(1024);

static void BM_EmbedLocal(benchmark::State& state) {
  std::string text = sample_text(static_cast<size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(embed_local(text, 256));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_EmbedLocal)->Arg(10)->Arg(100)->Arg(1000);

static void BM_ChunkNote(benchmark::State& state) {
  PatientNote note;
  note.patient_id = "p";
  note.note_id = "n";
  for (int i = 0; i < state.range(0); ++i) note.text += sample_text(12, i) + ".\n\n";
  ChunkingConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(chunk_note(note, config));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * note.text.size()));
}
BENCHMARK(BM_ChunkNote)->Arg(10)->Arg(100)->Arg(500);

static void BM_TopKScan(benchmark::State& state) {
  LocalEmbedder embedder(256);
  auto chunks = sample_chunks(static_cast<size_t>(state.range(0)));
  ChunkIndex index = build_index(chunks, embedder);
  QuerySet qs;
  qs.concept_id = ConceptId::tumor_staging;
  for (int i = 0; i < 5; ++i) qs.queries.push_back(sample_text(6, 100 + i));
  for (auto _ : state)
    benchmark::DoNotOptimize(assign_chunks_to_concept(index, qs, embedder, 50));
}
BENCHMARK(BM_TopKScan)->Arg(100)->Arg(1000);

static void BM_LexicalScore(benchmark::State& state) {
  LexicalScorer scorer(builtin_registry());
  std::string text = sample_text(80, 9) + " stage IIb with clear margins";
  for (auto _ : state) benchmark::DoNotOptimize(scorer.classify(text));
}
BENCHMARK(BM_LexicalScore);

BENCHMARK_MAIN();
