// onco: pipeline entry point. One stage per invocation; shared --config file.
//
// Exit codes: 1 usage, 2 config, 3 I/O, 4 remote-service failure,
// 5 validation.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "onco/concepts.hpp"
#include "onco/config.hpp"
#include "onco/corpus.hpp"
#include "onco/embedding.hpp"
#include "onco/errors.hpp"
#include "onco/evaluation.hpp"
#include "onco/io.hpp"
#include "onco/labeling.hpp"
#include "onco/llm.hpp"
#include "onco/retrieval.hpp"
#include "onco/scoring.hpp"
#include "onco/synth.hpp"

namespace fs = std::filesystem;
using namespace onco;

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<size_t> per_concept_k;
  std::optional<size_t> k;
  std::string scorer = "lexical";
  std::string mock_llm;
  bool dry_run = false;
  std::string output;
};

PipelineConfig load_config(const CommonOpts& opts) {
  PipelineConfig cfg;
  if (!opts.config_path.empty()) cfg = PipelineConfig::load(opts.config_path);
  if (opts.seed) cfg.rng_seed = *opts.seed;
  if (opts.per_concept_k) cfg.per_concept_k = *opts.per_concept_k;
  return cfg;
}

fs::path out_dir(const PipelineConfig& cfg) {
  return cfg.output_dir ? *cfg.output_dir : fs::path("out");
}

fs::path resolve_output(const CommonOpts& opts, const PipelineConfig& cfg,
                        const std::string& default_name) {
  if (!opts.output.empty()) return opts.output;
  return out_dir(cfg) / default_name;
}

void require_exists(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw io_error(what + " not found: " + path.string());
}

ConceptRegistry resolve_registry(const PipelineConfig& cfg) {
  if (cfg.registry_path) return load_registry(*cfg.registry_path);
  return builtin_registry();
}

std::map<ConceptId, QuerySet> resolve_query_sets(const PipelineConfig& cfg,
                                                 const ConceptRegistry& registry) {
  if (cfg.query_sets_path) return static_query_sets(registry, *cfg.query_sets_path);
  return seed_query_sets(registry);
}

std::unique_ptr<LlmClient> resolve_llm(const CommonOpts& opts, const PipelineConfig& cfg) {
  if (!opts.mock_llm.empty()) {
    require_exists(opts.mock_llm, "mock LLM script");
    return make_mock_llm(opts.mock_llm);
  }
  if (cfg.llm.endpoint.empty())
    throw config_error("no LLM configured: set llm.endpoint in the config or pass --mock-llm");
  return std::make_unique<HttpLlmClient>(cfg.llm);
}

std::unique_ptr<ConceptScorer> resolve_scorer(const CommonOpts& opts,
                                              const ConceptRegistry& registry) {
  if (opts.scorer == "lexical") return std::make_unique<LexicalScorer>(registry);
  const std::string prefix = "external:";
  if (opts.scorer.rfind(prefix, 0) == 0) {
    std::string url = opts.scorer.substr(prefix.size());
    if (url.empty()) throw usage_error("--scorer external: requires a URL");
    return std::make_unique<ExternalScorer>(url);
  }
  throw usage_error("unknown scorer: " + opts.scorer + " (expected lexical or external:URL)");
}

bool announce_plan(const CommonOpts& opts, const std::string& plan) {
  if (opts.dry_run) {
    std::cout << "dry-run: " << plan << "\n";
    return true;
  }
  return false;
}

fs::path chunks_path(const PipelineConfig& cfg) { return out_dir(cfg) / "chunks.jsonl"; }

std::vector<Chunk> load_pipeline_chunks(const PipelineConfig& cfg) {
  fs::path path = chunks_path(cfg);
  require_exists(path, "chunk file (run `onco chunk` first)");
  return read_chunks(path);
}

// --- subcommands -----------------------------------------------------------

int cmd_ingest(const CommonOpts& opts, const std::string& input) {
  PipelineConfig cfg = load_config(opts);
  fs::path in = input.empty() && cfg.corpus_path ? *cfg.corpus_path : fs::path(input);
  if (in.empty()) throw usage_error("ingest: provide an input file or corpus_path in config");
  fs::path out = resolve_output(opts, cfg, "notes.jsonl");
  if (announce_plan(opts, "ingest " + in.string() + " -> " + out.string())) return 0;
  require_exists(in, "corpus file");
  auto notes = ingest_notes(in);
  write_notes(out, notes);
  std::cout << "ingested " << notes.size() << " notes -> " << out.string() << "\n";
  return 0;
}

int cmd_chunk(const CommonOpts& opts, const std::string& input, const std::string& truth_path,
              const std::string& gold_out) {
  PipelineConfig cfg = load_config(opts);
  fs::path in = input.empty()
                    ? (cfg.corpus_path ? *cfg.corpus_path : out_dir(cfg) / "notes.jsonl")
                    : fs::path(input);
  fs::path out = resolve_output(opts, cfg, "chunks.jsonl");
  if (announce_plan(opts, "chunk " + in.string() + " -> " + out.string())) return 0;
  require_exists(in, "notes file");
  auto notes = ingest_notes(in);
  auto chunks = chunk_corpus(notes, cfg.chunking);
  write_chunks(out, chunks);
  std::cout << "chunked " << notes.size() << " notes into " << chunks.size() << " chunks -> "
            << out.string() << "\n";
  if (!truth_path.empty()) {
    require_exists(truth_path, "truth file");
    auto truth = read_truth(truth_path);
    auto gold = truth_to_gold(truth, chunks);
    fs::path gpath = gold_out.empty() ? out_dir(cfg) / "gold.jsonl" : fs::path(gold_out);
    write_gold(gpath, gold);
    std::cout << "wrote " << gold.size() << " gold judgments -> " << gpath.string() << "\n";
  }
  return 0;
}

int cmd_expand(const CommonOpts& opts, size_t count) {
  PipelineConfig cfg = load_config(opts);
  fs::path out = resolve_output(opts, cfg, "query_sets.jsonl");
  if (announce_plan(opts, "expand 13 concepts x " + std::to_string(count) + " queries -> " +
                              out.string()))
    return 0;
  ConceptRegistry registry = resolve_registry(cfg);
  auto llm = resolve_llm(opts, cfg);
  std::map<ConceptId, QuerySet> sets;
  for (const auto& [id, def] : registry) sets[id] = expand_queries(def, *llm, count);
  write_query_sets(out, sets);
  std::cout << "expanded queries for " << sets.size() << " concepts -> " << out.string() << "\n";
  return 0;
}

int cmd_index(const CommonOpts& opts) {
  PipelineConfig cfg = load_config(opts);
  fs::path out = cfg.index_cache_path ? *cfg.index_cache_path
                                      : resolve_output(opts, cfg, "index.bin");
  if (!opts.output.empty()) out = opts.output;
  if (announce_plan(opts, "index " + chunks_path(cfg).string() + " -> " + out.string()))
    return 0;
  auto chunks = load_pipeline_chunks(cfg);
  auto embedder = make_embedder(cfg.embedder);
  ChunkIndex index = build_index(chunks, *embedder);
  save_index(index, out);
  std::cout << "indexed " << index.entries.size() << " chunks (dim " << index.dim << ") -> "
            << out.string() << "\n";
  return 0;
}

int cmd_harvest(const CommonOpts& opts) {
  PipelineConfig cfg = load_config(opts);
  fs::path index_path =
      cfg.index_cache_path ? *cfg.index_cache_path : out_dir(cfg) / "index.bin";
  fs::path out = resolve_output(opts, cfg, "candidates.jsonl");
  if (announce_plan(opts, "harvest top-" + std::to_string(cfg.per_concept_k) +
                              " per concept from " + index_path.string() + " -> " +
                              out.string()))
    return 0;
  require_exists(index_path, "index (run `onco index` first)");
  ChunkIndex index = load_index(index_path);
  auto embedder = make_embedder(cfg.embedder);
  if (embedder->fingerprint() != index.embedder_fingerprint)
    throw validation_error("index embedder fingerprint mismatch: index has '" +
                           index.embedder_fingerprint + "', config gives '" +
                           embedder->fingerprint() + "'");
  ConceptRegistry registry = resolve_registry(cfg);
  auto query_sets = resolve_query_sets(cfg, registry);
  CandidateSet candidates = harvest_candidates(index, query_sets, *embedder, cfg.per_concept_k);
  write_candidates(out, candidates);
  std::cout << "harvested " << candidates.pairs.size() << " candidates -> " << out.string()
            << "\n";
  return 0;
}

int cmd_label(const CommonOpts& opts, const std::string& prompts_dir) {
  PipelineConfig cfg = load_config(opts);
  fs::path cand_path = out_dir(cfg) / "candidates.jsonl";
  fs::path checkpoint = out_dir(cfg) / "labels.checkpoint.jsonl";
  fs::path out = resolve_output(opts, cfg, "labels.jsonl");
  if (announce_plan(opts, "label " + cand_path.string() + " (checkpoint " +
                              checkpoint.string() + ") -> " + out.string()))
    return 0;
  require_exists(cand_path, "candidate file (run `onco harvest` first)");
  auto chunks = load_pipeline_chunks(cfg);
  CandidateSet candidates = read_candidates(cand_path);
  ConceptRegistry registry = resolve_registry(cfg);
  auto llm = resolve_llm(opts, cfg);
  PromptTemplates templates =
      prompts_dir.empty() ? PromptTemplates::defaults() : PromptTemplates::load(prompts_dir);
  auto labels = run_labeling(candidates, chunks, registry, *llm, checkpoint, templates);
  write_labels(out, labels);
  std::cout << "labeled " << labels.size() << " pairs -> " << out.string() << "\n";
  return 0;
}

int cmd_emit_train(const CommonOpts& opts, const std::string& mode_name) {
  PipelineConfig cfg = load_config(opts);
  fs::path labels_path = out_dir(cfg) / "labels.jsonl";
  fs::path out = resolve_output(opts, cfg, "train.jsonl");
  TrainingMode mode;
  if (mode_name == "single") mode = TrainingMode::single_concept;
  else if (mode_name == "multi") mode = TrainingMode::multi_concept;
  else throw usage_error("emit-train: --mode must be single or multi");
  if (announce_plan(opts, "emit-train (" + mode_name + ") " + labels_path.string() + " -> " +
                              out.string()))
    return 0;
  require_exists(labels_path, "label file (run `onco label` first)");
  auto labels = read_labels(labels_path);
  auto chunks = load_pipeline_chunks(cfg);
  size_t n = emit_training_set(labels, chunks, mode, out);
  std::cout << "emitted " << n << " training records -> " << out.string() << "\n";
  return 0;
}

int cmd_score(const CommonOpts& opts) {
  PipelineConfig cfg = load_config(opts);
  fs::path out = resolve_output(opts, cfg, "predictions.jsonl");
  if (announce_plan(opts, "score (" + opts.scorer + ") " + chunks_path(cfg).string() + " -> " +
                              out.string()))
    return 0;
  ConceptRegistry registry = resolve_registry(cfg);
  auto scorer = resolve_scorer(opts, registry);  // reject bad --scorer before touching inputs
  auto chunks = load_pipeline_chunks(cfg);
  auto predictions = classify_corpus(*scorer, chunks);
  write_predictions(out, predictions);
  std::cout << "scored " << chunks.size() << " chunks (" << predictions.size()
            << " predictions) -> " << out.string() << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& gold_path_arg, bool with_reference) {
  PipelineConfig cfg = load_config(opts);
  fs::path pred_path = out_dir(cfg) / "predictions.jsonl";
  fs::path gold_path = gold_path_arg.empty() ? out_dir(cfg) / "gold.jsonl"
                                             : fs::path(gold_path_arg);
  fs::path base = opts.output.empty() ? out_dir(cfg) / "comparison" : fs::path(opts.output);
  if (announce_plan(opts, "eval " + pred_path.string() + " against " + gold_path.string() +
                              " -> " + base.string() + ".{csv,txt}"))
    return 0;
  require_exists(pred_path, "prediction file (run `onco score` first)");
  require_exists(gold_path, "gold file");
  auto predictions = read_predictions(pred_path);
  auto gold = read_gold(gold_path);
  Regime regime = opts.k ? Regime::top_k : Regime::classify_all;
  MetricsReport report = compute_report(predictions, gold, regime, opts.k, opts.scorer);
  render_comparison({report}, {}, base, with_reference);
  auto fmt = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return std::string(buf);
  };
  std::cout << "overall precision=" << fmt(report.overall_precision)
            << " recall=" << fmt(report.overall_recall) << " f1=" << fmt(report.overall_f1)
            << " -> " << base.string() << ".{csv,txt}\n";
  return 0;
}

int cmd_sweep(const CommonOpts& opts, std::vector<size_t> ks, const std::string& gold_path_arg,
              bool with_reference) {
  PipelineConfig cfg = load_config(opts);
  if (ks.empty()) ks = {25, 50, 100, 200, 300, 400};
  fs::path index_path =
      cfg.index_cache_path ? *cfg.index_cache_path : out_dir(cfg) / "index.bin";
  fs::path gold_path = gold_path_arg.empty() ? out_dir(cfg) / "gold.jsonl"
                                             : fs::path(gold_path_arg);
  fs::path out = resolve_output(opts, cfg, "sweep.csv");
  if (announce_plan(opts, "sweep ks over " + index_path.string() + " -> " + out.string()))
    return 0;
  require_exists(index_path, "index (run `onco index` first)");
  require_exists(gold_path, "gold file");
  ChunkIndex index = load_index(index_path);
  auto embedder = make_embedder(cfg.embedder);
  ConceptRegistry registry = resolve_registry(cfg);
  auto query_sets = resolve_query_sets(cfg, registry);
  size_t max_k = ks.back();
  std::map<ConceptId, RankedList> ranked;
  for (const auto& [id, qs] : query_sets)
    ranked[id] = assign_chunks_to_concept(index, qs, *embedder, max_k);
  auto gold = read_gold(gold_path);
  SweepResult result = k_sweep_eval(ranked, gold, ks);
  render_sweep(result, out, with_reference);
  std::cout << "swept " << ks.size() << " cutoffs -> " << out.string() << "\n";
  return 0;
}

int cmd_bench(const CommonOpts& opts, bool with_reference) {
  PipelineConfig cfg = load_config(opts);
  fs::path out = resolve_output(opts, cfg, "latency.csv");
  if (announce_plan(opts, "bench (" + opts.scorer + ") " + chunks_path(cfg).string() + " -> " +
                              out.string()))
    return 0;
  ConceptRegistry registry = resolve_registry(cfg);
  auto scorer = resolve_scorer(opts, registry);  // reject bad --scorer before touching inputs
  auto chunks = load_pipeline_chunks(cfg);
  LatencyReport report = bench_latency(*scorer, chunks);
  render_latency(report, out, with_reference);
  std::cout << "benchmarked " << report.patients << " patients: mean " << report.mean_seconds
            << "s p50 " << report.p50_seconds << "s p95 " << report.p95_seconds << "s -> "
            << out.string() << "\n";
  return 0;
}

int cmd_synth(const CommonOpts& opts, size_t patients, size_t notes, double rate,
              double distractors) {
  PipelineConfig cfg = load_config(opts);
  SynthSpec spec = SynthSpec::uniform(patients, notes, rate, distractors, cfg.rng_seed);
  fs::path notes_out = resolve_output(opts, cfg, "notes.jsonl");
  fs::path truth_out = out_dir(cfg) / "truth.jsonl";
  if (announce_plan(opts, "synth " + std::to_string(patients) + " patients x " +
                              std::to_string(notes) + " notes (seed " +
                              std::to_string(spec.rng_seed) + ") -> " + notes_out.string() +
                              ", " + truth_out.string()))
    return 0;
  SynthResult result = generate_corpus(spec);
  write_notes(notes_out, result.notes);
  write_truth(truth_out, result.truth);
  std::cout << "generated " << result.notes.size() << " notes with " << result.truth.size()
            << " planted mentions -> " << notes_out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"oncology concept retrieval pipeline"};
  app.require_subcommand(1);

  CommonOpts opts;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "pipeline config file (JSON)");
    sub->add_option("--seed", opts.seed, "RNG seed override");
    sub->add_option("--per-concept-k", opts.per_concept_k, "candidates per concept");
    sub->add_option("--k", opts.k, "evaluation cutoff k");
    sub->add_option("--scorer", opts.scorer, "lexical or external:URL");
    sub->add_option("--mock-llm", opts.mock_llm, "scripted mock LLM response file");
    sub->add_flag("--dry-run", opts.dry_run, "print the execution plan and exit");
    sub->add_option("--output", opts.output, "output path override");
  };

  std::string input, truth_path, gold_out, prompts_dir, mode_name = "multi", gold_path;
  size_t expand_count = 30, patients = 20, notes_per_patient = 5;
  double plant_rate = 0.35, distractor_rate = 0.0;
  std::vector<size_t> ks;
  bool with_reference = false;

  auto* ingest = app.add_subcommand("ingest", "validate and normalize a notes file");
  add_common(ingest);
  ingest->add_option("input", input, "notes JSONL file");

  auto* chunk = app.add_subcommand("chunk", "split notes into offset-addressed chunks");
  add_common(chunk);
  chunk->add_option("input", input, "notes JSONL file");
  chunk->add_option("--truth", truth_path, "planted-truth file; also emit gold judgments");
  chunk->add_option("--output-gold", gold_out, "gold output path (with --truth)");

  auto* expand = app.add_subcommand("expand", "LLM query expansion for every concept");
  add_common(expand);
  expand->add_option("--count", expand_count, "queries per concept");

  auto* index = app.add_subcommand("index", "embed chunks and build the exact-scan index");
  add_common(index);

  auto* harvest = app.add_subcommand("harvest", "top-k labeling candidates per concept");
  add_common(harvest);

  auto* label = app.add_subcommand("label", "CoT label + regex filter + self-verify");
  add_common(label);
  label->add_option("--prompts", prompts_dir, "prompt template directory");

  auto* emit = app.add_subcommand("emit-train", "write the training set from labels");
  add_common(emit);
  emit->add_option("--mode", mode_name, "single or multi (default multi)");

  auto* score = app.add_subcommand("score", "classify every chunk with a concept scorer");
  add_common(score);

  auto* eval = app.add_subcommand("eval", "metrics report against gold judgments");
  add_common(eval);
  eval->add_option("--gold", gold_path, "gold judgments file");
  eval->add_flag("--reference", with_reference, "include published reference rows");

  auto* sweep = app.add_subcommand("sweep", "precision/recall across retrieval cutoffs");
  add_common(sweep);
  sweep->add_option("--ks", ks, "cutoffs, ascending");
  sweep->add_option("--gold", gold_path, "gold judgments file");
  sweep->add_flag("--reference", with_reference, "include published reference rows");

  auto* bench = app.add_subcommand("bench", "per-patient classification latency");
  add_common(bench);
  bench->add_flag("--reference", with_reference, "include published reference rows");

  auto* synth = app.add_subcommand("synth", "generate a seeded synthetic corpus");
  add_common(synth);
  synth->add_option("--patients", patients, "number of patients");
  synth->add_option("--notes-per-patient", notes_per_patient, "notes per patient");
  synth->add_option("--plant-rate", plant_rate, "per-concept planting probability");
  synth->add_option("--distractor-rate", distractor_rate, "distractor sentence probability");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(opts, input);
    if (chunk->parsed()) return cmd_chunk(opts, input, truth_path, gold_out);
    if (expand->parsed()) return cmd_expand(opts, expand_count);
    if (index->parsed()) return cmd_index(opts);
    if (harvest->parsed()) return cmd_harvest(opts);
    if (label->parsed()) return cmd_label(opts, prompts_dir);
    if (emit->parsed()) return cmd_emit_train(opts, mode_name);
    if (score->parsed()) return cmd_score(opts);
    if (eval->parsed()) return cmd_eval(opts, gold_path, with_reference);
    if (sweep->parsed()) return cmd_sweep(opts, ks, gold_path, with_reference);
    if (bench->parsed()) return cmd_bench(opts, with_reference);
    if (synth->parsed()) return cmd_synth(opts, patients, notes_per_patient, plant_rate,
                                          distractor_rate);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  }
  return 1;
}
