#include "onco/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "onco/errors.hpp"
#include "onco/io.hpp"
#include "onco/reference.hpp"

namespace onco {

using nlohmann::json;

std::string to_string(Regime regime) {
  return regime == Regime::top_k ? "top-k" : "classify-all";
}

void write_gold(const std::filesystem::path& path, const std::vector<GoldAnnotation>& gold) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& g : gold) {
      json rec;
      rec["chunk_id"] = g.chunk_id;
      rec["concept_id"] = to_string(g.concept_id);
      rec["relevant"] = g.relevant;
      if (g.annotator) rec["annotator"] = *g.annotator;
      out << rec.dump() << "\n";
    }
  });
}

std::vector<GoldAnnotation> read_gold(const std::filesystem::path& path) {
  std::vector<GoldAnnotation> gold;
  std::set<std::pair<std::string, std::string>> seen;
  for_each_line(path, [&](const std::string& line, size_t lineno) {
    if (line.empty()) return;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw validation_error("gold line " + std::to_string(lineno) + ": " + e.what());
    }
    GoldAnnotation g;
    g.chunk_id = rec.at("chunk_id").get<std::string>();
    auto id = concept_from_string(rec.at("concept_id").get<std::string>());
    if (!id) throw validation_error("gold line " + std::to_string(lineno) + ": unknown concept_id");
    g.concept_id = *id;
    g.relevant = rec.at("relevant").get<bool>();
    if (rec.contains("annotator")) g.annotator = rec["annotator"].get<std::string>();
    if (!seen.insert({g.chunk_id, to_string(g.concept_id)}).second)
      throw validation_error("duplicate gold judgment for (" + g.chunk_id + ", " +
                             to_string(g.concept_id) + ")");
    gold.push_back(std::move(g));
  });
  return gold;
}

std::vector<GoldCandidate> build_gold_candidates(const std::vector<Chunk>& test_chunks,
                                                 const std::map<ConceptId, QuerySet>& query_sets,
                                                 Embedder& embedder, uint64_t rng_seed) {
  // Group chunks per patient, preserving corpus order.
  std::vector<std::string> patient_order;
  std::map<std::string, std::vector<const Chunk*>> by_patient;
  for (const auto& c : test_chunks) {
    if (!by_patient.count(c.patient_id)) patient_order.push_back(c.patient_id);
    by_patient[c.patient_id].push_back(&c);
  }

  std::vector<GoldCandidate> candidates;
  std::mt19937_64 rng(rng_seed);
  for (const auto& patient_id : patient_order) {
    const auto& chunks = by_patient[patient_id];
    if (chunks.size() < 4) {
      std::cerr << "warning: patient " << patient_id << " has " << chunks.size()
                << " chunks (< 4); skipped\n";
      continue;
    }
    // Embed this patient's chunks once.
    std::vector<std::string> texts;
    for (const Chunk* c : chunks) texts.push_back(c->text);
    auto chunk_vecs = embedder.embed(texts);

    for (ConceptId concept_id : all_concepts()) {
      auto qs_it = query_sets.find(concept_id);
      if (qs_it == query_sets.end())
        throw validation_error("build_gold_candidates: missing query set for " +
                               to_string(concept_id));
      auto query_vecs = embedder.embed(qs_it->second.queries);

      std::vector<std::pair<double, std::string>> scored;
      for (size_t i = 0; i < chunks.size(); ++i) {
        double best = 2.0;
        for (const auto& qv : query_vecs)
          best = std::min(best, cosine_distance(qv, chunk_vecs[i]));
        scored.emplace_back(best, chunks[i]->chunk_id);
      }
      std::sort(scored.begin(), scored.end());

      std::set<std::string> taken;
      for (size_t i = 0; i < 2; ++i) {
        candidates.push_back({patient_id, concept_id, scored[i].second, Selection::similar});
        taken.insert(scored[i].second);
      }
      // 2 uniform-random distinct chunks not already selected.
      std::vector<std::string> pool;
      for (const Chunk* c : chunks)
        if (!taken.count(c->chunk_id)) pool.push_back(c->chunk_id);
      for (size_t i = 0; i < 2; ++i) {
        std::uniform_int_distribution<size_t> dist(0, pool.size() - 1);
        size_t pick = dist(rng);
        candidates.push_back({patient_id, concept_id, pool[pick], Selection::random_pick});
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
      }
    }
  }
  return candidates;
}

ConfusionCounts compute_confusion(const std::vector<Prediction>& predictions,
                                  const std::vector<GoldAnnotation>& gold,
                                  ConceptId concept_id) {
  std::unordered_map<std::string, bool> judged;  // chunk_id -> relevant
  for (const auto& g : gold)
    if (g.concept_id == concept_id) judged[g.chunk_id] = g.relevant;

  std::unordered_map<std::string, bool> predicted;  // chunk_id -> predicted flag
  for (const auto& p : predictions) {
    if (p.concept_id != concept_id) continue;
    if (!judged.count(p.chunk_id)) continue;  // unjudged pairs are excluded
    predicted[p.chunk_id] = p.predicted;
  }

  ConfusionCounts counts;
  for (const auto& [chunk_id, relevant] : judged) {
    auto it = predicted.find(chunk_id);
    bool pred = it != predicted.end() && it->second;
    if (pred && relevant) ++counts.tp;
    else if (pred && !relevant) ++counts.fp;
    else if (!pred && relevant) ++counts.fn;
    else ++counts.tn;
  }
  return counts;
}

namespace {

ConceptMetrics metrics_from_counts(ConceptId id, const ConfusionCounts& c) {
  ConceptMetrics m;
  m.concept_id = id;
  if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / (c.tp + c.fp);
  if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / (c.tp + c.fn);
  if (m.precision && m.recall && (*m.precision + *m.recall) > 0)
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  return m;
}

std::optional<double> macro_mean(const std::vector<std::optional<double>>& values) {
  double sum = 0;
  size_t n = 0;
  for (const auto& v : values)
    if (v) {
      sum += *v;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::string fmt(const std::optional<double>& v, int precision = 3) {
  if (!v) return "n/a";
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << *v;
  return out.str();
}

}  // namespace

MetricsReport compute_report(const std::vector<Prediction>& predictions,
                             const std::vector<GoldAnnotation>& gold, Regime regime,
                             std::optional<size_t> k, const std::string& scorer_name) {
  if (gold.empty()) throw validation_error("compute_report: gold set is empty");
  MetricsReport report;
  report.regime = regime;
  report.k = k;
  report.scorer_name = scorer_name;

  std::vector<std::optional<double>> ps, rs, f1s;
  size_t judged_total = 0;
  for (ConceptId id : all_concepts()) {
    auto counts = compute_confusion(predictions, gold, id);
    judged_total += counts.judged();
    auto m = metrics_from_counts(id, counts);
    ps.push_back(m.precision);
    rs.push_back(m.recall);
    f1s.push_back(m.f1);
    report.per_concept.push_back(m);
  }
  if (judged_total == 0)
    throw validation_error("compute_report: no judged (chunk, concept) pairs");
  report.overall_precision = macro_mean(ps);
  report.overall_recall = macro_mean(rs);
  report.overall_f1 = macro_mean(f1s);
  return report;
}

SweepResult k_sweep_eval(const std::map<ConceptId, RankedList>& ranked,
                         const std::vector<GoldAnnotation>& gold,
                         const std::vector<size_t>& ks) {
  if (!std::is_sorted(ks.begin(), ks.end()))
    throw validation_error("k_sweep_eval: ks must be ascending");

  SweepResult result;
  for (const auto& [concept_id, list] : ranked) {
    std::unordered_map<std::string, bool> judged;
    size_t relevant_total = 0;
    for (const auto& g : gold)
      if (g.concept_id == concept_id) {
        judged[g.chunk_id] = g.relevant;
        if (g.relevant) ++relevant_total;
      }

    std::vector<SweepPoint> points;
    for (size_t k : ks) {
      size_t take = std::min(k, list.entries.size());
      size_t tp = 0, judged_retrieved = 0;
      for (size_t i = 0; i < take; ++i) {
        auto it = judged.find(list.entries[i].first);
        if (it == judged.end()) continue;
        ++judged_retrieved;
        if (it->second) ++tp;
      }
      SweepPoint point;
      point.k = k;
      if (judged_retrieved > 0)
        point.precision = static_cast<double>(tp) / static_cast<double>(judged_retrieved);
      if (relevant_total > 0)
        point.recall = static_cast<double>(tp) / static_cast<double>(relevant_total);
      points.push_back(point);
    }
    result.per_concept[concept_id] = std::move(points);
  }

  for (size_t i = 0; i < ks.size(); ++i) {
    std::vector<std::optional<double>> ps, rs;
    for (const auto& [concept_id, points] : result.per_concept) {
      ps.push_back(points[i].precision);
      rs.push_back(points[i].recall);
    }
    SweepPoint overall;
    overall.k = ks[i];
    overall.precision = macro_mean(ps);
    overall.recall = macro_mean(rs);
    result.overall.push_back(overall);
  }
  return result;
}

void render_sweep(const SweepResult& result, const std::filesystem::path& csv_path,
                  bool include_reference) {
  atomic_write(csv_path, [&](std::ostream& out) {
    out << "series,k,precision,recall\n";
    for (const auto& [concept_id, points] : result.per_concept)
      for (const auto& p : points)
        out << to_string(concept_id) << "," << p.k << "," << fmt(p.precision) << ","
            << fmt(p.recall) << "\n";
    for (const auto& p : result.overall)
      out << "overall," << p.k << "," << fmt(p.precision) << "," << fmt(p.recall) << "\n";
    if (include_reference) {
      for (const auto& ref : reference_sweep_points())
        out << "reference [published] " << ref.system << "," << ref.k << "," << fmt(ref.precision)
            << "," << fmt(ref.recall) << "\n";
    }
  });
}

LatencyReport bench_latency(ConceptScorer& scorer, const std::vector<Chunk>& chunks) {
  std::vector<std::string> patient_order;
  std::map<std::string, std::vector<const Chunk*>> by_patient;
  for (const auto& c : chunks) {
    if (!by_patient.count(c.patient_id)) patient_order.push_back(c.patient_id);
    by_patient[c.patient_id].push_back(&c);
  }
  if (patient_order.empty()) throw validation_error("bench_latency: no patients");

  LatencyReport report;
  report.scorer_name = scorer.name();
  for (const auto& patient_id : patient_order) {
    auto start = std::chrono::steady_clock::now();
    for (const Chunk* c : by_patient[patient_id]) scorer.classify(c->text);
    auto end = std::chrono::steady_clock::now();
    double seconds = std::chrono::duration<double>(end - start).count();
    report.samples.emplace_back(patient_id, seconds);
  }
  report.patients = report.samples.size();

  std::vector<double> sorted;
  double sum = 0;
  for (const auto& [_, s] : report.samples) {
    sorted.push_back(s);
    sum += s;
  }
  std::sort(sorted.begin(), sorted.end());
  report.mean_seconds = sum / static_cast<double>(sorted.size());
  auto nearest_rank = [&](double q) {
    size_t rank = static_cast<size_t>(std::ceil(q * static_cast<double>(sorted.size())));
    if (rank == 0) rank = 1;
    return sorted[rank - 1];
  };
  report.p50_seconds = nearest_rank(0.50);
  report.p95_seconds = nearest_rank(0.95);
  return report;
}

void render_latency(const LatencyReport& report, const std::filesystem::path& csv_path,
                    bool include_reference) {
  atomic_write(csv_path, [&](std::ostream& out) {
    out << "scorer,patient_id,seconds\n";
    for (const auto& [patient_id, seconds] : report.samples)
      out << report.scorer_name << "," << patient_id << "," << std::fixed
          << std::setprecision(6) << seconds << "\n";
    out << "# summary scorer=" << report.scorer_name << " patients=" << report.patients
        << " mean=" << report.mean_seconds << " p50=" << report.p50_seconds
        << " p95=" << report.p95_seconds;
    if (report.f1) out << " f1=" << *report.f1;
    out << "\n";
    if (include_reference) {
      out << "# reference rows: seconds_per_patient published for comparison\n";
      for (const auto& ref : reference_latencies())
        out << "reference [published] " << ref.name << ",-," << std::fixed << std::setprecision(2)
            << ref.seconds_per_patient << "\n";
    }
  });
}

void render_comparison(const std::vector<MetricsReport>& reports,
                       const std::vector<LatencyReport>& latency_reports,
                       const std::filesystem::path& base_path, bool include_reference) {
  if (reports.empty()) throw validation_error("render_comparison: no reports");

  struct Column {
    std::string name;
    std::vector<std::optional<double>> p, r;  // 13 concepts
    std::optional<double> overall_p, overall_r;
  };
  std::vector<Column> columns;
  for (const auto& report : reports) {
    Column col;
    col.name = report.scorer_name.empty() ? "report" : report.scorer_name;
    col.name += " (" + to_string(report.regime);
    if (report.k) col.name += " k=" + std::to_string(*report.k);
    col.name += ")";
    for (const auto& m : report.per_concept) {
      col.p.push_back(m.precision);
      col.r.push_back(m.recall);
    }
    col.overall_p = report.overall_precision;
    col.overall_r = report.overall_recall;
    columns.push_back(std::move(col));
  }
  if (include_reference) {
    for (const auto& ref : reference_systems()) {
      Column col;
      col.name = "reference [published] " + ref.name;
      for (const auto& [p, r] : ref.per_concept) {
        col.p.push_back(p);
        col.r.push_back(r);
      }
      col.overall_p = ref.overall_precision;
      col.overall_r = ref.overall_recall;
      columns.push_back(std::move(col));
    }
  }

  std::filesystem::path csv_path = base_path;
  csv_path += ".csv";
  atomic_write(csv_path, [&](std::ostream& out) {
    out << "concept";
    for (const auto& col : columns) out << ",\"" << col.name << " p\",\"" << col.name << " r\"";
    out << "\n";
    for (size_t i = 0; i < kConceptCount; ++i) {
      out << to_string(all_concepts()[i]);
      for (const auto& col : columns) out << "," << fmt(col.p[i], 2) << "," << fmt(col.r[i], 2);
      out << "\n";
    }
    out << "overall";
    for (const auto& col : columns)
      out << "," << fmt(col.overall_p, 2) << "," << fmt(col.overall_r, 2);
    out << "\n";
  });

  std::filesystem::path txt_path = base_path;
  txt_path += ".txt";
  atomic_write(txt_path, [&](std::ostream& out) {
    size_t label_width = 24;
    out << std::left << std::setw(static_cast<int>(label_width)) << "concept";
    for (const auto& col : columns)
      out << "  " << std::setw(13) << (col.name.size() > 13 ? col.name.substr(0, 13) : col.name);
    out << "\n";
    auto row = [&](const std::string& label, size_t idx, bool overall) {
      out << std::left << std::setw(static_cast<int>(label_width)) << label;
      for (const auto& col : columns) {
        std::string cell = overall ? fmt(col.overall_p, 2) + "/" + fmt(col.overall_r, 2)
                                   : fmt(col.p[idx], 2) + "/" + fmt(col.r[idx], 2);
        out << "  " << std::setw(13) << cell;
      }
      out << "\n";
    };
    for (size_t i = 0; i < kConceptCount; ++i) row(to_string(all_concepts()[i]), i, false);
    row("overall", 0, true);
    if (!latency_reports.empty() || include_reference) {
      out << "\nlatency (seconds per patient)\n";
      for (const auto& lat : latency_reports) {
        out << std::left << std::setw(static_cast<int>(label_width)) << lat.scorer_name << "  "
            << std::fixed << std::setprecision(3) << lat.mean_seconds << " mean, "
            << lat.p50_seconds << " p50, " << lat.p95_seconds << " p95";
        if (lat.f1) out << ", f1 " << std::setprecision(2) << *lat.f1;
        out << "\n";
      }
      if (include_reference) {
        for (const auto& ref : reference_latencies())
          out << std::left << std::setw(static_cast<int>(label_width))
              << ("reference [published] " + ref.name) << "  " << std::fixed
              << std::setprecision(2) << ref.seconds_per_patient << " s/patient, f1 "
              << ref.f1 << "\n";
      }
    }
  });
}

}  // namespace onco
