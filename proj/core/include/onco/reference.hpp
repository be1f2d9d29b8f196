#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "onco/concepts.hpp"

namespace onco {

// Published per-concept precision/recall for the six reference systems.
// Values are report annotations only; they never feed any computation path.
struct ReferenceSystem {
  std::string name;
  // (precision, recall) per concept, in enumeration order.
  std::array<std::pair<double, double>, kConceptCount> per_concept;
  double overall_precision;
  double overall_recall;
};

const std::vector<ReferenceSystem>& reference_systems();

struct ReferenceLatency {
  std::string name;
  double seconds_per_patient;
  double f1;
};

const std::vector<ReferenceLatency>& reference_latencies();

// Published k-sweep endpoints for the embedding baselines.
struct SweepReferencePoint {
  std::string system;
  size_t k;
  double recall;
  double precision;
};

const std::vector<SweepReferencePoint>& reference_sweep_points();

}  // namespace onco
