#include "onco/reference.hpp"

namespace onco {

const std::vector<ReferenceSystem>& reference_systems() {
  static const std::vector<ReferenceSystem> systems = {
      {"Onco-Ret (S)",
       {{{0.85, 0.86},
         {0.65, 0.76},
         {0.37, 0.77},
         {0.74, 0.84},
         {0.52, 0.67},
         {0.61, 0.69},
         {0.70, 0.73},
         {0.42, 0.63},
         {0.64, 0.69},
         {0.70, 0.76},
         {0.59, 0.72},
         {0.62, 0.66},
         {0.64, 0.66}}},
       0.62,
       0.73},
      {"Onco-Ret (O)",
       {{{0.81, 0.78},
         {0.68, 0.71},
         {0.42, 0.72},
         {0.69, 0.81},
         {0.69, 0.62},
         {0.75, 0.69},
         {0.84, 0.77},
         {0.57, 0.58},
         {0.78, 0.66},
         {0.64, 0.74},
         {0.59, 0.76},
         {0.70, 0.53},
         {0.77, 0.57}}},
       0.69,
       0.69},
      {"PubMedBERT",
       {{{0.41, 0.50},
         {0.41, 0.50},
         {0.42, 0.56},
         {0.47, 0.54},
         {0.39, 0.43},
         {0.46, 0.48},
         {0.51, 0.57},
         {0.35, 0.45},
         {0.36, 0.64},
         {0.49, 0.49},
         {0.38, 0.36},
         {0.44, 0.51},
         {0.45, 0.56}}},
       0.43,
       0.51},
      {"Onco-Ret (L)",
       {{{0.62, 0.75},
         {0.61, 0.75},
         {0.63, 0.83},
         {0.71, 0.96},
         {0.58, 0.64},
         {0.68, 0.72},
         {0.77, 0.85},
         {0.53, 0.67},
         {0.54, 0.95},
         {0.73, 0.73},
         {0.57, 0.54},
         {0.66, 0.77},
         {0.67, 0.84}}},
       0.64,
       0.77},
      {"OpenAI Ada",
       {{{0.59, 0.46},
         {0.40, 0.49},
         {0.40, 0.56},
         {0.29, 0.71},
         {0.28, 0.80},
         {0.22, 0.52},
         {0.38, 0.39},
         {0.24, 0.55},
         {0.35, 0.48},
         {0.29, 0.31},
         {0.42, 0.52},
         {0.08, 0.65},
         {0.13, 0.52}}},
       0.31,
       0.54},
      {"Mistral SFR",
       {{{0.51, 0.39},
         {0.26, 0.32},
         {0.30, 0.41},
         {0.24, 0.59},
         {0.13, 0.47},
         {0.22, 0.52},
         {0.25, 0.26},
         {0.12, 0.27},
         {0.34, 0.46},
         {0.15, 0.17},
         {0.31, 0.38},
         {0.05, 0.38},
         {0.05, 0.21}}},
       0.23,
       0.37},
  };
  return systems;
}

const std::vector<ReferenceLatency>& reference_latencies() {
  static const std::vector<ReferenceLatency> latencies = {
      {"Onco-Ret (Optimized)", 318.0, 0.69}, {"Onco-Ret (Small)", 1200.0, 0.67},
      {"Onco-Ret (Large)", 1140.0, 0.71},    {"OpenAI Ada", 2289.75, 0.52},
      {"Mistral SFR", 5160.0, 0.28},
  };
  return latencies;
}

const std::vector<SweepReferencePoint>& reference_sweep_points() {
  static const std::vector<SweepReferencePoint> points = {
      {"OpenAI Ada", 25, 0.12, 0.39},
      {"OpenAI Ada", 400, 0.75, 0.25},
      {"Mistral SFR", 25, 0.07, 0.46},
      {"Mistral SFR", 400, 0.61, 0.20},
  };
  return points;
}

}  // namespace onco
