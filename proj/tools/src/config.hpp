#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csghmm/clustering.hpp"
#include "csghmm/hmm.hpp"
#include "csghmm/sampler.hpp"

namespace csghmm::tools {

struct DatasetConfig {
  // Builtin dataset name (BD, ID, BERN, RARE2) or empty when reading a CSV.
  std::string name;
  std::string csv_path;
  int csv_column = 0;
  std::int64_t length = 0;  // T; 0 means the builtin's default
};

struct ModelConfig {
  int state_count = 0;  // 0 means: take it from the builtin dataset
  EmissionKind family = EmissionKind::Gaussian;
};

struct PartitionConfig {
  int window_length = 5;
  std::int64_t min_gap = 0;
};

struct PlanConfig {
  bool stratified = false;
  std::int64_t subsample_count = 1;        // uniform S
  int cluster_count = 1;                   // stratified M
  std::vector<std::int64_t> quotas;        // stratified b_m
  WindowPreprocessing preprocessing = WindowPreprocessing::None;
  int restarts = 1;
};

struct SamplerSection {
  std::string algorithm = "csgmcmc";  // or "sgmcmc"
  SgldConfig sgld;
  BufferPolicy buffer = BufferPolicy::adaptive();
};

struct EvalConfig {
  int horizon = 10;
  std::int64_t holdout_length = 2000;
  double level = 0.95;
  std::int64_t cadence = 25;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  ModelConfig model;
  PartitionConfig partition;
  PlanConfig plan;
  SamplerSection sampler;
  EvalConfig eval;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string output_dir = "run";

  void validate() const;
  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::string& path);
};

}  // namespace csghmm::tools
