#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "csghmm/eval.hpp"

namespace csghmm::tools {

struct RunOutputs {
  std::vector<std::string> files;
  std::string output_dir;
};

/// Executes the configured pipeline: resolve data, partition, cluster when
/// stratified, sample, evaluate at the configured cadence. Writes trace.csv
/// (byte-reproducible; the elapsed column is zeroed), timing.csv (wall clock),
/// metrics.csv, intervals.csv, config.json and clusters.json (stratified
/// runs). Throws on any failure after writing whatever diagnostics exist.
RunOutputs run_experiment(const ExperimentConfig& config);

/// Recomputes metrics.csv and intervals.csv from a saved run directory
/// (config.json + trace.csv).
RunOutputs eval_trace(const std::string& run_dir);

/// For every (S, L) grid cell, Monte Carlo variance of the uniform estimator
/// at subsample size S and of the stratified estimator at the same total
/// (equal per-cluster quotas). Writes long-format rows
/// (estimator,S,L,mean_variance) plus a per-component companion file.
RunOutputs variance_sweep(const ExperimentConfig& config,
                          const std::vector<std::int64_t>& s_grid,
                          const std::vector<int>& l_grid, int reps,
                          const std::string& out_dir,
                          const std::optional<std::string>& params_json_path);

}  // namespace csghmm::tools
