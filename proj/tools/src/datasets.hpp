#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csghmm/hmm.hpp"

namespace csghmm::tools {

/// True parameters of a builtin dataset: BD (4 balanced Gaussian states),
/// ID (5 states with an imbalanced stationary law), BERN (2 Bernoulli
/// states), RARE2 (2 states, one visited about once in a thousand steps).
HmmParams builtin_params(const std::string& name);

/// Default series length for a builtin dataset.
std::int64_t builtin_default_length(const std::string& name);

std::string params_to_json(const HmmParams& params);
HmmParams params_from_json(const std::string& text);

/// Writes observations.csv (one value per line), latent.csv (one 1-based
/// state per line, x_0 first) and true_params.json into out_dir. Returns the
/// paths written.
std::vector<std::string> generate_dataset(const std::string& name,
                                          std::int64_t length,
                                          std::uint64_t seed,
                                          const std::string& out_dir);

struct IngestReport {
  std::vector<double> values;
  std::int64_t skipped_nonfinite = 0;
  std::int64_t window_start = 1;  // 1-based index of the selected window
};

/// Reads a numeric column (0-based) from a CSV. The first line may be a
/// non-numeric header; any later non-numeric cell raises ParseError with its
/// line number. Non-finite values are skipped and counted. When more than
/// max_length values remain, a uniformly random contiguous window of that
/// length is selected with the given seed.
IngestReport ingest_csv(const std::string& path, int column,
                        std::int64_t max_length, std::uint64_t seed);

void write_values_csv(const std::vector<double>& values,
                      const std::string& path);

}  // namespace csghmm::tools
