#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "csghmm/clustering.hpp"
#include "csghmm/hmm.hpp"
#include "csghmm/subchain.hpp"

namespace csghmm {

/// Step schedule eps_n = a * (b + n)^(-gamma) plus the loop counts.
/// inner_steps is the number of stochastic-gradient steps per block in the
/// uniform-minibatch driver; the stratified driver applies one joint update
/// per iteration and ignores it.
struct SgldConfig {
  double step_a = 1e-4;
  double step_b = 0.0;
  double step_gamma = 0.0;  // in [0, 1]; 0 keeps the step constant
  bool inject_noise = true;
  std::int64_t iterations = 1;
  int inner_steps = 1;
  std::uint64_t seed = 0;

  double step_size(std::int64_t n) const;
  void validate() const;
};

/// How the boundary buffer length is chosen each iteration: re-estimated from
/// the current transition matrix's spectral gap, or pinned.
struct BufferPolicy {
  enum class Mode { Adaptive, Fixed };
  Mode mode = Mode::Adaptive;
  double safety = 1.0;           // multiplier on 1/gap
  std::int64_t fixed_length = 0;

  static BufferPolicy adaptive(double safety = 1.0) {
    return BufferPolicy{Mode::Adaptive, safety, 0};
  }
  static BufferPolicy fixed(std::int64_t buffer_length) {
    return BufferPolicy{Mode::Fixed, 1.0, buffer_length};
  }
};

/// One SGLD update: theta - (eps/2) * grad + Normal(0, eps I) noise when
/// inject_noise is set, plain gradient descent otherwise.
Eigen::VectorXd sgld_step(const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& grad, double step_size,
                          bool inject_noise, std::mt19937_64& rng);

/// ceil(safety / spectral_gap), capped at series_length / 10 (and at least 1).
std::int64_t buffer_from_spectral_gap(const TransitionMatrix& a, double safety,
                                      std::int64_t series_length);

struct TraceRecord {
  std::int64_t iteration = 0;
  double elapsed_seconds = 0.0;  // wall clock since the run started
  HmmParams params;
  double gradient_norm = 0.0;  // of the last minibatch gradient this iteration
  std::vector<std::int64_t> sampled_centers;
};

struct SamplerTrace {
  std::vector<TraceRecord> records;
  bool aborted = false;
  std::string abort_message;
};

/// Uniform-minibatch driver. Each iteration re-estimates the buffer from the
/// current transition matrix (unless the policy pins it), draws one
/// gap-separated subsample shared by both blocks, runs inner_steps updates of
/// the raw transition entries (gradient taken at the column-projected
/// iterate), averages the visited iterates and projects, then does the same
/// for the emission parameters with the transition held at its new value.
SamplerTrace run_sgmcmc(const ObservationSeries& y, const HmmParams& initial,
                        const SgldConfig& config, const SubchainPartition& part,
                        std::int64_t subsample_count,
                        const BufferPolicy& buffer_policy,
                        const PriorSpec& prior);

/// Stratified driver with a fixed buffer: each iteration draws a fresh
/// stratified subsample and applies one joint update to the transition and
/// emission parameters, then projects and clamps.
SamplerTrace run_csgmcmc(const ObservationSeries& y, const HmmParams& initial,
                         const SgldConfig& config, const SubchainPartition& part,
                         const ClusterModel& clusters,
                         const std::vector<std::int64_t>& quotas,
                         const PriorSpec& prior);

/// Uniform transition matrix; Gaussian means from the sorted cluster centroid
/// means when a clustering with K clusters is supplied, otherwise from data
/// quantiles; variances at the overall data variance; Bernoulli probabilities
/// at one half.
HmmParams initial_params(int state_count, EmissionKind kind,
                         const ObservationSeries& y,
                         const ClusterModel* clusters = nullptr);

/// One row per outer iteration: iteration, elapsed_seconds, A row-major,
/// flattened emission parameters, gradient norm. zero_elapsed_column writes
/// 0 in place of the wall-clock column so the file is byte-reproducible.
void write_trace_csv(const SamplerTrace& trace, std::ostream& out,
                     bool zero_elapsed_column);

/// Per-iteration wall-clock column only (iteration, elapsed_seconds).
void write_timing_csv(const SamplerTrace& trace, std::ostream& out);

/// Parses a trace written by write_trace_csv back into parameter snapshots.
/// The emission family of `reference` fixes the layout.
SamplerTrace read_trace_csv(std::istream& in, int state_count,
                            const EmissionFamily& reference);

}  // namespace csghmm
