#pragma once

#include <cstdint>
#include <vector>

#include "csghmm/hmm.hpp"

namespace csghmm {

class ClusterModel;

/// Partition of y_1..y_T into floor(T/L) disjoint length-L subchains with
/// centers tau_k = ((2k - 1)L + 1) / 2. A trailing remainder shorter than L
/// carries no center (it still feeds boundary buffers and evaluation).
struct SubchainPartition {
  std::int64_t series_length = 0;  // T
  int window_length = 1;           // L, odd
  std::int64_t buffer_length = 0;  // B, observations per side
  std::int64_t min_gap = 0;        // nu, extra separation for uniform draws

  std::int64_t window_count() const { return series_length / window_length; }
  /// 1-based center of window `index` (0-based index).
  std::int64_t center(std::int64_t index) const {
    return ((2 * index + 1) * window_length + 1) / 2;
  }
  std::vector<std::int64_t> centers() const;
};

SubchainPartition partition(std::int64_t series_length, int window_length,
                            std::int64_t buffer_length = 0,
                            std::int64_t min_gap = 0);

/// One subchain with its boundary buffers, all 1-based inclusive indices.
/// Buffers are truncated at the series ends, never padded.
struct BufferedWindow {
  std::int64_t center = 0;
  std::int64_t core_first = 0;
  std::int64_t core_last = 0;
  std::int64_t left_first = 0;   // start of the left buffer
  std::int64_t right_last = 0;   // end of the right buffer
};

BufferedWindow buffered_window(const SubchainPartition& part,
                               std::int64_t window_index);

/// Boundary messages for one window: `forward` is the stationary distribution
/// propagated through the left buffer, `backward` the all-ones vector
/// propagated (reversed) through the right buffer. Both L1-normalized.
struct BoundaryMessages {
  Eigen::VectorXd backward;
  Eigen::VectorXd forward;
};

BoundaryMessages buffered_messages(const HmmParams& params,
                                   const ObservationSeries& y,
                                   const BufferedWindow& window);

/// Contribution of one window to the negative-log-posterior gradient (prior
/// excluded): the negated ratio of the differentiated window product to the
/// window product, evaluated between the two boundary messages. Invariant to
/// positive rescaling of either message.
GradientEstimate window_gradient_term(const HmmParams& params,
                                      const ObservationSeries& y,
                                      std::int64_t core_first,
                                      std::int64_t core_last,
                                      const Eigen::VectorXd& backward_boundary,
                                      const Eigen::VectorXd& forward_boundary);

/// window_gradient_term with buffered messages computed from the window.
GradientEstimate local_grad_term(const HmmParams& params,
                                 const ObservationSeries& y,
                                 const BufferedWindow& window);

/// Sum of every window's term plus the prior gradient.
GradientEstimate full_subseries_gradient(const HmmParams& params,
                                         const ObservationSeries& y,
                                         const SubchainPartition& part,
                                         const PriorSpec& prior);

struct UniformPlan {
  std::int64_t subsample_count = 1;  // S
  std::uint64_t seed = 0;
};

struct StratifiedPlan {
  std::vector<std::int64_t> quotas;  // b_m per cluster
  std::uint64_t seed = 0;
};

/// Draws S distinct centers uniformly, rejecting whole draws until the
/// (core + buffer + min_gap) extents are pairwise disjoint (at most 1000
/// attempts). A census draw (S equal to the window count) is returned
/// directly. Scales the sampled terms by window_count / S.
GradientEstimate uniform_minibatch_gradient(const HmmParams& params,
                                            const ObservationSeries& y,
                                            const SubchainPartition& part,
                                            const UniformPlan& plan,
                                            const PriorSpec& prior);

/// Draws quotas[m] centers without replacement from each cluster (no gap
/// condition) and rescales every cluster's sum by n_m / b_m.
GradientEstimate stratified_gradient(const HmmParams& params,
                                     const ObservationSeries& y,
                                     const SubchainPartition& part,
                                     const ClusterModel& clusters,
                                     const StratifiedPlan& plan,
                                     const PriorSpec& prior);

}  // namespace csghmm
