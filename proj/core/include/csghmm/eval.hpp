#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "csghmm/hmm.hpp"

namespace csghmm {

/// Sum over t of the log density assigned to y_{t+k} by the k-step-ahead
/// predictive mixture under the filtered state distribution at t. The filter
/// starts from the stationary distribution. Higher is better.
double k_step_log_predictive(const HmmParams& params,
                             const ObservationSeries& holdout, int horizon);

/// Normalized filtered state distribution after the whole series.
Eigen::VectorXd filtered_state_distribution(const HmmParams& params,
                                            const ObservationSeries& y);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Equal-tailed interval of the k-step-ahead predictive mixture from the
/// given filtered distribution, by bisection on the mixture CDF (Gaussian)
/// or the exact two-point CDF (Bernoulli).
Interval predictive_interval(const HmmParams& params,
                             const Eigen::VectorXd& filtered, int horizon,
                             double level);

enum class MatrixNorm { Frobenius, Spectral };

double transition_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& ref,
                        MatrixNorm norm = MatrixNorm::Frobenius);

/// Minimum of transition_error over simultaneous row/column relabelings.
double transition_error_permutation_aware(const Eigen::MatrixXd& a,
                                          const Eigen::MatrixXd& ref,
                                          MatrixNorm norm = MatrixNorm::Frobenius);

struct VarianceSummary {
  Eigen::VectorXd per_component;  // unbiased sample variance, flat layout
  double mean_variance = 0.0;
};

/// Draws `reps` estimates with per-rep derived seeds at a fixed parameter
/// point and reports the componentwise sample variance. Reps may fan out over
/// `threads` workers; the reduction order is fixed, so the result does not
/// depend on the thread count.
VarianceSummary gradient_variance_mc(
    const std::function<GradientEstimate(std::uint64_t)>& draw_estimate,
    int reps, std::uint64_t master_seed, int threads = 1);

/// Closed-form posterior for the known-variance Gaussian chain with states
/// read off by nearest-emission-mean thresholding (ties to the lower state).
struct ConjugateOracleSpec {
  double emission_variance = 1.0;        // known sigma^2
  Eigen::VectorXd prior_means;           // Normal prior mean per state
  Eigen::VectorXd prior_variances;       // Normal prior variance per state
  Eigen::MatrixXd dirichlet_prior;       // column j = prior for column j of A
  Eigen::VectorXd assignment_means;      // thresholding reference per state
};

struct ConjugateSufficientStats {
  Eigen::VectorXd counts;             // N_j
  Eigen::VectorXd sums;               // sum of observations in state j
  Eigen::MatrixXd transition_counts;  // (i, j) = transitions from j to i
};

struct ConjugatePosterior {
  Eigen::VectorXd mean_posterior_means;
  Eigen::VectorXd mean_posterior_variances;
  Eigen::MatrixXd dirichlet_posterior;  // column j parameters
  ConjugateSufficientStats stats;
};

ConjugatePosterior conjugate_oracle(const ObservationSeries& y,
                                    const ConjugateOracleSpec& spec);

/// Same update from disjoint contiguous segments; transitions are only
/// counted inside a segment, never across the gaps between them.
ConjugatePosterior conjugate_oracle_segments(
    const std::vector<std::vector<double>>& segments,
    const ConjugateOracleSpec& spec);

}  // namespace csghmm
