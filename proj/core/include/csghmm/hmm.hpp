#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include "csghmm/errors.hpp"

namespace csghmm {

/// Column-stochastic transition matrix: entry (i, j) is the probability of
/// moving to state i from state j. Construction validates entries and column
/// sums (tolerance 1e-8) and renormalizes each column exactly, so a stored
/// matrix always has column sums within 1e-12 of one.
class TransitionMatrix {
 public:
  explicit TransitionMatrix(Eigen::MatrixXd columns_are_distributions);

  /// All entries 1/K.
  static TransitionMatrix uniform(int state_count);

  int state_count() const { return static_cast<int>(matrix_.rows()); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  double operator()(int to, int from) const { return matrix_(to, from); }

 private:
  Eigen::MatrixXd matrix_;
};

struct GaussianEmissions {
  Eigen::VectorXd means;
  Eigen::VectorXd variances;  // strictly positive
};

struct BernoulliEmissions {
  Eigen::VectorXd success_probs;  // strictly inside (0, 1)
};

enum class EmissionKind { Gaussian, Bernoulli };

/// Per-state emission distributions, Gaussian or Bernoulli.
///
/// Flattened parameter layout (used for gradients, stochastic updates and
/// trace serialization):
///   Gaussian  -> [mean_1..mean_K, log_variance_1..log_variance_K]
///   Bernoulli -> [success_prob_1..success_prob_K]
class EmissionFamily {
 public:
  explicit EmissionFamily(GaussianEmissions g);
  explicit EmissionFamily(BernoulliEmissions b);

  EmissionKind kind() const;
  int state_count() const;
  const GaussianEmissions& gaussian() const;
  const BernoulliEmissions& bernoulli() const;

  double density(int state, double y) const;
  double log_density(int state, double y) const;
  /// All K densities of one observation.
  Eigen::VectorXd density_vector(double y) const;

  int parameter_count() const;
  Eigen::VectorXd parameters() const;
  /// Rebuilds the family from a flattened parameter vector. Bernoulli
  /// probabilities must lie inside (0, 1).
  EmissionFamily with_parameters(const Eigen::VectorXd& flat) const;
  /// Clamps a flattened parameter vector into the family's valid domain
  /// (Bernoulli probabilities into [1e-6, 1 - 1e-6]; Gaussian unchanged).
  Eigen::VectorXd clamp_parameters(Eigen::VectorXd flat) const;

  /// Adds weight * d log p(y | state) / d theta_j to grad[j] for every
  /// flattened parameter j belonging to `state`.
  void add_scaled_score(int state, double y, double weight,
                        Eigen::VectorXd& grad) const;

  double sample(int state, std::mt19937_64& rng) const;

 private:
  std::variant<GaussianEmissions, BernoulliEmissions> family_;
};

/// Full model parameters: transition matrix plus emission parameters.
class HmmParams {
 public:
  HmmParams(TransitionMatrix transition, EmissionFamily emissions);

  int state_count() const { return transition_.state_count(); }
  const TransitionMatrix& transition() const { return transition_; }
  const EmissionFamily& emissions() const { return emissions_; }

 private:
  TransitionMatrix transition_;
  EmissionFamily emissions_;
};

/// Observed series y_1..y_T. Time indices are 1-based throughout the API.
class ObservationSeries {
 public:
  explicit ObservationSeries(std::vector<double> values);

  std::int64_t length() const { return static_cast<std::int64_t>(values_.size()); }
  const std::vector<double>& values() const { return values_; }
  double at(std::int64_t t) const { return values_[static_cast<std::size_t>(t - 1)]; }

 private:
  std::vector<double> values_;
};

/// Latent path x_0..x_T with 1-based state labels.
class LatentPath {
 public:
  LatentPath(std::vector<int> states, int state_count);

  const std::vector<int>& states() const { return states_; }
  std::int64_t transition_count() const { return static_cast<std::int64_t>(states_.size()) - 1; }

 private:
  std::vector<int> states_;
};

/// Prior over the flattened parameter vector [A row-major, emission params]:
/// flat (improper constant) or an independent Gaussian on every coordinate.
class PriorSpec {
 public:
  static PriorSpec flat();
  static PriorSpec gaussian(double mean, double variance);

  bool is_flat() const { return flat_; }
  /// Negative log density up to an additive constant (0 for flat priors).
  double neg_log_density(const Eigen::VectorXd& theta) const;
  /// Adds -d log p(theta) / d theta to grad.
  void add_grad_neg_log(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const;

 private:
  PriorSpec(bool flat, double mean, double variance)
      : flat_(flat), mean_(mean), variance_(variance) {}

  bool flat_ = true;
  double mean_ = 0.0;
  double variance_ = 1.0;
};

enum class EstimatorKind { Full, Uniform, Stratified };

/// Gradient of the negative log posterior, componentwise over the raw
/// transition entries and the flattened emission parameters.
struct GradientEstimate {
  Eigen::MatrixXd transition_grad;  // d/dA_ij, raw entries
  Eigen::VectorXd emission_grad;    // flattened emission layout
  EstimatorKind kind = EstimatorKind::Full;
  std::vector<std::int64_t> sampled_centers;

  /// [A row-major, emission params].
  Eigen::VectorXd flattened() const;
  bool all_finite() const;
};

/// Flattened [A row-major, emission params] view of the parameters; the
/// layout matches GradientEstimate::flattened and the trace CSV columns.
Eigen::VectorXd flatten_parameters(const HmmParams& params);

struct SimulationResult {
  LatentPath path;
  ObservationSeries observations;
};

/// Unique stationary distribution of an irreducible chain, from the singular
/// linear system with the normalization row appended.
Eigen::VectorXd stationary_distribution(const TransitionMatrix& a);

/// 1 - |lambda_2|. Returns 1 for a single state; 0 for a periodic chain.
double spectral_gap(const TransitionMatrix& a);

/// Draws x_0 from the stationary distribution, then alternates transition and
/// emission draws. Bit-reproducible for a fixed seed.
SimulationResult simulate(const HmmParams& params, std::int64_t length,
                          std::uint64_t seed);

/// Diagonal matrix of per-state densities of one observation.
Eigen::MatrixXd emission_matrix(const HmmParams& params, double y);

/// Log marginal likelihood via the scaled forward recursion; safe for very
/// long series (per-step renormalization with accumulated log scale).
double log_marginal_likelihood(const HmmParams& params,
                               const ObservationSeries& y);

/// Same recursion with an explicit initial distribution.
double log_marginal_likelihood(const HmmParams& params,
                               const ObservationSeries& y,
                               const Eigen::VectorXd& initial);

/// Raw-matrix variant: accepts any nonnegative square matrix in place of a
/// validated TransitionMatrix. Used for derivative checks and for iterates
/// that are mid-update and not yet projected back to the simplex.
double log_marginal_likelihood_raw(const Eigen::MatrixXd& a,
                                   const EmissionFamily& emissions,
                                   const ObservationSeries& y,
                                   const Eigen::VectorXd& initial);

/// Exact gradient of the negative log posterior by one global forward sweep
/// and one backward sweep with per-step renormalization. The stationary
/// distribution is treated as a constant of the current transition matrix.
/// With a single state the transition gradient is identically zero (the
/// column simplex has no free direction).
GradientEstimate exact_gradient(const HmmParams& params,
                                const ObservationSeries& y,
                                const PriorSpec& prior);

/// Columnwise |a_ij| / sum_i |a_ij|.
TransitionMatrix project_columns_to_simplex(const Eigen::MatrixXd& raw);

}  // namespace csghmm
