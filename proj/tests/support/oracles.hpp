#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "csghmm/hmm.hpp"

namespace csghmm::testing {

/// Central finite differences of the negative log posterior over the flat
/// [A row-major, emission params] layout. The initial distribution is pinned
/// at the stationary distribution of the unperturbed transition matrix, the
/// same convention the analytic gradient uses.
Eigen::VectorXd finite_difference_gradient(const HmmParams& params,
                                           const ObservationSeries& y,
                                           const PriorSpec& prior,
                                           double step = 1e-6);

/// Unnormalized likelihood product evaluated in extended precision. Only
/// usable for short series.
long double naive_log_likelihood(const HmmParams& params,
                                 const ObservationSeries& y);

/// Likelihood by exhaustive summation over all K^(T+1) latent paths.
double enumerate_likelihood(const HmmParams& params,
                            const ObservationSeries& y);

/// Roots of the characteristic polynomial by Durand-Kerner iteration on
/// Faddeev-LeVerrier coefficients.
std::vector<std::complex<double>> characteristic_roots(const Eigen::MatrixXd& a);

double second_largest_modulus(const Eigen::MatrixXd& a);

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

struct RandomInstance {
  HmmParams params;
  ObservationSeries observations;
};

/// Well-conditioned random instance: transition entries bounded away from
/// zero, Gaussian variances in [0.5, 2], Bernoulli probabilities in
/// [0.2, 0.8]; observations simulated from the instance itself.
RandomInstance random_instance(std::uint64_t seed, int state_count,
                               std::int64_t length, EmissionKind kind);

/// All k-subsets of {0..n-1} in lexicographic order.
std::vector<std::vector<std::int64_t>> combinations(std::int64_t n,
                                                    std::int64_t k);

}  // namespace csghmm::testing
