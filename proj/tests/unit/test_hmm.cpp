#include <gtest/gtest.h>

#include <cmath>

#include "csghmm/hmm.hpp"
#include "oracles.hpp"

namespace csghmm {
namespace {

using testing::enumerate_likelihood;
using testing::finite_difference_gradient;
using testing::naive_log_likelihood;
using testing::random_instance;
using testing::second_largest_modulus;

Eigen::MatrixXd rare_matrix(double epsilon) {
  Eigen::MatrixXd a(2, 2);
  a << 1.0 - epsilon, 0.1, epsilon, 0.9;
  return a;
}

Eigen::MatrixXd bd_matrix() {
  Eigen::MatrixXd a(4, 4);
  a << 0.9, 0.1, 0.0, 0.0,
       0.0, 0.9, 0.1, 0.0,
       0.0, 0.0, 0.9, 0.1,
       0.1, 0.0, 0.0, 0.9;
  return a;
}

Eigen::MatrixXd id_matrix() {
  Eigen::MatrixXd a(5, 5);
  a << 0.992, 0.01, 0.01, 0.01, 0.01,
       0.002, 0.99, 0.0, 0.0, 0.0,
       0.002, 0.0, 0.99, 0.0, 0.0,
       0.002, 0.0, 0.0, 0.99, 0.0,
       0.002, 0.0, 0.0, 0.0, 0.99;
  return a;
}

HmmParams symmetric_bernoulli() {
  Eigen::MatrixXd a(2, 2);
  a << 0.9, 0.1, 0.1, 0.9;
  Eigen::VectorXd probs(2);
  probs << 0.9, 0.1;
  return HmmParams(TransitionMatrix(a), EmissionFamily(BernoulliEmissions{probs}));
}

TEST(TransitionMatrix, RejectsBadColumnSums) {
  Eigen::MatrixXd a(2, 2);
  a << 0.9, 0.2, 0.2, 0.9;
  EXPECT_THROW(TransitionMatrix{a}, NonStochasticError);
  a << 0.5, -0.1, 0.5, 1.1;
  EXPECT_THROW(TransitionMatrix{a}, NonStochasticError);
}

TEST(TransitionMatrix, NormalizesTinyColumnDrift) {
  Eigen::MatrixXd a(2, 2);
  a << 0.9 + 2e-9, 0.1, 0.1, 0.9;
  TransitionMatrix t(a);
  EXPECT_NEAR(t.matrix().col(0).sum(), 1.0, 1e-12);
  EXPECT_NEAR(t.matrix().col(1).sum(), 1.0, 1e-12);
}

TEST(StationaryDistribution, RareChainMatchesClosedForm) {
  const double eps = 1e-4;
  const Eigen::VectorXd pi = stationary_distribution(TransitionMatrix(rare_matrix(eps)));
  EXPECT_NEAR(pi(0), 1.0 / (1.0 + 10.0 * eps), 1e-12);
  EXPECT_NEAR(pi(1), 10.0 * eps / (1.0 + 10.0 * eps), 1e-12);
  // Printed values.
  EXPECT_NEAR(pi(0), 0.99900, 1e-5);
  EXPECT_NEAR(pi(1), 0.00100, 1e-5);
}

TEST(StationaryDistribution, BalancedChainIsUniform) {
  const Eigen::VectorXd pi = stationary_distribution(TransitionMatrix(bd_matrix()));
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(pi(i), 0.25, 1e-12);
  }
}

TEST(StationaryDistribution, ImbalancedChain) {
  const Eigen::VectorXd pi = stationary_distribution(TransitionMatrix(id_matrix()));
  EXPECT_NEAR(pi(0), 5.0 / 9.0, 1e-10);
  for (int i = 1; i < 5; ++i) {
    EXPECT_NEAR(pi(i), 1.0 / 9.0, 1e-10);
  }
  EXPECT_NEAR(pi(0), 0.5556, 1e-4);
}

TEST(StationaryDistribution, SingleState) {
  const Eigen::VectorXd pi =
      stationary_distribution(TransitionMatrix(Eigen::MatrixXd::Ones(1, 1)));
  ASSERT_EQ(pi.size(), 1);
  EXPECT_DOUBLE_EQ(pi(0), 1.0);
}

TEST(StationaryDistribution, FixedPointResidualOnRandomMatrices) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto inst = random_instance(seed, 2 + static_cast<int>(seed % 4), 5,
                                      EmissionKind::Gaussian);
    const Eigen::VectorXd pi = stationary_distribution(inst.params.transition());
    const Eigen::VectorXd residual = inst.params.transition().matrix() * pi - pi;
    EXPECT_LT(residual.cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(pi.sum(), 1.0, 1e-12);
    EXPECT_GE(pi.minCoeff(), 0.0);
  }
}

TEST(StationaryDistribution, ReducibleChainThrows) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_THROW(stationary_distribution(TransitionMatrix(a)), ReducibleChainError);
}

TEST(SpectralGap, SymmetricTwoState) {
  Eigen::MatrixXd a(2, 2);
  a << 0.9, 0.1, 0.1, 0.9;
  EXPECT_NEAR(spectral_gap(TransitionMatrix(a)), 0.2, 1e-12);
}

TEST(SpectralGap, SingleStateIsOne) {
  EXPECT_DOUBLE_EQ(spectral_gap(TransitionMatrix(Eigen::MatrixXd::Ones(1, 1))), 1.0);
}

TEST(SpectralGap, MatchesCharacteristicPolynomialRoots) {
  const Eigen::MatrixXd a = bd_matrix();
  const double gap = spectral_gap(TransitionMatrix(a));
  EXPECT_NEAR(gap, 1.0 - second_largest_modulus(a), 1e-8);
  // The balanced matrix is circulant: second modulus is sqrt(0.81 + 0.01).
  EXPECT_NEAR(gap, 1.0 - std::sqrt(0.82), 1e-10);
}

TEST(SpectralGap, PeriodicChainHasZeroGap) {
  Eigen::MatrixXd a(2, 2);
  a << 0.0, 1.0, 1.0, 0.0;
  EXPECT_NEAR(spectral_gap(TransitionMatrix(a)), 0.0, 1e-12);
}

TEST(Simulate, SingleStateLatentPathIsConstant) {
  HmmParams params(TransitionMatrix(Eigen::MatrixXd::Ones(1, 1)),
                   EmissionFamily(GaussianEmissions{Eigen::VectorXd::Zero(1),
                                                    Eigen::VectorXd::Ones(1)}));
  const SimulationResult sim = simulate(params, 50, 3);
  for (int s : sim.path.states()) {
    EXPECT_EQ(s, 1);
  }
}

TEST(Simulate, DeterministicCycleAlternates) {
  Eigen::MatrixXd a(2, 2);
  a << 0.0, 1.0, 1.0, 0.0;
  HmmParams params(TransitionMatrix(a),
                   EmissionFamily(GaussianEmissions{
                       Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)}));
  const SimulationResult sim = simulate(params, 40, 11);
  const auto& states = sim.path.states();
  for (std::size_t t = 1; t < states.size(); ++t) {
    EXPECT_NE(states[t], states[t - 1]);
  }
}

TEST(Simulate, RareStateFrequencyNearStationary) {
  const double eps = 1e-4;
  Eigen::VectorXd means(2);
  means << 0.0, 1.0;
  HmmParams params(TransitionMatrix(rare_matrix(eps)),
                   EmissionFamily(GaussianEmissions{
                       means, Eigen::VectorXd::Constant(2, 1e-4)}));
  const std::int64_t t_len = 1000000;
  const SimulationResult sim = simulate(params, t_len, 20240617);
  std::int64_t rare = 0;
  for (double v : sim.observations.values()) {
    if (v > 0.5) {
      ++rare;
    }
  }
  const double p = 10.0 * eps / (1.0 + 10.0 * eps);
  const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(t_len));
  EXPECT_NEAR(static_cast<double>(rare) / static_cast<double>(t_len), p, 3.0 * se);
}

TEST(Simulate, BitReproducibleAcrossCalls) {
  const auto inst = random_instance(5, 3, 1, EmissionKind::Gaussian);
  const SimulationResult a = simulate(inst.params, 200, 99);
  const SimulationResult b = simulate(inst.params, 200, 99);
  ASSERT_EQ(a.observations.length(), b.observations.length());
  for (std::int64_t t = 1; t <= a.observations.length(); ++t) {
    EXPECT_EQ(a.observations.at(t), b.observations.at(t));
  }
  EXPECT_EQ(a.path.states(), b.path.states());
}

TEST(EmissionMatrix, GaussianDiagonal) {
  Eigen::VectorXd means(2);
  means << 0.0, 1.0;
  HmmParams params(TransitionMatrix::uniform(2),
                   EmissionFamily(GaussianEmissions{
                       means, Eigen::VectorXd::Ones(2)}));
  const Eigen::MatrixXd p = emission_matrix(params, 0.0);
  EXPECT_NEAR(p(0, 0), 0.3989422804014327, 1e-10);
  EXPECT_NEAR(p(1, 1), 0.24197072451914337, 1e-10);
  EXPECT_DOUBLE_EQ(p(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(p(1, 0), 0.0);
}

TEST(EmissionMatrix, BernoulliDiagonal) {
  const HmmParams params = symmetric_bernoulli();
  const Eigen::MatrixXd p1 = emission_matrix(params, 1.0);
  EXPECT_NEAR(p1(0, 0), 0.9, 1e-12);
  EXPECT_NEAR(p1(1, 1), 0.1, 1e-12);
  const Eigen::MatrixXd p0 = emission_matrix(params, 0.0);
  EXPECT_NEAR(p0(0, 0), 0.1, 1e-12);
  EXPECT_NEAR(p0(1, 1), 0.9, 1e-12);
}

TEST(LogMarginalLikelihood, SingleGaussianObservation) {
  HmmParams params(TransitionMatrix(Eigen::MatrixXd::Ones(1, 1)),
                   EmissionFamily(GaussianEmissions{Eigen::VectorXd::Zero(1),
                                                    Eigen::VectorXd::Ones(1)}));
  const double ll = log_marginal_likelihood(params, ObservationSeries({0.0}));
  EXPECT_NEAR(ll, std::log(0.3989422804014327), 1e-12);
}

TEST(LogMarginalLikelihood, MatchesNaiveProductOnShortSeries) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = random_instance(seed, 2 + static_cast<int>(seed % 3), 5,
                                      EmissionKind::Gaussian);
    const double scaled = log_marginal_likelihood(inst.params, inst.observations);
    const double naive =
        static_cast<double>(naive_log_likelihood(inst.params, inst.observations));
    EXPECT_NEAR(scaled, naive, 1e-10 * std::max(1.0, std::abs(naive)));
  }
}

TEST(LogMarginalLikelihood, MatchesPathEnumerationForBernoulli) {
  const HmmParams params = symmetric_bernoulli();
  const ObservationSeries y({1.0, 1.0});
  const double ll = log_marginal_likelihood(params, y);
  EXPECT_NEAR(std::exp(ll), enumerate_likelihood(params, y), 1e-12);
  EXPECT_NEAR(std::exp(ll), 0.378, 1e-12);
}

TEST(LogMarginalLikelihood, InvariantUnderStatePermutation) {
  const auto inst = random_instance(17, 4, 60, EmissionKind::Gaussian);
  const double base = log_marginal_likelihood(inst.params, inst.observations);

  // Rotate the state labels by one and permute A, means, variances jointly.
  const int k = 4;
  std::vector<int> perm = {1, 2, 3, 0};
  Eigen::MatrixXd a(k, k);
  Eigen::VectorXd means(k), vars(k);
  const auto& g = inst.params.emissions().gaussian();
  for (int i = 0; i < k; ++i) {
    means(perm[static_cast<std::size_t>(i)]) = g.means(i);
    vars(perm[static_cast<std::size_t>(i)]) = g.variances(i);
    for (int j = 0; j < k; ++j) {
      a(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) =
          inst.params.transition()(i, j);
    }
  }
  HmmParams permuted(TransitionMatrix(a),
                     EmissionFamily(GaussianEmissions{means, vars}));
  const double rotated = log_marginal_likelihood(permuted, inst.observations);
  EXPECT_NEAR(base, rotated, 1e-10 * std::max(1.0, std::abs(base)));
}

TEST(LogMarginalLikelihood, ImpossibleObservationThrows) {
  Eigen::VectorXd means(2);
  means << 0.0, 1.0;
  HmmParams params(TransitionMatrix::uniform(2),
                   EmissionFamily(GaussianEmissions{
                       means, Eigen::VectorXd::Constant(2, 1e-4)}));
  // Far enough into the tail that every state's density underflows to zero.
  EXPECT_THROW(log_marginal_likelihood(params, ObservationSeries({1e6})),
               DegenerateLikelihoodError);
}

TEST(ExactGradient, SingleGaussianScore) {
  Eigen::VectorXd mean(1), var(1);
  mean << 0.7;
  var << 1.0;
  HmmParams params(TransitionMatrix(Eigen::MatrixXd::Ones(1, 1)),
                   EmissionFamily(GaussianEmissions{mean, var}));
  const GradientEstimate grad =
      exact_gradient(params, ObservationSeries({0.2}), PriorSpec::flat());
  EXPECT_NEAR(grad.emission_grad(0), (0.7 - 0.2) / 1.0, 1e-12);
  // Single state: the transition gradient has no free direction.
  EXPECT_DOUBLE_EQ(grad.transition_grad(0, 0), 0.0);
}

TEST(ExactGradient, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const EmissionKind kind =
        seed % 2 == 0 ? EmissionKind::Gaussian : EmissionKind::Bernoulli;
    const auto inst =
        random_instance(seed + 100, 2 + static_cast<int>(seed % 3), 40, kind);
    const GradientEstimate grad =
        exact_gradient(inst.params, inst.observations, PriorSpec::flat());
    const Eigen::VectorXd fd =
        finite_difference_gradient(inst.params, inst.observations, PriorSpec::flat());
    const Eigen::VectorXd flat = grad.flattened();
    ASSERT_EQ(flat.size(), fd.size());
    for (int c = 0; c < flat.size(); ++c) {
      const double scale = std::max({1.0, std::abs(flat(c)), std::abs(fd(c))});
      EXPECT_NEAR(flat(c), fd(c), 1e-5 * scale) << "component " << c;
    }
  }
}

TEST(ExactGradient, GaussianPriorContributes) {
  const auto inst = random_instance(7, 2, 30, EmissionKind::Gaussian);
  const PriorSpec prior = PriorSpec::gaussian(0.0, 4.0);
  const GradientEstimate grad = exact_gradient(inst.params, inst.observations, prior);
  const Eigen::VectorXd fd =
      finite_difference_gradient(inst.params, inst.observations, prior);
  const Eigen::VectorXd flat = grad.flattened();
  for (int c = 0; c < flat.size(); ++c) {
    const double scale = std::max({1.0, std::abs(flat(c)), std::abs(fd(c))});
    EXPECT_NEAR(flat(c), fd(c), 1e-5 * scale);
  }
}

TEST(ProjectColumnsToSimplex, StochasticInputIsFixedPoint) {
  const Eigen::MatrixXd a = bd_matrix();
  const TransitionMatrix projected = project_columns_to_simplex(a);
  EXPECT_LT((projected.matrix() - a).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ProjectColumnsToSimplex, AbsoluteValueNormalization) {
  Eigen::MatrixXd raw(2, 2);
  raw << -1.0, 0.0, 3.0, 5.0;
  const TransitionMatrix projected = project_columns_to_simplex(raw);
  EXPECT_NEAR(projected(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(projected(1, 0), 0.75, 1e-15);
  EXPECT_NEAR(projected(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(projected(1, 1), 1.0, 1e-15);
}

TEST(ProjectColumnsToSimplex, ZeroColumnThrows) {
  Eigen::MatrixXd raw(2, 2);
  raw << 0.0, 0.5, 0.0, 0.5;
  EXPECT_THROW(project_columns_to_simplex(raw), ZeroColumnError);
}

}  // namespace
}  // namespace csghmm
