#include "csghmm/eval.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "csghmm/random.hpp"

namespace csghmm {

namespace {

Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& a, int power) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  for (int i = 0; i < power; ++i) {
    out = a * out;
  }
  return out;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

double k_step_log_predictive(const HmmParams& params,
                             const ObservationSeries& holdout, int horizon) {
  if (horizon < 1) {
    throw InvalidLengthError("prediction horizon must be at least 1");
  }
  if (holdout.length() <= horizon) {
    throw InvalidLengthError("holdout must be longer than the horizon");
  }
  const Eigen::MatrixXd& a = params.transition().matrix();
  const EmissionFamily& em = params.emissions();
  const Eigen::MatrixXd a_k = matrix_power(a, horizon);

  Eigen::VectorXd alpha = stationary_distribution(params.transition());
  double total = 0.0;
  for (std::int64_t t = 1; t <= holdout.length() - horizon; ++t) {
    alpha = em.density_vector(holdout.at(t)).cwiseProduct(a * alpha);
    const double s = alpha.sum();
    if (!(s > 0.0)) {
      throw DegenerateLikelihoodError("filter vanished at t=" + std::to_string(t));
    }
    alpha /= s;
    const double density =
        em.density_vector(holdout.at(t + horizon)).dot(a_k * alpha);
    if (!(density > 0.0)) {
      throw DegenerateLikelihoodError("zero predictive density at t=" +
                                      std::to_string(t));
    }
    total += std::log(density);
  }
  return total;
}

Eigen::VectorXd filtered_state_distribution(const HmmParams& params,
                                            const ObservationSeries& y) {
  const Eigen::MatrixXd& a = params.transition().matrix();
  Eigen::VectorXd alpha = stationary_distribution(params.transition());
  for (std::int64_t t = 1; t <= y.length(); ++t) {
    alpha = params.emissions().density_vector(y.at(t)).cwiseProduct(a * alpha);
    const double s = alpha.sum();
    if (!(s > 0.0)) {
      throw DegenerateLikelihoodError("filter vanished at t=" + std::to_string(t));
    }
    alpha /= s;
  }
  return alpha;
}

Interval predictive_interval(const HmmParams& params,
                             const Eigen::VectorXd& filtered, int horizon,
                             double level) {
  if (horizon < 1) {
    throw InvalidLengthError("prediction horizon must be at least 1");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw ShapeMismatchError("interval level must lie inside (0, 1)");
  }
  const int k = params.state_count();
  if (filtered.size() != k || !(filtered.sum() > 0.0)) {
    throw ShapeMismatchError("filtered distribution must be a K probability vector");
  }
  Eigen::VectorXd weights =
      matrix_power(params.transition().matrix(), horizon) * filtered;
  weights /= weights.sum();

  const double lo_mass = (1.0 - level) / 2.0;
  const double hi_mass = (1.0 + level) / 2.0;

  if (params.emissions().kind() == EmissionKind::Bernoulli) {
    const Eigen::VectorXd& probs = params.emissions().bernoulli().success_probs;
    const double mass_at_zero = weights.dot(Eigen::VectorXd::Ones(k) - probs);
    Interval out;
    out.lo = mass_at_zero >= lo_mass ? 0.0 : 1.0;
    out.hi = mass_at_zero >= hi_mass ? 0.0 : 1.0;
    return out;
  }

  const auto& g = params.emissions().gaussian();
  auto mixture_cdf = [&](double x) {
    double acc = 0.0;
    for (int j = 0; j < k; ++j) {
      acc += weights(j) * normal_cdf((x - g.means(j)) / std::sqrt(g.variances(j)));
    }
    return acc;
  };
  const double sd_max = std::sqrt(g.variances.maxCoeff());
  double lo_bound = g.means.minCoeff() - 40.0 * sd_max;
  double hi_bound = g.means.maxCoeff() + 40.0 * sd_max;
  auto quantile = [&](double mass) {
    double lo = lo_bound;
    double hi = hi_bound;
    for (int iter = 0; iter < 200; ++iter) {
      const double mid = 0.5 * (lo + hi);
      if (mixture_cdf(mid) < mass) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };
  return Interval{quantile(lo_mass), quantile(hi_mass)};
}

double transition_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& ref,
                        MatrixNorm norm) {
  if (a.rows() != ref.rows() || a.cols() != ref.cols()) {
    throw ShapeMismatchError("matrices must have equal shapes");
  }
  const Eigen::MatrixXd diff = a - ref;
  if (norm == MatrixNorm::Frobenius) {
    return diff.norm();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(diff);
  return svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
}

double transition_error_permutation_aware(const Eigen::MatrixXd& a,
                                          const Eigen::MatrixXd& ref,
                                          MatrixNorm norm) {
  if (a.rows() != ref.rows() || a.cols() != ref.cols() || a.rows() != a.cols()) {
    throw ShapeMismatchError("matrices must be square with equal shapes");
  }
  const int k = static_cast<int>(a.rows());
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    Eigen::MatrixXd relabeled(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        relabeled(perm[static_cast<std::size_t>(i)],
                  perm[static_cast<std::size_t>(j)]) = a(i, j);
      }
    }
    best = std::min(best, transition_error(relabeled, ref, norm));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

VarianceSummary gradient_variance_mc(
    const std::function<GradientEstimate(std::uint64_t)>& draw_estimate,
    int reps, std::uint64_t master_seed, int threads) {
  if (reps < 2) {
    throw ShapeMismatchError("variance estimation needs at least 2 reps");
  }
  std::vector<Eigen::VectorXd> draws(static_cast<std::size_t>(reps));
  auto worker = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      draws[static_cast<std::size_t>(i)] =
          draw_estimate(derive_seed(master_seed, static_cast<std::uint64_t>(i)))
              .flattened();
    }
  };
  const int pool = std::max(1, threads);
  if (pool == 1) {
    worker(0, reps);
  } else {
    std::vector<std::thread> crew;
    const int chunk = (reps + pool - 1) / pool;
    for (int p = 0; p < pool; ++p) {
      const int begin = p * chunk;
      const int end = std::min(reps, begin + chunk);
      if (begin >= end) break;
      crew.emplace_back(worker, begin, end);
    }
    for (auto& t : crew) {
      t.join();
    }
  }

  const Eigen::Index dim = draws.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& d : draws) {
    mean += d;
  }
  mean /= static_cast<double>(reps);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const auto& d : draws) {
    var += (d - mean).cwiseAbs2();
  }
  var /= static_cast<double>(reps - 1);
  return VarianceSummary{var, var.mean()};
}

ConjugatePosterior conjugate_oracle_segments(
    const std::vector<std::vector<double>>& segments,
    const ConjugateOracleSpec& spec) {
  const int k = static_cast<int>(spec.assignment_means.size());
  if (spec.prior_means.size() != k || spec.prior_variances.size() != k ||
      spec.dirichlet_prior.rows() != k || spec.dirichlet_prior.cols() != k) {
    throw ShapeMismatchError("conjugate oracle spec sizes disagree");
  }
  if (!(spec.emission_variance > 0.0)) {
    throw ShapeMismatchError("known emission variance must be positive");
  }

  auto assign = [&](double y) {
    int best = 0;
    double best_d = std::abs(y - spec.assignment_means(0));
    for (int j = 1; j < k; ++j) {
      const double d = std::abs(y - spec.assignment_means(j));
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    return best;
  };

  ConjugateSufficientStats stats;
  stats.counts = Eigen::VectorXd::Zero(k);
  stats.sums = Eigen::VectorXd::Zero(k);
  stats.transition_counts = Eigen::MatrixXd::Zero(k, k);
  for (const auto& segment : segments) {
    int prev = -1;
    for (double y : segment) {
      const int state = assign(y);
      stats.counts(state) += 1.0;
      stats.sums(state) += y;
      if (prev >= 0) {
        stats.transition_counts(state, prev) += 1.0;
      }
      prev = state;
    }
  }

  ConjugatePosterior post;
  post.mean_posterior_means = Eigen::VectorXd::Zero(k);
  post.mean_posterior_variances = Eigen::VectorXd::Zero(k);
  for (int j = 0; j < k; ++j) {
    const double n_j = stats.counts(j);
    const double post_var =
        spec.emission_variance * spec.prior_variances(j) /
        (spec.emission_variance + n_j * spec.prior_variances(j));
    post.mean_posterior_variances(j) = post_var;
    post.mean_posterior_means(j) =
        post_var * (spec.prior_means(j) / spec.prior_variances(j) +
                    stats.sums(j) / spec.emission_variance);
  }
  post.dirichlet_posterior = spec.dirichlet_prior + stats.transition_counts;
  post.stats = std::move(stats);
  return post;
}

ConjugatePosterior conjugate_oracle(const ObservationSeries& y,
                                    const ConjugateOracleSpec& spec) {
  return conjugate_oracle_segments({y.values()}, spec);
}

}  // namespace csghmm
