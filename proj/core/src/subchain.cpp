#include "csghmm/subchain.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "csghmm/clustering.hpp"
#include "csghmm/random.hpp"

namespace csghmm {

std::vector<std::int64_t> SubchainPartition::centers() const {
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(window_count()));
  for (std::int64_t k = 0; k < window_count(); ++k) {
    out.push_back(center(k));
  }
  return out;
}

SubchainPartition partition(std::int64_t series_length, int window_length,
                            std::int64_t buffer_length, std::int64_t min_gap) {
  if (window_length < 1 || window_length % 2 == 0) {
    throw InvalidLengthError("subchain length must be odd and positive");
  }
  if (window_length > series_length) {
    throw InvalidLengthError("subchain length exceeds the series length");
  }
  if (buffer_length < 0 || min_gap < 0) {
    throw InvalidLengthError("buffer and gap lengths must be nonnegative");
  }
  return SubchainPartition{series_length, window_length, buffer_length, min_gap};
}

BufferedWindow buffered_window(const SubchainPartition& part,
                               std::int64_t window_index) {
  if (window_index < 0 || window_index >= part.window_count()) {
    throw InvalidLengthError("window index out of range");
  }
  const std::int64_t tau = part.center(window_index);
  const std::int64_t half = (part.window_length - 1) / 2;
  BufferedWindow w;
  w.center = tau;
  w.core_first = tau - half;
  w.core_last = tau + half;
  w.left_first = std::max<std::int64_t>(1, w.core_first - part.buffer_length);
  w.right_last = std::min(part.series_length, w.core_last + part.buffer_length);
  return w;
}

BoundaryMessages buffered_messages(const HmmParams& params,
                                   const ObservationSeries& y,
                                   const BufferedWindow& window) {
  const Eigen::MatrixXd& a = params.transition().matrix();
  const EmissionFamily& em = params.emissions();

  Eigen::VectorXd forward = stationary_distribution(params.transition());
  for (std::int64_t t = window.left_first; t < window.core_first; ++t) {
    forward = em.density_vector(y.at(t)).cwiseProduct(a * forward);
    const double s = forward.sum();
    if (!(s > 0.0)) {
      throw DegenerateLikelihoodError("forward buffer message vanished at t=" +
                                      std::to_string(t));
    }
    forward /= s;
  }

  Eigen::VectorXd backward =
      Eigen::VectorXd::Constant(a.rows(), 1.0 / static_cast<double>(a.rows()));
  for (std::int64_t t = window.right_last; t > window.core_last; --t) {
    backward = a.transpose() * em.density_vector(y.at(t)).cwiseProduct(backward);
    const double s = backward.sum();
    if (!(s > 0.0)) {
      throw DegenerateLikelihoodError("backward buffer message vanished at t=" +
                                      std::to_string(t));
    }
    backward /= s;
  }
  return BoundaryMessages{std::move(backward), std::move(forward)};
}

GradientEstimate window_gradient_term(const HmmParams& params,
                                      const ObservationSeries& y,
                                      std::int64_t core_first,
                                      std::int64_t core_last,
                                      const Eigen::VectorXd& backward_boundary,
                                      const Eigen::VectorXd& forward_boundary) {
  const int k = params.state_count();
  const Eigen::MatrixXd& a = params.transition().matrix();
  const EmissionFamily& em = params.emissions();
  if (backward_boundary.size() != k || forward_boundary.size() != k) {
    throw ShapeMismatchError("boundary messages must have K entries");
  }
  if (core_first < 1 || core_last > y.length() || core_first > core_last) {
    throw InvalidLengthError("window core outside the series");
  }
  const double fsum = forward_boundary.sum();
  const double bsum = backward_boundary.sum();
  if (!(fsum > 0.0) || !(bsum > 0.0)) {
    throw DegenerateLikelihoodError("boundary message has no mass");
  }

  const std::int64_t len = core_last - core_first + 1;
  // Prefix sweep from the forward boundary; each step renormalized. The
  // per-step ratio cancels the scales, so none need to be carried.
  std::vector<Eigen::VectorXd> prefix(static_cast<std::size_t>(len) + 1);
  std::vector<Eigen::VectorXd> dens(static_cast<std::size_t>(len));
  prefix[0] = forward_boundary / fsum;
  for (std::int64_t i = 0; i < len; ++i) {
    const double obs = y.at(core_first + i);
    dens[static_cast<std::size_t>(i)] = em.density_vector(obs);
    Eigen::VectorXd v = dens[static_cast<std::size_t>(i)].cwiseProduct(
        a * prefix[static_cast<std::size_t>(i)]);
    const double s = v.sum();
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw DegenerateLikelihoodError(
          "window product vanished at t=" + std::to_string(core_first + i));
    }
    prefix[static_cast<std::size_t>(i) + 1] = v / s;
  }

  Eigen::MatrixXd a_acc = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd e_acc = Eigen::VectorXd::Zero(em.parameter_count());
  Eigen::VectorXd r = backward_boundary / bsum;
  for (std::int64_t i = len - 1; i >= 0; --i) {
    const Eigen::VectorXd& d = dens[static_cast<std::size_t>(i)];
    const Eigen::VectorXd w = a * prefix[static_cast<std::size_t>(i)];
    const Eigen::VectorXd u = d.cwiseProduct(w);
    const double denom = r.dot(u);
    if (!(denom > 0.0)) {
      throw DegenerateLikelihoodError("window denominator vanished");
    }
    if (k > 1) {
      a_acc.noalias() +=
          (r.cwiseProduct(d) * prefix[static_cast<std::size_t>(i)].transpose()) / denom;
    }
    const double obs = y.at(core_first + i);
    for (int s = 0; s < k; ++s) {
      const double weight = r(s) * u(s) / denom;
      if (weight != 0.0) {
        em.add_scaled_score(s, obs, weight, e_acc);
      }
    }
    if (i > 0) {
      Eigen::VectorXd next = a.transpose() * d.cwiseProduct(r);
      const double ns = next.sum();
      if (!(ns > 0.0)) {
        throw DegenerateLikelihoodError("window backward message vanished");
      }
      r = next / ns;
    }
  }

  GradientEstimate grad;
  grad.transition_grad = -a_acc;
  grad.emission_grad = -e_acc;
  grad.kind = EstimatorKind::Full;
  grad.sampled_centers = {(core_first + core_last) / 2};
  return grad;
}

GradientEstimate local_grad_term(const HmmParams& params,
                                 const ObservationSeries& y,
                                 const BufferedWindow& window) {
  const BoundaryMessages messages = buffered_messages(params, y, window);
  GradientEstimate grad =
      window_gradient_term(params, y, window.core_first, window.core_last,
                           messages.backward, messages.forward);
  grad.sampled_centers = {window.center};
  return grad;
}

namespace {

void add_prior_term(const HmmParams& params, const PriorSpec& prior,
                    GradientEstimate& grad) {
  const int k = params.state_count();
  Eigen::VectorXd flat_grad = grad.flattened();
  prior.add_grad_neg_log(flatten_parameters(params), flat_grad);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      grad.transition_grad(i, j) = flat_grad(i * k + j);
    }
  }
  grad.emission_grad = flat_grad.tail(grad.emission_grad.size());
}

GradientEstimate accumulate_windows(const HmmParams& params,
                                    const ObservationSeries& y,
                                    const SubchainPartition& part,
                                    const std::vector<std::int64_t>& indices,
                                    double scale) {
  const int k = params.state_count();
  GradientEstimate acc;
  acc.transition_grad = Eigen::MatrixXd::Zero(k, k);
  acc.emission_grad =
      Eigen::VectorXd::Zero(params.emissions().parameter_count());
  for (std::int64_t index : indices) {
    const GradientEstimate term =
        local_grad_term(params, y, buffered_window(part, index));
    acc.transition_grad += scale * term.transition_grad;
    acc.emission_grad += scale * term.emission_grad;
    acc.sampled_centers.push_back(part.center(index));
  }
  return acc;
}

}  // namespace

GradientEstimate full_subseries_gradient(const HmmParams& params,
                                         const ObservationSeries& y,
                                         const SubchainPartition& part,
                                         const PriorSpec& prior) {
  std::vector<std::int64_t> all(static_cast<std::size_t>(part.window_count()));
  for (std::int64_t i = 0; i < part.window_count(); ++i) {
    all[static_cast<std::size_t>(i)] = i;
  }
  GradientEstimate grad = accumulate_windows(params, y, part, all, 1.0);
  grad.kind = EstimatorKind::Full;
  add_prior_term(params, prior, grad);
  return grad;
}

namespace {

// Distinct indices drawn uniformly via a partial Fisher-Yates pass, returned
// ascending.
std::vector<std::int64_t> sample_subset(std::int64_t population,
                                        std::int64_t count,
                                        std::mt19937_64& rng) {
  std::vector<std::int64_t> pool(static_cast<std::size_t>(population));
  for (std::int64_t i = 0; i < population; ++i) {
    pool[static_cast<std::size_t>(i)] = i;
  }
  for (std::int64_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::int64_t> pick(i, population - 1);
    std::swap(pool[static_cast<std::size_t>(i)],
              pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(count));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

GradientEstimate uniform_minibatch_gradient(const HmmParams& params,
                                            const ObservationSeries& y,
                                            const SubchainPartition& part,
                                            const UniformPlan& plan,
                                            const PriorSpec& prior) {
  const std::int64_t population = part.window_count();
  const std::int64_t s = plan.subsample_count;
  if (s < 1 || s > population) {
    throw InfeasibleGapError("subsample count must lie in [1, window count]");
  }

  std::vector<std::int64_t> chosen;
  if (s == population) {
    // Census draw: no randomness, nothing to separate.
    chosen.resize(static_cast<std::size_t>(population));
    for (std::int64_t i = 0; i < population; ++i) {
      chosen[static_cast<std::size_t>(i)] = i;
    }
  } else {
    const std::int64_t required_spacing =
        part.window_length + 2 * part.buffer_length + 2 * part.min_gap;
    std::mt19937_64 rng(plan.seed);
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      chosen = sample_subset(population, s, rng);
      ok = true;
      for (std::size_t i = 0; i + 1 < chosen.size(); ++i) {
        const std::int64_t spacing =
            part.center(chosen[i + 1]) - part.center(chosen[i]);
        if (spacing < required_spacing) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) {
      throw InfeasibleGapError(
          "no gap-separated subsample found in 1000 attempts");
    }
  }

  const double scale = static_cast<double>(population) / static_cast<double>(s);
  GradientEstimate grad = accumulate_windows(params, y, part, chosen, scale);
  grad.kind = EstimatorKind::Uniform;
  add_prior_term(params, prior, grad);
  return grad;
}

GradientEstimate stratified_gradient(const HmmParams& params,
                                     const ObservationSeries& y,
                                     const SubchainPartition& part,
                                     const ClusterModel& clusters,
                                     const StratifiedPlan& plan,
                                     const PriorSpec& prior) {
  if (clusters.window_count() != part.window_count()) {
    throw ShapeMismatchError("cluster model does not cover the partition");
  }
  const int m_count = clusters.cluster_count();
  if (static_cast<int>(plan.quotas.size()) != m_count) {
    throw ShapeMismatchError("one quota per cluster is required");
  }

  const int k = params.state_count();
  GradientEstimate grad;
  grad.transition_grad = Eigen::MatrixXd::Zero(k, k);
  grad.emission_grad =
      Eigen::VectorXd::Zero(params.emissions().parameter_count());
  std::mt19937_64 rng(plan.seed);

  for (int m = 0; m < m_count; ++m) {
    const std::vector<std::int64_t>& members = clusters.members(m);
    const std::int64_t n_m = static_cast<std::int64_t>(members.size());
    const std::int64_t b_m = plan.quotas[static_cast<std::size_t>(m)];
    if (n_m == 0) {
      throw EmptyClusterError("cluster " + std::to_string(m) + " is empty");
    }
    if (b_m < 1 || b_m > n_m) {
      throw QuotaExceedsClusterError("quota for cluster " + std::to_string(m) +
                                     " outside [1, cluster size]");
    }
    std::vector<std::int64_t> picks = sample_subset(n_m, b_m, rng);
    const double scale = static_cast<double>(n_m) / static_cast<double>(b_m);
    std::vector<std::int64_t> indices;
    indices.reserve(picks.size());
    for (std::int64_t p : picks) {
      indices.push_back(members[static_cast<std::size_t>(p)]);
    }
    std::sort(indices.begin(), indices.end());
    const GradientEstimate part_grad =
        accumulate_windows(params, y, part, indices, scale);
    grad.transition_grad += part_grad.transition_grad;
    grad.emission_grad += part_grad.emission_grad;
    grad.sampled_centers.insert(grad.sampled_centers.end(),
                                part_grad.sampled_centers.begin(),
                                part_grad.sampled_centers.end());
  }

  grad.kind = EstimatorKind::Stratified;
  add_prior_term(params, prior, grad);
  return grad;
}

}  // namespace csghmm
