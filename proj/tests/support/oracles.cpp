#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace csghmm::testing {

namespace {

double neg_log_posterior_at(const Eigen::VectorXd& flat, int k,
                            const EmissionFamily& reference,
                            const ObservationSeries& y,
                            const Eigen::VectorXd& initial,
                            const PriorSpec& prior) {
  Eigen::MatrixXd a(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      a(i, j) = flat(i * k + j);
    }
  }
  const EmissionFamily em =
      reference.with_parameters(flat.tail(reference.parameter_count()));
  return -log_marginal_likelihood_raw(a, em, y, initial) +
         prior.neg_log_density(flat);
}

}  // namespace

Eigen::VectorXd finite_difference_gradient(const HmmParams& params,
                                           const ObservationSeries& y,
                                           const PriorSpec& prior,
                                           double step) {
  const int k = params.state_count();
  const Eigen::VectorXd initial = stationary_distribution(params.transition());
  const Eigen::VectorXd base = flatten_parameters(params);
  Eigen::VectorXd grad(base.size());
  for (int c = 0; c < base.size(); ++c) {
    Eigen::VectorXd hi = base;
    Eigen::VectorXd lo = base;
    hi(c) += step;
    lo(c) -= step;
    const double up =
        neg_log_posterior_at(hi, k, params.emissions(), y, initial, prior);
    const double down =
        neg_log_posterior_at(lo, k, params.emissions(), y, initial, prior);
    grad(c) = (up - down) / (2.0 * step);
  }
  return grad;
}

long double naive_log_likelihood(const HmmParams& params,
                                 const ObservationSeries& y) {
  const int k = params.state_count();
  const Eigen::VectorXd pi = stationary_distribution(params.transition());
  std::vector<long double> state(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    state[static_cast<std::size_t>(i)] = static_cast<long double>(pi(i));
  }
  for (std::int64_t t = 1; t <= y.length(); ++t) {
    std::vector<long double> next(static_cast<std::size_t>(k), 0.0L);
    for (int i = 0; i < k; ++i) {
      long double acc = 0.0L;
      for (int j = 0; j < k; ++j) {
        acc += static_cast<long double>(params.transition()(i, j)) *
               state[static_cast<std::size_t>(j)];
      }
      next[static_cast<std::size_t>(i)] =
          static_cast<long double>(params.emissions().density(i, y.at(t))) * acc;
    }
    state = std::move(next);
  }
  long double total = 0.0L;
  for (long double v : state) {
    total += v;
  }
  return std::log(total);
}

double enumerate_likelihood(const HmmParams& params,
                            const ObservationSeries& y) {
  const int k = params.state_count();
  const std::int64_t t_len = y.length();
  const Eigen::VectorXd pi = stationary_distribution(params.transition());

  double total = 0.0;
  std::vector<int> path(static_cast<std::size_t>(t_len) + 1, 0);
  const std::int64_t count =
      static_cast<std::int64_t>(std::pow(k, static_cast<double>(t_len + 1)) + 0.5);
  for (std::int64_t index = 0; index < count; ++index) {
    std::int64_t rem = index;
    for (std::int64_t pos = 0; pos <= t_len; ++pos) {
      path[static_cast<std::size_t>(pos)] = static_cast<int>(rem % k);
      rem /= k;
    }
    double prob = pi(path[0]);
    for (std::int64_t t = 1; t <= t_len; ++t) {
      prob *= params.transition()(path[static_cast<std::size_t>(t)],
                                  path[static_cast<std::size_t>(t - 1)]);
      prob *= params.emissions().density(path[static_cast<std::size_t>(t)],
                                         y.at(t));
    }
    total += prob;
  }
  return total;
}

std::vector<std::complex<double>> characteristic_roots(const Eigen::MatrixXd& a) {
  const int k = static_cast<int>(a.rows());
  // Faddeev-LeVerrier: coefficients of lambda^k + c1 lambda^(k-1) + ... + ck.
  std::vector<double> coeffs(static_cast<std::size_t>(k) + 1, 0.0);
  coeffs[0] = 1.0;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, k);
  for (int i = 1; i <= k; ++i) {
    m = a * m + coeffs[static_cast<std::size_t>(i - 1)] *
                    Eigen::MatrixXd::Identity(k, k);
    coeffs[static_cast<std::size_t>(i)] = -(a * m).trace() / i;
  }

  std::vector<std::complex<double>> roots(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    roots[static_cast<std::size_t>(i)] =
        std::polar(0.9, 2.0 * M_PI * i / k + 0.4);
  }
  auto poly = [&](std::complex<double> z) {
    std::complex<double> acc = 0.0;
    for (double c : coeffs) {
      acc = acc * z + c;
    }
    return acc;
  };
  for (int iter = 0; iter < 500; ++iter) {
    double moved = 0.0;
    for (int i = 0; i < k; ++i) {
      std::complex<double> denom = 1.0;
      for (int j = 0; j < k; ++j) {
        if (j != i) {
          denom *= roots[static_cast<std::size_t>(i)] -
                   roots[static_cast<std::size_t>(j)];
        }
      }
      const std::complex<double> delta =
          poly(roots[static_cast<std::size_t>(i)]) / denom;
      roots[static_cast<std::size_t>(i)] -= delta;
      moved = std::max(moved, std::abs(delta));
    }
    if (moved < 1e-14) {
      break;
    }
  }
  return roots;
}

double second_largest_modulus(const Eigen::MatrixXd& a) {
  std::vector<double> moduli;
  for (const auto& root : characteristic_roots(a)) {
    moduli.push_back(std::abs(root));
  }
  std::sort(moduli.begin(), moduli.end(), std::greater<double>());
  return moduli.size() > 1 ? moduli[1] : 0.0;
}

namespace {

std::vector<double> ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> out(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) {
      ++j;
    }
    const double mean_rank = 0.5 * (i + j) + 1.0;  // average rank for ties
    for (std::size_t p = i; p <= j; ++p) {
      out[order[p]] = mean_rank;
    }
    i = j + 1;
  }
  return out;
}

}  // namespace

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  const std::vector<double> rx = ranks(x);
  const std::vector<double> ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cov += (rx[i] - mx) * (ry[i] - my);
    vx += (rx[i] - mx) * (rx[i] - mx);
    vy += (ry[i] - my) * (ry[i] - my);
  }
  return cov / std::sqrt(vx * vy);
}

RandomInstance random_instance(std::uint64_t seed, int state_count,
                               std::int64_t length, EmissionKind kind) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> entry(0.05, 1.0);
  Eigen::MatrixXd a(state_count, state_count);
  for (int j = 0; j < state_count; ++j) {
    double sum = 0.0;
    for (int i = 0; i < state_count; ++i) {
      a(i, j) = entry(rng);
      sum += a(i, j);
    }
    a.col(j) /= sum;
  }

  EmissionFamily emissions = [&]() {
    if (kind == EmissionKind::Gaussian) {
      std::uniform_real_distribution<double> mean_dist(-3.0, 3.0);
      std::uniform_real_distribution<double> var_dist(0.5, 2.0);
      Eigen::VectorXd means(state_count);
      Eigen::VectorXd vars(state_count);
      for (int i = 0; i < state_count; ++i) {
        means(i) = mean_dist(rng);
        vars(i) = var_dist(rng);
      }
      return EmissionFamily(GaussianEmissions{means, vars});
    }
    std::uniform_real_distribution<double> p_dist(0.2, 0.8);
    Eigen::VectorXd probs(state_count);
    for (int i = 0; i < state_count; ++i) {
      probs(i) = p_dist(rng);
    }
    return EmissionFamily(BernoulliEmissions{probs});
  }();

  HmmParams params(TransitionMatrix(a), std::move(emissions));
  SimulationResult sim = simulate(params, length, seed ^ 0x5bd1e995u);
  return RandomInstance{std::move(params), std::move(sim.observations)};
}

std::vector<std::vector<std::int64_t>> combinations(std::int64_t n,
                                                    std::int64_t k) {
  std::vector<std::vector<std::int64_t>> out;
  std::vector<std::int64_t> pick(static_cast<std::size_t>(k));
  std::iota(pick.begin(), pick.end(), 0);
  while (true) {
    out.push_back(pick);
    std::int64_t i = k - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == n - k + i) {
      --i;
    }
    if (i < 0) {
      break;
    }
    pick[static_cast<std::size_t>(i)] += 1;
    for (std::int64_t j = i + 1; j < k; ++j) {
      pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  return out;
}

}  // namespace csghmm::testing
