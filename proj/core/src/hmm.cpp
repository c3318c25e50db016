#include "csghmm/hmm.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

namespace csghmm {

namespace {

constexpr double kColumnSumTolerance = 1e-8;
constexpr double kEntryTolerance = 1e-9;
constexpr double kReducibilityFloor = 1e-12;
constexpr double kBernoulliClamp = 1e-6;
constexpr double kLogTwoPi = 1.8378770664093454835606594728112353;

void check_square(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw ShapeMismatchError("transition matrix must be square and nonempty");
  }
}

}  // namespace

TransitionMatrix::TransitionMatrix(Eigen::MatrixXd columns_are_distributions)
    : matrix_(std::move(columns_are_distributions)) {
  check_square(matrix_);
  const int k = static_cast<int>(matrix_.rows());
  for (int j = 0; j < k; ++j) {
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
      const double v = matrix_(i, j);
      if (!std::isfinite(v) || v < -kEntryTolerance || v > 1.0 + kColumnSumTolerance) {
        throw NonStochasticError("transition entry outside [0, 1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kColumnSumTolerance) {
      throw NonStochasticError("transition column does not sum to one");
    }
    for (int i = 0; i < k; ++i) {
      matrix_(i, j) = std::max(matrix_(i, j), 0.0) / sum;
    }
  }
}

TransitionMatrix TransitionMatrix::uniform(int state_count) {
  if (state_count < 1) {
    throw ShapeMismatchError("state count must be positive");
  }
  return TransitionMatrix(Eigen::MatrixXd::Constant(state_count, state_count,
                                                    1.0 / state_count));
}

EmissionFamily::EmissionFamily(GaussianEmissions g) : family_(std::move(g)) {
  const auto& gauss = std::get<GaussianEmissions>(family_);
  if (gauss.means.size() < 1 || gauss.means.size() != gauss.variances.size()) {
    throw ShapeMismatchError("Gaussian emissions need matching means/variances");
  }
  for (int i = 0; i < gauss.variances.size(); ++i) {
    if (!(gauss.variances(i) > 0.0) || !std::isfinite(gauss.variances(i)) ||
        !std::isfinite(gauss.means(i))) {
      throw ShapeMismatchError("Gaussian variances must be finite and positive");
    }
  }
}

EmissionFamily::EmissionFamily(BernoulliEmissions b) : family_(std::move(b)) {
  const auto& bern = std::get<BernoulliEmissions>(family_);
  if (bern.success_probs.size() < 1) {
    throw ShapeMismatchError("Bernoulli emissions need at least one state");
  }
  for (int i = 0; i < bern.success_probs.size(); ++i) {
    const double p = bern.success_probs(i);
    if (!(p > 0.0 && p < 1.0)) {
      throw ShapeMismatchError("Bernoulli probabilities must lie inside (0, 1)");
    }
  }
}

EmissionKind EmissionFamily::kind() const {
  return std::holds_alternative<GaussianEmissions>(family_)
             ? EmissionKind::Gaussian
             : EmissionKind::Bernoulli;
}

int EmissionFamily::state_count() const {
  if (kind() == EmissionKind::Gaussian) {
    return static_cast<int>(std::get<GaussianEmissions>(family_).means.size());
  }
  return static_cast<int>(std::get<BernoulliEmissions>(family_).success_probs.size());
}

const GaussianEmissions& EmissionFamily::gaussian() const {
  return std::get<GaussianEmissions>(family_);
}

const BernoulliEmissions& EmissionFamily::bernoulli() const {
  return std::get<BernoulliEmissions>(family_);
}

double EmissionFamily::log_density(int state, double y) const {
  if (kind() == EmissionKind::Gaussian) {
    const auto& g = gaussian();
    const double d = y - g.means(state);
    return -0.5 * (kLogTwoPi + std::log(g.variances(state)) +
                   d * d / g.variances(state));
  }
  const double p = bernoulli().success_probs(state);
  return y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
}

double EmissionFamily::density(int state, double y) const {
  return std::exp(log_density(state, y));
}

Eigen::VectorXd EmissionFamily::density_vector(double y) const {
  const int k = state_count();
  Eigen::VectorXd out(k);
  for (int i = 0; i < k; ++i) {
    out(i) = density(i, y);
  }
  return out;
}

int EmissionFamily::parameter_count() const {
  return kind() == EmissionKind::Gaussian ? 2 * state_count() : state_count();
}

Eigen::VectorXd EmissionFamily::parameters() const {
  const int k = state_count();
  Eigen::VectorXd out(parameter_count());
  if (kind() == EmissionKind::Gaussian) {
    const auto& g = gaussian();
    out.head(k) = g.means;
    for (int i = 0; i < k; ++i) {
      out(k + i) = std::log(g.variances(i));
    }
  } else {
    out = bernoulli().success_probs;
  }
  return out;
}

EmissionFamily EmissionFamily::with_parameters(const Eigen::VectorXd& flat) const {
  if (flat.size() != parameter_count()) {
    throw ShapeMismatchError("emission parameter vector has wrong length");
  }
  const int k = state_count();
  if (kind() == EmissionKind::Gaussian) {
    GaussianEmissions g;
    g.means = flat.head(k);
    g.variances.resize(k);
    for (int i = 0; i < k; ++i) {
      g.variances(i) = std::exp(flat(k + i));
    }
    return EmissionFamily(std::move(g));
  }
  return EmissionFamily(BernoulliEmissions{flat});
}

Eigen::VectorXd EmissionFamily::clamp_parameters(Eigen::VectorXd flat) const {
  if (kind() == EmissionKind::Bernoulli) {
    for (int i = 0; i < flat.size(); ++i) {
      flat(i) = std::clamp(flat(i), kBernoulliClamp, 1.0 - kBernoulliClamp);
    }
  }
  return flat;
}

void EmissionFamily::add_scaled_score(int state, double y, double weight,
                                      Eigen::VectorXd& grad) const {
  const int k = state_count();
  if (kind() == EmissionKind::Gaussian) {
    const auto& g = gaussian();
    const double d = y - g.means(state);
    grad(state) += weight * d / g.variances(state);
    // Derivative w.r.t. log variance.
    grad(k + state) += weight * (-0.5 + 0.5 * d * d / g.variances(state));
  } else {
    const double p = bernoulli().success_probs(state);
    grad(state) += weight * (y / p - (1.0 - y) / (1.0 - p));
  }
}

double EmissionFamily::sample(int state, std::mt19937_64& rng) const {
  if (kind() == EmissionKind::Gaussian) {
    const auto& g = gaussian();
    std::normal_distribution<double> dist(g.means(state),
                                          std::sqrt(g.variances(state)));
    return dist(rng);
  }
  std::bernoulli_distribution dist(bernoulli().success_probs(state));
  return dist(rng) ? 1.0 : 0.0;
}

HmmParams::HmmParams(TransitionMatrix transition, EmissionFamily emissions)
    : transition_(std::move(transition)), emissions_(std::move(emissions)) {
  if (transition_.state_count() != emissions_.state_count()) {
    throw ShapeMismatchError("emission state count must equal transition size");
  }
}

ObservationSeries::ObservationSeries(std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.empty()) {
    throw EmptySeriesError("observation series must not be empty");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw ShapeMismatchError("observations must be finite");
    }
  }
}

LatentPath::LatentPath(std::vector<int> states, int state_count)
    : states_(std::move(states)) {
  if (states_.empty()) {
    throw EmptySeriesError("latent path must not be empty");
  }
  for (int s : states_) {
    if (s < 1 || s > state_count) {
      throw ShapeMismatchError("latent state outside {1..K}");
    }
  }
}

PriorSpec PriorSpec::flat() { return PriorSpec(true, 0.0, 1.0); }

PriorSpec PriorSpec::gaussian(double mean, double variance) {
  if (!(variance > 0.0)) {
    throw ShapeMismatchError("prior variance must be positive");
  }
  return PriorSpec(false, mean, variance);
}

double PriorSpec::neg_log_density(const Eigen::VectorXd& theta) const {
  if (flat_) {
    return 0.0;
  }
  double acc = 0.0;
  for (int i = 0; i < theta.size(); ++i) {
    const double d = theta(i) - mean_;
    acc += 0.5 * d * d / variance_;
  }
  return acc;
}

void PriorSpec::add_grad_neg_log(const Eigen::VectorXd& theta,
                                 Eigen::VectorXd& grad) const {
  if (flat_) {
    return;
  }
  for (int i = 0; i < theta.size(); ++i) {
    grad(i) += (theta(i) - mean_) / variance_;
  }
}

Eigen::VectorXd GradientEstimate::flattened() const {
  const int k = static_cast<int>(transition_grad.rows());
  Eigen::VectorXd out(k * k + emission_grad.size());
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      out(i * k + j) = transition_grad(i, j);
    }
  }
  out.tail(emission_grad.size()) = emission_grad;
  return out;
}

bool GradientEstimate::all_finite() const {
  return transition_grad.allFinite() && emission_grad.allFinite();
}

Eigen::VectorXd flatten_parameters(const HmmParams& params) {
  const int k = params.state_count();
  const Eigen::VectorXd em = params.emissions().parameters();
  Eigen::VectorXd out(k * k + em.size());
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      out(i * k + j) = params.transition()(i, j);
    }
  }
  out.tail(em.size()) = em;
  return out;
}

namespace {

// Positivity pattern of ((A + I) / 2)^K, with entries below the reducibility
// floor treated as zero. All-true means every state reaches every state.
bool is_irreducible(const Eigen::MatrixXd& a) {
  const int k = static_cast<int>(a.rows());
  std::vector<bool> reach(static_cast<std::size_t>(k) * k, false);
  auto at = [&](int i, int j) -> std::vector<bool>::reference {
    return reach[static_cast<std::size_t>(i) * k + j];
  };
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      at(i, j) = (i == j) || a(i, j) > kReducibilityFloor;
    }
  }
  for (int step = 1; step < k; ++step) {
    std::vector<bool> next = reach;
    for (int i = 0; i < k; ++i) {
      for (int m = 0; m < k; ++m) {
        if (!at(i, m)) continue;
        for (int j = 0; j < k; ++j) {
          if (at(m, j)) next[static_cast<std::size_t>(i) * k + j] = true;
        }
      }
    }
    reach = std::move(next);
  }
  return std::all_of(reach.begin(), reach.end(), [](bool b) { return b; });
}

}  // namespace

Eigen::VectorXd stationary_distribution(const TransitionMatrix& a) {
  const int k = a.state_count();
  if (!is_irreducible(a.matrix())) {
    throw ReducibleChainError("transition matrix is reducible");
  }
  if (k == 1) {
    return Eigen::VectorXd::Ones(1);
  }
  Eigen::MatrixXd system(k + 1, k);
  system.topRows(k) = a.matrix() - Eigen::MatrixXd::Identity(k, k);
  system.row(k).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
  rhs(k) = 1.0;
  Eigen::VectorXd pi = system.colPivHouseholderQr().solve(rhs);
  for (int i = 0; i < k; ++i) {
    pi(i) = std::max(pi(i), 0.0);
  }
  pi /= pi.sum();
  return pi;
}

double spectral_gap(const TransitionMatrix& a) {
  const int k = a.state_count();
  if (!is_irreducible(a.matrix())) {
    throw ReducibleChainError("transition matrix is reducible");
  }
  if (k == 1) {
    return 1.0;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a.matrix(), false);
  std::vector<double> moduli(k);
  for (int i = 0; i < k; ++i) {
    moduli[static_cast<std::size_t>(i)] = std::abs(solver.eigenvalues()(i));
  }
  std::sort(moduli.begin(), moduli.end(), std::greater<double>());
  return std::clamp(1.0 - moduli[1], 0.0, 1.0);
}

namespace {

int sample_from_column(const Eigen::VectorXd& probs, double u) {
  double cum = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    cum += probs(i);
    if (u <= cum) {
      return i;
    }
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

SimulationResult simulate(const HmmParams& params, std::int64_t length,
                          std::uint64_t seed) {
  if (length < 1) {
    throw InvalidLengthError("series length must be at least 1");
  }
  const Eigen::VectorXd pi = stationary_distribution(params.transition());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<int> states;
  states.reserve(static_cast<std::size_t>(length) + 1);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(length));

  int state = sample_from_column(pi, unit(rng));
  states.push_back(state + 1);
  for (std::int64_t t = 1; t <= length; ++t) {
    state = sample_from_column(params.transition().matrix().col(state), unit(rng));
    states.push_back(state + 1);
    values.push_back(params.emissions().sample(state, rng));
  }
  return SimulationResult{LatentPath(std::move(states), params.state_count()),
                          ObservationSeries(std::move(values))};
}

Eigen::MatrixXd emission_matrix(const HmmParams& params, double y) {
  return params.emissions().density_vector(y).asDiagonal();
}

double log_marginal_likelihood_raw(const Eigen::MatrixXd& a,
                                   const EmissionFamily& emissions,
                                   const ObservationSeries& y,
                                   const Eigen::VectorXd& initial) {
  check_square(a);
  if (initial.size() != a.rows() || emissions.state_count() != a.rows()) {
    throw ShapeMismatchError("initial distribution and emissions must match A");
  }
  Eigen::VectorXd alpha = initial;
  const double init_sum = alpha.sum();
  if (!(init_sum > 0.0)) {
    throw DegenerateLikelihoodError("initial distribution has zero mass");
  }
  double log_scale = std::log(init_sum);
  alpha /= init_sum;
  for (std::int64_t t = 1; t <= y.length(); ++t) {
    alpha = emissions.density_vector(y.at(t)).asDiagonal() * (a * alpha);
    const double s = alpha.sum();
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw DegenerateLikelihoodError(
          "observation impossible under every state at t=" + std::to_string(t));
    }
    log_scale += std::log(s);
    alpha /= s;
  }
  return log_scale;
}

double log_marginal_likelihood(const HmmParams& params,
                               const ObservationSeries& y,
                               const Eigen::VectorXd& initial) {
  return log_marginal_likelihood_raw(params.transition().matrix(),
                                     params.emissions(), y, initial);
}

double log_marginal_likelihood(const HmmParams& params,
                               const ObservationSeries& y) {
  return log_marginal_likelihood(params, y,
                                 stationary_distribution(params.transition()));
}

GradientEstimate exact_gradient(const HmmParams& params,
                                const ObservationSeries& y,
                                const PriorSpec& prior) {
  const int k = params.state_count();
  const std::int64_t t_len = y.length();
  const Eigen::MatrixXd& a = params.transition().matrix();
  const EmissionFamily& em = params.emissions();

  // Forward sweep: normalized filtered vectors f[t], t = 0..T.
  std::vector<Eigen::VectorXd> forward(static_cast<std::size_t>(t_len) + 1);
  std::vector<Eigen::VectorXd> dens(static_cast<std::size_t>(t_len) + 1);
  forward[0] = stationary_distribution(params.transition());
  for (std::int64_t t = 1; t <= t_len; ++t) {
    dens[static_cast<std::size_t>(t)] = em.density_vector(y.at(t));
    Eigen::VectorXd v =
        dens[static_cast<std::size_t>(t)].cwiseProduct(a * forward[static_cast<std::size_t>(t - 1)]);
    const double s = v.sum();
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw DegenerateLikelihoodError(
          "observation impossible under every state at t=" + std::to_string(t));
    }
    forward[static_cast<std::size_t>(t)] = v / s;
  }

  // Backward sweep accumulates the per-step ratio terms; each ratio is
  // invariant to the running rescaling of both messages.
  Eigen::MatrixXd a_acc = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd e_acc = Eigen::VectorXd::Zero(em.parameter_count());
  Eigen::VectorXd r = Eigen::VectorXd::Constant(k, 1.0 / k);
  for (std::int64_t t = t_len; t >= 1; --t) {
    const Eigen::VectorXd& d = dens[static_cast<std::size_t>(t)];
    const Eigen::VectorXd w = a * forward[static_cast<std::size_t>(t - 1)];
    const Eigen::VectorXd u = d.cwiseProduct(w);
    const double denom = r.dot(u);
    if (!(denom > 0.0)) {
      throw DegenerateLikelihoodError("vanishing likelihood term at t=" +
                                      std::to_string(t));
    }
    if (k > 1) {
      a_acc.noalias() +=
          (r.cwiseProduct(d) * forward[static_cast<std::size_t>(t - 1)].transpose()) / denom;
    }
    for (int s = 0; s < k; ++s) {
      const double weight = r(s) * u(s) / denom;
      if (weight != 0.0) {
        em.add_scaled_score(s, y.at(t), weight, e_acc);
      }
    }
    Eigen::VectorXd next = a.transpose() * d.cwiseProduct(r);
    const double ns = next.sum();
    if (!(ns > 0.0)) {
      throw DegenerateLikelihoodError("vanishing backward message at t=" +
                                      std::to_string(t));
    }
    r = next / ns;
  }

  GradientEstimate grad;
  grad.transition_grad = -a_acc;
  grad.emission_grad = -e_acc;
  grad.kind = EstimatorKind::Full;

  Eigen::VectorXd flat_theta = flatten_parameters(params);
  Eigen::VectorXd flat_grad = grad.flattened();
  prior.add_grad_neg_log(flat_theta, flat_grad);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      grad.transition_grad(i, j) = flat_grad(i * k + j);
    }
  }
  grad.emission_grad = flat_grad.tail(em.parameter_count());
  return grad;
}

TransitionMatrix project_columns_to_simplex(const Eigen::MatrixXd& raw) {
  check_square(raw);
  const int k = static_cast<int>(raw.rows());
  Eigen::MatrixXd out(k, k);
  for (int j = 0; j < k; ++j) {
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
      out(i, j) = std::abs(raw(i, j));
      sum += out(i, j);
    }
    if (!(sum > 0.0) || !std::isfinite(sum)) {
      throw ZeroColumnError("column " + std::to_string(j) +
                            " has no mass to project");
    }
    out.col(j) /= sum;
  }
  return TransitionMatrix(out);
}

}  // namespace csghmm
