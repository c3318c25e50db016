#include "csghmm/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "csghmm/random.hpp"

namespace csghmm {

double SgldConfig::step_size(std::int64_t n) const {
  return step_a * std::pow(step_b + static_cast<double>(n), -step_gamma);
}

void SgldConfig::validate() const {
  if (!(step_a > 0.0) || step_b < 0.0 || step_gamma < 0.0 || step_gamma > 1.0) {
    throw ShapeMismatchError("step schedule needs a > 0, b >= 0, gamma in [0,1]");
  }
  if (iterations < 1 || inner_steps < 1) {
    throw ShapeMismatchError("iteration counts must be at least 1");
  }
}

Eigen::VectorXd sgld_step(const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& grad, double step_size,
                          bool inject_noise, std::mt19937_64& rng) {
  if (theta.size() != grad.size()) {
    throw ShapeMismatchError("parameter and gradient sizes differ");
  }
  if (!grad.allFinite()) {
    throw NonFiniteGradientError("gradient contains non-finite components");
  }
  Eigen::VectorXd out = theta - 0.5 * step_size * grad;
  if (inject_noise) {
    std::normal_distribution<double> noise(0.0, std::sqrt(step_size));
    for (int i = 0; i < out.size(); ++i) {
      out(i) += noise(rng);
    }
  }
  return out;
}

std::int64_t buffer_from_spectral_gap(const TransitionMatrix& a, double safety,
                                      std::int64_t series_length) {
  const double gap = spectral_gap(a);
  const std::int64_t cap = std::max<std::int64_t>(1, series_length / 10);
  if (!(gap > 0.0)) {
    return cap;
  }
  const double raw = std::ceil(safety / gap);
  if (raw >= static_cast<double>(cap)) {
    return cap;
  }
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(raw));
}

namespace {

Eigen::VectorXd flatten_matrix(const Eigen::MatrixXd& a) {
  const int k = static_cast<int>(a.rows());
  Eigen::VectorXd out(k * k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      out(i * k + j) = a(i, j);
    }
  }
  return out;
}

Eigen::MatrixXd unflatten_matrix(const Eigen::VectorXd& flat, int k) {
  Eigen::MatrixXd out(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      out(i, j) = flat(i * k + j);
    }
  }
  return out;
}

double gradient_norm(const GradientEstimate& grad) {
  return grad.flattened().norm();
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

SamplerTrace run_sgmcmc(const ObservationSeries& y, const HmmParams& initial,
                        const SgldConfig& config, const SubchainPartition& part,
                        std::int64_t subsample_count,
                        const BufferPolicy& buffer_policy,
                        const PriorSpec& prior) {
  config.validate();
  const int k = initial.state_count();
  std::mt19937_64 rng(config.seed);
  const auto start = Clock::now();

  SamplerTrace trace;
  trace.records.reserve(static_cast<std::size_t>(config.iterations));
  HmmParams params = initial;

  for (std::int64_t n = 1; n <= config.iterations; ++n) {
    const double eps = config.step_size(n);
    std::int64_t buffer = buffer_policy.mode == BufferPolicy::Mode::Fixed
                              ? buffer_policy.fixed_length
                              : buffer_from_spectral_gap(params.transition(),
                                                         buffer_policy.safety,
                                                         part.series_length);
    SubchainPartition iter_part = part;
    iter_part.buffer_length = buffer;
    // One subsample per iteration, shared by both blocks: the plan seed is
    // fixed, so every inner gradient sees the same centers.
    const UniformPlan plan{subsample_count, derive_seed(config.seed, static_cast<std::uint64_t>(n))};

    GradientEstimate last_grad;
    bool ok = true;

    // Transition block: raw entries move, gradients are taken at the
    // column-projected iterate, the visited iterates are averaged.
    Eigen::MatrixXd raw = params.transition().matrix();
    Eigen::MatrixXd iterate_sum = Eigen::MatrixXd::Zero(k, k);
    for (int s = 0; s < config.inner_steps && ok; ++s) {
      HmmParams at(project_columns_to_simplex(raw), params.emissions());
      GradientEstimate grad =
          uniform_minibatch_gradient(at, y, iter_part, plan, prior);
      if (!grad.all_finite()) {
        trace.aborted = true;
        trace.abort_message = "non-finite transition gradient at iteration " +
                              std::to_string(n);
        ok = false;
        break;
      }
      raw = unflatten_matrix(sgld_step(flatten_matrix(raw),
                                       flatten_matrix(grad.transition_grad),
                                       eps, config.inject_noise, rng),
                             k);
      iterate_sum += raw;
      last_grad = std::move(grad);
    }
    if (!ok) {
      break;
    }
    TransitionMatrix new_a =
        project_columns_to_simplex(iterate_sum / config.inner_steps);

    // Emission block at the updated transition matrix.
    Eigen::VectorXd phi = params.emissions().parameters();
    Eigen::VectorXd phi_sum = Eigen::VectorXd::Zero(phi.size());
    for (int s = 0; s < config.inner_steps && ok; ++s) {
      HmmParams at(new_a, params.emissions().with_parameters(phi));
      GradientEstimate grad =
          uniform_minibatch_gradient(at, y, iter_part, plan, prior);
      if (!grad.all_finite()) {
        trace.aborted = true;
        trace.abort_message = "non-finite emission gradient at iteration " +
                              std::to_string(n);
        ok = false;
        break;
      }
      phi = params.emissions().clamp_parameters(sgld_step(
          phi, grad.emission_grad, eps, config.inject_noise, rng));
      phi_sum += phi;
      last_grad = std::move(grad);
    }
    if (!ok) {
      break;
    }
    EmissionFamily new_em = params.emissions().with_parameters(
        params.emissions().clamp_parameters(phi_sum / config.inner_steps));

    params = HmmParams(new_a, new_em);
    trace.records.push_back(TraceRecord{n, seconds_since(start), params,
                                        gradient_norm(last_grad),
                                        last_grad.sampled_centers});
  }
  return trace;
}

SamplerTrace run_csgmcmc(const ObservationSeries& y, const HmmParams& initial,
                         const SgldConfig& config, const SubchainPartition& part,
                         const ClusterModel& clusters,
                         const std::vector<std::int64_t>& quotas,
                         const PriorSpec& prior) {
  config.validate();
  const int k = initial.state_count();
  std::mt19937_64 rng(config.seed);
  const auto start = Clock::now();

  SamplerTrace trace;
  trace.records.reserve(static_cast<std::size_t>(config.iterations));
  HmmParams params = initial;

  for (std::int64_t n = 1; n <= config.iterations; ++n) {
    const double eps = config.step_size(n);
    const StratifiedPlan plan{quotas, derive_seed(config.seed, static_cast<std::uint64_t>(n))};
    GradientEstimate grad =
        stratified_gradient(params, y, part, clusters, plan, prior);
    if (!grad.all_finite()) {
      trace.aborted = true;
      trace.abort_message =
          "non-finite stratified gradient at iteration " + std::to_string(n);
      break;
    }

    const Eigen::VectorXd theta = flatten_parameters(params);
    const Eigen::VectorXd updated =
        sgld_step(theta, grad.flattened(), eps, config.inject_noise, rng);
    TransitionMatrix new_a =
        project_columns_to_simplex(unflatten_matrix(updated.head(k * k), k));
    EmissionFamily new_em = params.emissions().with_parameters(
        params.emissions().clamp_parameters(updated.tail(theta.size() - k * k)));

    params = HmmParams(new_a, new_em);
    trace.records.push_back(TraceRecord{n, seconds_since(start), params,
                                        gradient_norm(grad),
                                        grad.sampled_centers});
  }
  return trace;
}

HmmParams initial_params(int state_count, EmissionKind kind,
                         const ObservationSeries& y,
                         const ClusterModel* clusters) {
  TransitionMatrix a = TransitionMatrix::uniform(state_count);
  if (kind == EmissionKind::Bernoulli) {
    return HmmParams(a, EmissionFamily(BernoulliEmissions{
                            Eigen::VectorXd::Constant(state_count, 0.5)}));
  }

  Eigen::VectorXd means(state_count);
  if (clusters != nullptr && clusters->cluster_count() == state_count) {
    for (int m = 0; m < state_count; ++m) {
      means(m) = clusters->centroids().col(m).mean();
    }
    std::sort(means.data(), means.data() + means.size());
  } else {
    std::vector<double> sorted = y.values();
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < state_count; ++i) {
      const double level = (i + 0.5) / state_count;
      const auto idx = static_cast<std::size_t>(
          std::min<double>(static_cast<double>(sorted.size()) - 1.0,
                           level * static_cast<double>(sorted.size())));
      means(i) = sorted[idx];
    }
  }

  double mean = 0.0;
  for (double v : y.values()) {
    mean += v;
  }
  mean /= static_cast<double>(y.length());
  double var = 0.0;
  for (double v : y.values()) {
    var += (v - mean) * (v - mean);
  }
  var = std::max(var / static_cast<double>(y.length()), 1e-8);

  return HmmParams(a, EmissionFamily(GaussianEmissions{
                          means, Eigen::VectorXd::Constant(state_count, var)}));
}

namespace {

void append_double(std::string& row, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  row += ',';
  row += buf;
}

}  // namespace

void write_trace_csv(const SamplerTrace& trace, std::ostream& out,
                     bool zero_elapsed_column) {
  if (trace.records.empty()) {
    out << "iteration,elapsed_seconds,grad_norm\n";
    return;
  }
  const HmmParams& first = trace.records.front().params;
  const int k = first.state_count();
  std::string header = "iteration,elapsed_seconds";
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      header += ",a_" + std::to_string(i) + "_" + std::to_string(j);
    }
  }
  if (first.emissions().kind() == EmissionKind::Gaussian) {
    for (int i = 0; i < k; ++i) header += ",mu_" + std::to_string(i);
    for (int i = 0; i < k; ++i) header += ",log_var_" + std::to_string(i);
  } else {
    for (int i = 0; i < k; ++i) header += ",p_" + std::to_string(i);
  }
  header += ",grad_norm\n";
  out << header;

  for (const TraceRecord& rec : trace.records) {
    std::string row = std::to_string(rec.iteration);
    append_double(row, zero_elapsed_column ? 0.0 : rec.elapsed_seconds);
    const Eigen::VectorXd flat = flatten_parameters(rec.params);
    for (int i = 0; i < flat.size(); ++i) {
      append_double(row, flat(i));
    }
    append_double(row, rec.gradient_norm);
    row += '\n';
    out << row;
  }
}

void write_timing_csv(const SamplerTrace& trace, std::ostream& out) {
  out << "iteration,elapsed_seconds\n";
  for (const TraceRecord& rec : trace.records) {
    std::string row = std::to_string(rec.iteration);
    append_double(row, rec.elapsed_seconds);
    row += '\n';
    out << row;
  }
}

SamplerTrace read_trace_csv(std::istream& in, int state_count,
                            const EmissionFamily& reference) {
  SamplerTrace trace;
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError("trace CSV is empty");
  }
  const int k = state_count;
  const int expected =
      2 + k * k + reference.parameter_count() + 1;  // columns per row
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ss, cell, ',')) {
      try {
        cells.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError("non-numeric trace cell", line_no);
      }
    }
    if (static_cast<int>(cells.size()) != expected) {
      throw ParseError("unexpected trace column count", line_no);
    }
    Eigen::MatrixXd a(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        a(i, j) = cells[static_cast<std::size_t>(2 + i * k + j)];
      }
    }
    Eigen::VectorXd phi(reference.parameter_count());
    for (int i = 0; i < phi.size(); ++i) {
      phi(i) = cells[static_cast<std::size_t>(2 + k * k + i)];
    }
    TraceRecord rec{static_cast<std::int64_t>(cells[0]), cells[1],
                    HmmParams(TransitionMatrix(a), reference.with_parameters(phi)),
                    cells.back(),
                    {}};
    trace.records.push_back(std::move(rec));
  }
  return trace;
}

}  // namespace csghmm
