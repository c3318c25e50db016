#include "runner.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "csghmm/random.hpp"
#include "csghmm/sampler.hpp"
#include "csghmm/subchain.hpp"
#include "datasets.hpp"

namespace csghmm::tools {

namespace {

namespace fs = std::filesystem;

// Seed streams derived from the experiment seed.
enum SeedStream : std::uint64_t {
  kDataStream = 1,
  kHoldoutStream = 2,
  kClusterStream = 3,
  kSamplerStream = 4,
  kWindowStream = 5,
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct ResolvedData {
  ObservationSeries series;
  std::optional<HmmParams> truth;
  std::optional<ObservationSeries> holdout;
  int state_count;
  EmissionKind family;
};

ResolvedData resolve_data(const ExperimentConfig& cfg) {
  if (!cfg.dataset.name.empty()) {
    HmmParams truth = builtin_params(cfg.dataset.name);
    const std::int64_t length = cfg.dataset.length > 0
                                    ? cfg.dataset.length
                                    : builtin_default_length(cfg.dataset.name);
    SimulationResult sim =
        simulate(truth, length, derive_seed(cfg.seed, kDataStream));
    SimulationResult hold = simulate(truth, cfg.eval.holdout_length,
                                     derive_seed(cfg.seed, kHoldoutStream));
    const int k = truth.state_count();
    const EmissionKind family = truth.emissions().kind();
    return ResolvedData{std::move(sim.observations), std::move(truth),
                        std::move(hold.observations), k, family};
  }

  IngestReport report =
      ingest_csv(cfg.dataset.csv_path, cfg.dataset.csv_column,
                 cfg.dataset.length, derive_seed(cfg.seed, kWindowStream));
  if (report.skipped_nonfinite > 0) {
    std::fprintf(stderr, "note: skipped %lld non-finite rows from %s\n",
                 static_cast<long long>(report.skipped_nonfinite),
                 cfg.dataset.csv_path.c_str());
  }
  return ResolvedData{ObservationSeries(std::move(report.values)),
                      std::nullopt, std::nullopt, cfg.model.state_count,
                      cfg.model.family};
}

std::vector<std::int64_t> metric_iterations(std::int64_t total,
                                            std::int64_t cadence) {
  std::vector<std::int64_t> out;
  out.push_back(1);
  for (std::int64_t n = cadence; n <= total; n += cadence) {
    if (n != out.back()) {
      out.push_back(n);
    }
  }
  if (out.back() != total) {
    out.push_back(total);
  }
  return out;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open for writing: " + path);
  }
  out << contents;
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

struct MetricRow {
  std::string name;
  std::int64_t iteration;
  double value;
};

void write_metrics_csv(const std::vector<MetricRow>& rows,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open for writing: " + path);
  }
  out << "metric,iteration,value\n";
  for (const MetricRow& row : rows) {
    out << row.name << ',' << row.iteration << ',' << format_double(row.value)
        << '\n';
  }
}

void evaluate_trace(const SamplerTrace& trace, const ResolvedData& data,
                    const ExperimentConfig& cfg, const fs::path& dir,
                    std::vector<std::string>& files) {
  std::vector<MetricRow> rows;
  const std::vector<std::int64_t> when =
      metric_iterations(static_cast<std::int64_t>(trace.records.size()),
                        cfg.eval.cadence);
  for (std::int64_t n : when) {
    const TraceRecord& rec = trace.records[static_cast<std::size_t>(n - 1)];
    if (data.holdout.has_value()) {
      rows.push_back(MetricRow{"log_predictive", n,
                               k_step_log_predictive(rec.params, *data.holdout,
                                                     cfg.eval.horizon)});
    }
    if (data.truth.has_value()) {
      const Eigen::MatrixXd& ref = data.truth->transition().matrix();
      const Eigen::MatrixXd& a = rec.params.transition().matrix();
      rows.push_back(MetricRow{"a_error_fro", n,
                               transition_error(a, ref, MatrixNorm::Frobenius)});
      rows.push_back(MetricRow{"a_error_spec", n,
                               transition_error(a, ref, MatrixNorm::Spectral)});
      rows.push_back(MetricRow{
          "a_error_perm_fro", n,
          transition_error_permutation_aware(a, ref, MatrixNorm::Frobenius)});
    }
  }
  const std::string metrics_path = (dir / "metrics.csv").string();
  write_metrics_csv(rows, metrics_path);
  files.push_back(metrics_path);

  // Intervals are anchored at the filter state after the training series and
  // projected 1..horizon steps ahead.
  const HmmParams& final_params = trace.records.back().params;
  const Eigen::VectorXd filtered =
      filtered_state_distribution(final_params, data.series);
  std::string intervals = "k,lo,hi\n";
  for (int k = 1; k <= cfg.eval.horizon; ++k) {
    const Interval iv =
        predictive_interval(final_params, filtered, k, cfg.eval.level);
    intervals += std::to_string(k) + ',' + format_double(iv.lo) + ',' +
                 format_double(iv.hi) + '\n';
  }
  const std::string intervals_path = (dir / "intervals.csv").string();
  write_file(intervals_path, intervals);
  files.push_back(intervals_path);
}

struct PreparedRun {
  SubchainPartition part;
  std::optional<ClusterModel> clusters;
  HmmParams initial;
  SgldConfig sgld;
};

PreparedRun prepare_run(const ExperimentConfig& cfg, const ResolvedData& data) {
  const std::int64_t fixed_buffer =
      cfg.sampler.buffer.mode == BufferPolicy::Mode::Fixed
          ? cfg.sampler.buffer.fixed_length
          : 0;
  SubchainPartition part =
      partition(data.series.length(), cfg.partition.window_length, fixed_buffer,
                cfg.partition.min_gap);

  std::optional<ClusterModel> clusters;
  if (cfg.plan.stratified) {
    clusters = cluster_series_windows(
        data.series, part, cfg.plan.cluster_count,
        derive_seed(cfg.seed, kClusterStream), cfg.plan.preprocessing,
        cfg.plan.restarts);
    std::int64_t total_quota = 0;
    for (std::size_t m = 0; m < cfg.plan.quotas.size(); ++m) {
      if (cfg.plan.quotas[m] > clusters->sizes()[m]) {
        throw QuotaExceedsClusterError(
            "quota " + std::to_string(cfg.plan.quotas[m]) +
            " exceeds cluster size " + std::to_string(clusters->sizes()[m]));
      }
      total_quota += cfg.plan.quotas[m];
    }
    if (total_quota > part.window_count()) {
      throw ShapeMismatchError("total quota exceeds the window count");
    }
  }

  HmmParams initial = initial_params(
      data.state_count, data.family, data.series,
      clusters.has_value() ? &clusters.value() : nullptr);

  SgldConfig sgld = cfg.sampler.sgld;
  sgld.seed = derive_seed(cfg.seed, kSamplerStream);
  return PreparedRun{part, std::move(clusters), std::move(initial), sgld};
}

}  // namespace

RunOutputs run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const ResolvedData data = resolve_data(cfg);
  PreparedRun prepared = prepare_run(cfg, data);

  fs::create_directories(cfg.output_dir);
  const fs::path dir(cfg.output_dir);
  RunOutputs outputs;
  outputs.output_dir = cfg.output_dir;

  const std::string config_path = (dir / "config.json").string();
  write_file(config_path, cfg.to_json() + "\n");
  outputs.files.push_back(config_path);

  if (prepared.clusters.has_value()) {
    const std::string clusters_path = (dir / "clusters.json").string();
    write_file(clusters_path, prepared.clusters->to_json() + "\n");
    outputs.files.push_back(clusters_path);
  }

  SamplerTrace trace;
  if (cfg.sampler.algorithm == "csgmcmc") {
    trace = run_csgmcmc(data.series, prepared.initial, prepared.sgld,
                        prepared.part, *prepared.clusters, cfg.plan.quotas,
                        PriorSpec::flat());
  } else {
    trace = run_sgmcmc(data.series, prepared.initial, prepared.sgld,
                       prepared.part, cfg.plan.subsample_count,
                       cfg.sampler.buffer, PriorSpec::flat());
  }

  {
    std::ofstream out(dir / "trace.csv");
    write_trace_csv(trace, out, /*zero_elapsed_column=*/true);
  }
  outputs.files.push_back((dir / "trace.csv").string());
  {
    std::ofstream out(dir / "timing.csv");
    write_timing_csv(trace, out);
  }
  outputs.files.push_back((dir / "timing.csv").string());

  if (trace.aborted || trace.records.empty()) {
    throw NonFiniteGradientError(trace.abort_message.empty()
                                     ? "sampler produced no iterations"
                                     : trace.abort_message);
  }

  evaluate_trace(trace, data, cfg, dir, outputs.files);
  return outputs;
}

RunOutputs eval_trace(const std::string& run_dir) {
  const fs::path dir(run_dir);
  ExperimentConfig cfg = ExperimentConfig::load((dir / "config.json").string());
  cfg.validate();
  const ResolvedData data = resolve_data(cfg);

  std::ifstream trace_in(dir / "trace.csv");
  if (!trace_in) {
    throw IoError("cannot open trace: " + (dir / "trace.csv").string());
  }
  const HmmParams reference =
      initial_params(data.state_count, data.family, data.series, nullptr);
  SamplerTrace trace =
      read_trace_csv(trace_in, data.state_count, reference.emissions());
  if (trace.records.empty()) {
    throw EmptySeriesError("trace has no iterations");
  }

  RunOutputs outputs;
  outputs.output_dir = run_dir;
  evaluate_trace(trace, data, cfg, dir, outputs.files);
  return outputs;
}

RunOutputs variance_sweep(const ExperimentConfig& cfg,
                          const std::vector<std::int64_t>& s_grid,
                          const std::vector<int>& l_grid, int reps,
                          const std::string& out_dir,
                          const std::optional<std::string>& params_json_path) {
  cfg.validate();
  if (s_grid.empty() || l_grid.empty() || reps < 2) {
    throw ShapeMismatchError("variance sweep needs nonempty grids and reps >= 2");
  }
  const ResolvedData data = resolve_data(cfg);

  std::optional<HmmParams> at;
  if (params_json_path.has_value()) {
    std::ifstream in(*params_json_path);
    if (!in) {
      throw IoError("cannot open params: " + *params_json_path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    at = params_from_json(buf.str());
  } else if (data.truth.has_value()) {
    at = data.truth;
  } else {
    throw ShapeMismatchError(
        "csv datasets need --params for the evaluation point");
  }

  const int cluster_count = cfg.plan.stratified ? cfg.plan.cluster_count
                                                : at->state_count();
  fs::create_directories(out_dir);
  std::string summary = "estimator,S,L,mean_variance\n";
  std::string components = "estimator,S,L,component,variance\n";

  for (int l : l_grid) {
    const std::int64_t fixed_buffer =
        cfg.sampler.buffer.mode == BufferPolicy::Mode::Fixed
            ? cfg.sampler.buffer.fixed_length
            : buffer_from_spectral_gap(at->transition(),
                                       cfg.sampler.buffer.safety,
                                       data.series.length());
    const SubchainPartition part = partition(data.series.length(), l,
                                             fixed_buffer, cfg.partition.min_gap);
    const ClusterModel clusters = cluster_series_windows(
        data.series, part, cluster_count,
        derive_seed(cfg.seed, kClusterStream + static_cast<std::uint64_t>(l)),
        cfg.plan.preprocessing, cfg.plan.restarts);

    for (std::int64_t s : s_grid) {
      // Equal per-cluster quotas at matched total subsample size; the
      // remainder goes to the first clusters.
      std::vector<std::int64_t> quotas(static_cast<std::size_t>(cluster_count),
                                       s / cluster_count);
      for (std::int64_t r = 0; r < s % cluster_count; ++r) {
        quotas[static_cast<std::size_t>(r)] += 1;
      }
      std::int64_t deficit = 0;
      for (std::size_t m = 0; m < quotas.size(); ++m) {
        if (quotas[m] < 1) {
          throw QuotaExceedsClusterError(
              "grid total " + std::to_string(s) +
              " leaves cluster " + std::to_string(m) + " without a draw");
        }
        if (quotas[m] > clusters.sizes()[m]) {
          deficit += quotas[m] - clusters.sizes()[m];
          quotas[m] = clusters.sizes()[m];
        }
      }
      // Keep the totals matched: overflow moves to clusters with room.
      for (std::size_t m = 0; deficit > 0 && m < quotas.size(); ++m) {
        const std::int64_t room = clusters.sizes()[m] - quotas[m];
        const std::int64_t take = std::min(room, deficit);
        quotas[m] += take;
        deficit -= take;
      }
      if (deficit > 0) {
        throw QuotaExceedsClusterError("grid total exceeds the window count");
      }

      const auto uniform_draw = [&](std::uint64_t seed) {
        return uniform_minibatch_gradient(*at, data.series, part,
                                          UniformPlan{s, seed},
                                          PriorSpec::flat());
      };
      const auto stratified_draw = [&](std::uint64_t seed) {
        return stratified_gradient(*at, data.series, part, clusters,
                                   StratifiedPlan{quotas, seed},
                                   PriorSpec::flat());
      };
      const std::uint64_t cell_seed =
          derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(l) * 997 +
                                    static_cast<std::uint64_t>(s));
      const VarianceSummary uniform =
          gradient_variance_mc(uniform_draw, reps, cell_seed, cfg.threads);
      const VarianceSummary stratified = gradient_variance_mc(
          stratified_draw, reps, derive_seed(cell_seed, 1), cfg.threads);

      summary += "uniform," + std::to_string(s) + ',' + std::to_string(l) +
                 ',' + format_double(uniform.mean_variance) + '\n';
      summary += "stratified," + std::to_string(s) + ',' + std::to_string(l) +
                 ',' + format_double(stratified.mean_variance) + '\n';
      for (int c = 0; c < uniform.per_component.size(); ++c) {
        components += "uniform," + std::to_string(s) + ',' + std::to_string(l) +
                      ',' + std::to_string(c) + ',' +
                      format_double(uniform.per_component(c)) + '\n';
        components += "stratified," + std::to_string(s) + ',' +
                      std::to_string(l) + ',' + std::to_string(c) + ',' +
                      format_double(stratified.per_component(c)) + '\n';
      }
    }
  }

  RunOutputs outputs;
  outputs.output_dir = out_dir;
  const std::string summary_path =
      (fs::path(out_dir) / "variance_sweep.csv").string();
  const std::string components_path =
      (fs::path(out_dir) / "variance_components.csv").string();
  write_file(summary_path, summary);
  write_file(components_path, components);
  outputs.files = {summary_path, components_path};
  return outputs;
}

}  // namespace csghmm::tools
