#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "datasets.hpp"
#include "runner.hpp"

namespace {

using csghmm::tools::ExperimentConfig;

void report_error(const std::string& kind, const std::string& message) {
  nlohmann::json j;
  j["error"] = kind;
  j["message"] = message;
  std::fprintf(stderr, "%s\n", j.dump().c_str());
}

std::string error_kind(const std::exception& e) {
  std::string name = typeid(e).name();
  // Demangled names are nicer but not worth a libstdc++ dependency here;
  // strip the namespace tag if the mangled form carries it.
  const auto pos = name.find("csghmm");
  return pos == std::string::npos ? name : name.substr(pos);
}

ExperimentConfig load_config_with_overrides(
    const std::string& config_path, const std::optional<std::uint64_t>& seed,
    const std::optional<std::string>& out,
    const std::optional<std::string>& algorithm,
    const std::optional<std::int64_t>& iterations,
    const std::optional<std::int64_t>& length,
    const std::optional<int>& threads) {
  ExperimentConfig cfg = ExperimentConfig::load(config_path);
  if (seed) cfg.seed = *seed;
  if (out) cfg.output_dir = *out;
  if (algorithm) cfg.sampler.algorithm = *algorithm;
  if (iterations) cfg.sampler.sgld.iterations = *iterations;
  if (length) cfg.dataset.length = *length;
  if (threads) cfg.threads = *threads;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustered stochastic-gradient MCMC for hidden Markov models"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand(
      "generate", "Simulate a builtin dataset and write it to disk");
  std::string gen_name;
  std::int64_t gen_length = 0;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "data";
  generate->add_option("--name", gen_name, "BD, ID, BERN or RARE2")->required();
  generate->add_option("--T", gen_length, "series length (0: dataset default)");
  generate->add_option("--seed", gen_seed, "rng seed");
  generate->add_option("--out", gen_out, "output directory");

  // run
  auto* run = app.add_subcommand("run", "Run a configured experiment");
  std::string run_config;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::string> run_out;
  std::optional<std::string> run_algorithm;
  std::optional<std::int64_t> run_iterations;
  std::optional<std::int64_t> run_length;
  std::optional<int> run_threads;
  run->add_option("--config", run_config, "experiment config JSON")->required();
  run->add_option("--seed", run_seed, "override the config seed");
  run->add_option("--out", run_out, "override the output directory");
  run->add_option("--algorithm", run_algorithm, "sgmcmc or csgmcmc");
  run->add_option("--iters", run_iterations, "override the iteration count");
  run->add_option("--T", run_length, "override the series length");
  run->add_option("--threads", run_threads, "cap the worker pool");

  // variance-sweep
  auto* sweep = app.add_subcommand(
      "variance-sweep",
      "Monte Carlo gradient variance over an (S, L) grid for both estimators");
  std::string sweep_config;
  std::vector<std::int64_t> sweep_s;
  std::vector<int> sweep_l;
  int sweep_reps = 100;
  std::string sweep_out = "sweep";
  std::optional<std::uint64_t> sweep_seed;
  std::optional<std::string> sweep_params;
  std::optional<int> sweep_threads;
  sweep->add_option("--config", sweep_config, "experiment config JSON")->required();
  sweep->add_option("--s-grid", sweep_s, "subsample sizes")->required();
  sweep->add_option("--l-grid", sweep_l, "subchain lengths (odd)")->required();
  sweep->add_option("--reps", sweep_reps, "Monte Carlo repetitions per cell");
  sweep->add_option("--out", sweep_out, "output directory");
  sweep->add_option("--seed", sweep_seed, "override the config seed");
  sweep->add_option("--params", sweep_params,
                    "JSON parameter file fixing the evaluation point "
                    "(defaults to the builtin dataset's true parameters)");
  sweep->add_option("--threads", sweep_threads, "cap the worker pool");

  // eval-trace
  auto* evalt = app.add_subcommand(
      "eval-trace", "Recompute metrics from a saved run directory");
  std::string eval_dir;
  evalt->add_option("--run-dir", eval_dir, "directory with config.json and trace.csv")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      const auto files =
          csghmm::tools::generate_dataset(gen_name, gen_length, gen_seed, gen_out);
      for (const auto& f : files) {
        std::printf("%s\n", f.c_str());
      }
    } else if (run->parsed()) {
      ExperimentConfig cfg = load_config_with_overrides(
          run_config, run_seed, run_out, run_algorithm, run_iterations,
          run_length, run_threads);
      const auto outputs = csghmm::tools::run_experiment(cfg);
      for (const auto& f : outputs.files) {
        std::printf("%s\n", f.c_str());
      }
    } else if (sweep->parsed()) {
      ExperimentConfig cfg = ExperimentConfig::load(sweep_config);
      if (sweep_seed) cfg.seed = *sweep_seed;
      if (sweep_threads) cfg.threads = *sweep_threads;
      const auto outputs = csghmm::tools::variance_sweep(
          cfg, sweep_s, sweep_l, sweep_reps, sweep_out, sweep_params);
      for (const auto& f : outputs.files) {
        std::printf("%s\n", f.c_str());
      }
    } else if (evalt->parsed()) {
      const auto outputs = csghmm::tools::eval_trace(eval_dir);
      for (const auto& f : outputs.files) {
        std::printf("%s\n", f.c_str());
      }
    }
  } catch (const csghmm::Error& e) {
    report_error(error_kind(e), e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error("std::exception", e.what());
    return 1;
  }
  return 0;
}
