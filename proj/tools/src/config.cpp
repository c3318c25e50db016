#include "config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace csghmm::tools {

namespace {

using nlohmann::json;

json buffer_to_json(const BufferPolicy& policy) {
  json j;
  if (policy.mode == BufferPolicy::Mode::Fixed) {
    j["mode"] = "fixed";
    j["B"] = policy.fixed_length;
  } else {
    j["mode"] = "adaptive";
    j["safety"] = policy.safety;
  }
  return j;
}

BufferPolicy buffer_from_json(const json& j) {
  const std::string mode = j.value("mode", "adaptive");
  if (mode == "fixed") {
    return BufferPolicy::fixed(j.at("B").get<std::int64_t>());
  }
  if (mode != "adaptive") {
    throw ShapeMismatchError("buffer mode must be adaptive or fixed");
  }
  return BufferPolicy::adaptive(j.value("safety", 1.0));
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.name.empty() == dataset.csv_path.empty()) {
    throw ShapeMismatchError(
        "dataset must name exactly one of a builtin or a csv path");
  }
  if (!dataset.csv_path.empty()) {
    if (model.state_count < 1) {
      throw ShapeMismatchError("csv datasets need an explicit state count");
    }
    if (dataset.length < 1) {
      throw ShapeMismatchError("csv datasets need a max length");
    }
  }
  if (partition.window_length < 1 || partition.window_length % 2 == 0) {
    throw InvalidLengthError("subchain length must be odd and positive");
  }
  if (partition.min_gap < 0) {
    throw InvalidLengthError("minimum gap must be nonnegative");
  }
  if (sampler.algorithm != "sgmcmc" && sampler.algorithm != "csgmcmc") {
    throw ShapeMismatchError("algorithm must be sgmcmc or csgmcmc");
  }
  if (sampler.algorithm == "csgmcmc") {
    if (!plan.stratified) {
      throw ShapeMismatchError("csgmcmc requires a stratified plan");
    }
    if (plan.cluster_count < 1 ||
        static_cast<int>(plan.quotas.size()) != plan.cluster_count) {
      throw ShapeMismatchError("stratified plans need one quota per cluster");
    }
    for (std::int64_t b : plan.quotas) {
      if (b < 1) {
        throw QuotaExceedsClusterError("quotas must be at least 1");
      }
    }
    if (plan.restarts < 1) {
      throw ShapeMismatchError("clustering restarts must be at least 1");
    }
  } else {
    if (plan.stratified) {
      throw ShapeMismatchError("sgmcmc requires a uniform plan");
    }
    if (plan.subsample_count < 1) {
      throw ShapeMismatchError("subsample count must be at least 1");
    }
  }
  sampler.sgld.validate();
  if (eval.horizon < 1 || eval.holdout_length <= eval.horizon ||
      !(eval.level > 0.0 && eval.level < 1.0) || eval.cadence < 1) {
    throw ShapeMismatchError("evaluation section is inconsistent");
  }
  if (threads < 1) {
    throw ShapeMismatchError("threads must be at least 1");
  }
  if (output_dir.empty()) {
    throw ShapeMismatchError("output directory must be set");
  }
}

std::string ExperimentConfig::to_json() const {
  json j;
  if (!dataset.name.empty()) {
    j["dataset"]["name"] = dataset.name;
  } else {
    j["dataset"]["csv"] = dataset.csv_path;
    j["dataset"]["column"] = dataset.csv_column;
  }
  j["dataset"]["T"] = dataset.length;
  j["model"]["K"] = model.state_count;
  j["model"]["family"] =
      model.family == EmissionKind::Gaussian ? "gaussian" : "bernoulli";
  j["partition"]["L"] = partition.window_length;
  j["partition"]["nu"] = partition.min_gap;
  if (plan.stratified) {
    j["plan"]["type"] = "stratified";
    j["plan"]["M"] = plan.cluster_count;
    j["plan"]["quotas"] = plan.quotas;
    j["plan"]["preprocessing"] =
        plan.preprocessing == WindowPreprocessing::SortWithinWindow ? "sort"
                                                                    : "none";
    j["plan"]["restarts"] = plan.restarts;
  } else {
    j["plan"]["type"] = "uniform";
    j["plan"]["S"] = plan.subsample_count;
  }
  j["sampler"]["algorithm"] = sampler.algorithm;
  j["sampler"]["step_a"] = sampler.sgld.step_a;
  j["sampler"]["step_b"] = sampler.sgld.step_b;
  j["sampler"]["step_gamma"] = sampler.sgld.step_gamma;
  j["sampler"]["inject_noise"] = sampler.sgld.inject_noise;
  j["sampler"]["iterations"] = sampler.sgld.iterations;
  j["sampler"]["inner_steps"] = sampler.sgld.inner_steps;
  j["sampler"]["buffer"] = buffer_to_json(sampler.buffer);
  j["eval"]["horizon"] = eval.horizon;
  j["eval"]["holdout"] = eval.holdout_length;
  j["eval"]["level"] = eval.level;
  j["eval"]["cadence"] = eval.cadence;
  j["seed"] = seed;
  j["threads"] = threads;
  j["output_dir"] = output_dir;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what(), 0);
  }
  ExperimentConfig cfg;
  const json& ds = j.at("dataset");
  if (ds.contains("name")) {
    cfg.dataset.name = ds.at("name").get<std::string>();
  }
  if (ds.contains("csv")) {
    cfg.dataset.csv_path = ds.at("csv").get<std::string>();
    cfg.dataset.csv_column = ds.value("column", 0);
  }
  cfg.dataset.length = ds.value("T", std::int64_t{0});

  if (j.contains("model")) {
    cfg.model.state_count = j["model"].value("K", 0);
    const std::string family = j["model"].value("family", "gaussian");
    if (family != "gaussian" && family != "bernoulli") {
      throw ShapeMismatchError("emission family must be gaussian or bernoulli");
    }
    cfg.model.family = family == "gaussian" ? EmissionKind::Gaussian
                                            : EmissionKind::Bernoulli;
  }

  const json& part = j.at("partition");
  cfg.partition.window_length = part.at("L").get<int>();
  cfg.partition.min_gap = part.value("nu", std::int64_t{0});

  const json& plan = j.at("plan");
  const std::string plan_type = plan.at("type").get<std::string>();
  if (plan_type == "stratified") {
    cfg.plan.stratified = true;
    cfg.plan.cluster_count = plan.at("M").get<int>();
    cfg.plan.quotas = plan.at("quotas").get<std::vector<std::int64_t>>();
    cfg.plan.preprocessing = plan.value("preprocessing", "none") == "sort"
                                 ? WindowPreprocessing::SortWithinWindow
                                 : WindowPreprocessing::None;
    cfg.plan.restarts = plan.value("restarts", 1);
  } else if (plan_type == "uniform") {
    cfg.plan.stratified = false;
    cfg.plan.subsample_count = plan.at("S").get<std::int64_t>();
  } else {
    throw ShapeMismatchError("plan type must be uniform or stratified");
  }

  const json& samp = j.at("sampler");
  cfg.sampler.algorithm = samp.at("algorithm").get<std::string>();
  cfg.sampler.sgld.step_a = samp.value("step_a", 1e-4);
  cfg.sampler.sgld.step_b = samp.value("step_b", 0.0);
  cfg.sampler.sgld.step_gamma = samp.value("step_gamma", 0.0);
  cfg.sampler.sgld.inject_noise = samp.value("inject_noise", true);
  cfg.sampler.sgld.iterations = samp.value("iterations", std::int64_t{1});
  cfg.sampler.sgld.inner_steps = samp.value("inner_steps", 1);
  if (samp.contains("buffer")) {
    cfg.sampler.buffer = buffer_from_json(samp["buffer"]);
  }

  if (j.contains("eval")) {
    const json& ev = j["eval"];
    cfg.eval.horizon = ev.value("horizon", 10);
    cfg.eval.holdout_length = ev.value("holdout", std::int64_t{2000});
    cfg.eval.level = ev.value("level", 0.95);
    cfg.eval.cadence = ev.value("cadence", std::int64_t{25});
  }

  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.threads = j.value("threads", 1);
  cfg.output_dir = j.value("output_dir", "run");
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config file: " + path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

}  // namespace csghmm::tools
