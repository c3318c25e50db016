#include "datasets.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace csghmm::tools {

namespace {

constexpr double kRareEpsilon = 1e-4;

Eigen::MatrixXd rows_to_matrix(const std::vector<std::vector<double>>& rows) {
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

Eigen::VectorXd to_vector(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) {
    v(i++) = x;
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

HmmParams builtin_params(const std::string& name) {
  if (name == "BD") {
    const Eigen::MatrixXd a = rows_to_matrix({{0.9, 0.1, 0.0, 0.0},
                                              {0.0, 0.9, 0.1, 0.0},
                                              {0.0, 0.0, 0.9, 0.1},
                                              {0.1, 0.0, 0.0, 0.9}});
    return HmmParams(TransitionMatrix(a),
                     EmissionFamily(GaussianEmissions{
                         to_vector({-6.0, -3.0, 0.0, 3.0}),
                         Eigen::VectorXd::Constant(4, 2.0)}));
  }
  if (name == "ID") {
    const Eigen::MatrixXd a =
        rows_to_matrix({{0.992, 0.01, 0.01, 0.01, 0.01},
                        {0.002, 0.99, 0.0, 0.0, 0.0},
                        {0.002, 0.0, 0.99, 0.0, 0.0},
                        {0.002, 0.0, 0.0, 0.99, 0.0},
                        {0.002, 0.0, 0.0, 0.0, 0.99}});
    return HmmParams(TransitionMatrix(a),
                     EmissionFamily(GaussianEmissions{
                         to_vector({-20.0, -10.0, 0.0, 10.0, 20.0}),
                         Eigen::VectorXd::Constant(5, 1.0)}));
  }
  if (name == "BERN") {
    const Eigen::MatrixXd a = rows_to_matrix({{0.9, 0.1}, {0.1, 0.9}});
    return HmmParams(TransitionMatrix(a),
                     EmissionFamily(BernoulliEmissions{to_vector({0.9, 0.1})}));
  }
  if (name == "RARE2") {
    const Eigen::MatrixXd a = rows_to_matrix(
        {{1.0 - kRareEpsilon, 0.1}, {kRareEpsilon, 0.9}});
    return HmmParams(TransitionMatrix(a),
                     EmissionFamily(GaussianEmissions{
                         to_vector({0.0, 1.0}),
                         Eigen::VectorXd::Constant(2, 1e-4)}));
  }
  throw UnknownDatasetError("unknown dataset: " + name);
}

std::int64_t builtin_default_length(const std::string& name) {
  if (name == "BERN") {
    return 300000;
  }
  if (name == "BD" || name == "ID" || name == "RARE2") {
    return 1000000;
  }
  throw UnknownDatasetError("unknown dataset: " + name);
}

std::string params_to_json(const HmmParams& params) {
  nlohmann::json j;
  const int k = params.state_count();
  j["K"] = k;
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    for (int c = 0; c < k; ++c) {
      rows[static_cast<std::size_t>(i)].push_back(params.transition()(i, c));
    }
  }
  j["A"] = rows;
  if (params.emissions().kind() == EmissionKind::Gaussian) {
    const auto& g = params.emissions().gaussian();
    j["family"] = "gaussian";
    j["means"] = std::vector<double>(g.means.data(), g.means.data() + k);
    j["variances"] =
        std::vector<double>(g.variances.data(), g.variances.data() + k);
  } else {
    const auto& b = params.emissions().bernoulli();
    j["family"] = "bernoulli";
    j["probs"] =
        std::vector<double>(b.success_probs.data(), b.success_probs.data() + k);
  }
  const Eigen::VectorXd pi = stationary_distribution(params.transition());
  j["stationary"] = std::vector<double>(pi.data(), pi.data() + k);
  return j.dump(2);
}

HmmParams params_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  const auto rows = j.at("A").get<std::vector<std::vector<double>>>();
  TransitionMatrix a(rows_to_matrix(rows));
  if (j.at("family").get<std::string>() == "gaussian") {
    const auto means = j.at("means").get<std::vector<double>>();
    const auto vars = j.at("variances").get<std::vector<double>>();
    GaussianEmissions g;
    g.means = Eigen::Map<const Eigen::VectorXd>(means.data(),
                                                static_cast<Eigen::Index>(means.size()));
    g.variances = Eigen::Map<const Eigen::VectorXd>(
        vars.data(), static_cast<Eigen::Index>(vars.size()));
    return HmmParams(std::move(a), EmissionFamily(std::move(g)));
  }
  const auto probs = j.at("probs").get<std::vector<double>>();
  BernoulliEmissions b;
  b.success_probs = Eigen::Map<const Eigen::VectorXd>(
      probs.data(), static_cast<Eigen::Index>(probs.size()));
  return HmmParams(std::move(a), EmissionFamily(std::move(b)));
}

void write_values_csv(const std::vector<double>& values,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open for writing: " + path);
  }
  for (double v : values) {
    out << format_double(v) << '\n';
  }
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

std::vector<std::string> generate_dataset(const std::string& name,
                                          std::int64_t length,
                                          std::uint64_t seed,
                                          const std::string& out_dir) {
  const HmmParams params = builtin_params(name);
  if (length <= 0) {
    length = builtin_default_length(name);
  }
  const SimulationResult sim = simulate(params, length, seed);

  std::filesystem::create_directories(out_dir);
  const std::string obs_path =
      (std::filesystem::path(out_dir) / "observations.csv").string();
  const std::string latent_path =
      (std::filesystem::path(out_dir) / "latent.csv").string();
  const std::string params_path =
      (std::filesystem::path(out_dir) / "true_params.json").string();

  write_values_csv(sim.observations.values(), obs_path);

  std::ofstream latent(latent_path);
  if (!latent) {
    throw IoError("cannot open for writing: " + latent_path);
  }
  for (int s : sim.path.states()) {
    latent << s << '\n';
  }

  std::ofstream pj(params_path);
  if (!pj) {
    throw IoError("cannot open for writing: " + params_path);
  }
  pj << params_to_json(params) << '\n';

  return {obs_path, latent_path, params_path};
}

IngestReport ingest_csv(const std::string& path, int column,
                        std::int64_t max_length, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open: " + path);
  }
  IngestReport report;
  std::string line;
  std::int64_t line_no = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    bool found = false;
    while (std::getline(ss, cell, ',')) {
      if (col++ == column) {
        found = true;
        break;
      }
    }
    if (!found) {
      throw ParseError("row has no column " + std::to_string(column), line_no);
    }
    std::size_t consumed = 0;
    double value = 0.0;
    bool numeric = true;
    try {
      value = std::stod(cell, &consumed);
    } catch (const std::exception&) {
      numeric = false;
    }
    if (numeric) {
      while (consumed < cell.size() && std::isspace(static_cast<unsigned char>(cell[consumed]))) {
        ++consumed;
      }
      numeric = consumed == cell.size();
    }
    if (!numeric) {
      if (first_content_line) {
        // Optional header row.
        first_content_line = false;
        continue;
      }
      throw ParseError("non-numeric value '" + cell + "'", line_no);
    }
    first_content_line = false;
    if (!std::isfinite(value)) {
      ++report.skipped_nonfinite;
      continue;
    }
    report.values.push_back(value);
  }
  if (report.values.empty()) {
    throw EmptySeriesError("no numeric observations in " + path);
  }
  if (max_length > 0 &&
      static_cast<std::int64_t>(report.values.size()) > max_length) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::int64_t> pick(
        0, static_cast<std::int64_t>(report.values.size()) - max_length);
    const std::int64_t start = pick(rng);
    report.window_start = start + 1;
    report.values = std::vector<double>(
        report.values.begin() + start, report.values.begin() + start + max_length);
  }
  return report;
}

}  // namespace csghmm::tools
