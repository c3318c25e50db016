#include "csghmm/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <json.hpp>

#include "csghmm/random.hpp"

namespace csghmm {

Eigen::VectorXd embed_window(const Eigen::VectorXd& core,
                             WindowPreprocessing preprocessing) {
  if (preprocessing == WindowPreprocessing::None) {
    return core;
  }
  Eigen::VectorXd sorted = core;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  return sorted;
}

Eigen::MatrixXd embed_all_windows(const ObservationSeries& y,
                                  const SubchainPartition& part,
                                  WindowPreprocessing preprocessing) {
  const std::int64_t count = part.window_count();
  Eigen::MatrixXd points(part.window_length, count);
  for (std::int64_t w = 0; w < count; ++w) {
    const BufferedWindow win = buffered_window(part, w);
    Eigen::VectorXd core(part.window_length);
    for (std::int64_t t = win.core_first; t <= win.core_last; ++t) {
      core(t - win.core_first) = y.at(t);
    }
    points.col(w) = embed_window(core, preprocessing);
  }
  return points;
}

ClusterModel::ClusterModel(Eigen::MatrixXd centroids,
                           std::vector<std::int64_t> centers,
                           std::vector<int> assignment,
                           WindowPreprocessing preprocessing)
    : centroids_(std::move(centroids)),
      centers_(std::move(centers)),
      assignment_(std::move(assignment)),
      preprocessing_(preprocessing) {
  const int m = cluster_count();
  if (m < 1) {
    throw TooManyClustersError("cluster model needs at least one cluster");
  }
  if (centers_.size() != assignment_.size() || assignment_.empty()) {
    throw ShapeMismatchError("assignment must cover every window center");
  }
  sizes_.assign(static_cast<std::size_t>(m), 0);
  members_.assign(static_cast<std::size_t>(m), {});
  for (std::size_t w = 0; w < assignment_.size(); ++w) {
    const int c = assignment_[w];
    if (c < 0 || c >= m) {
      throw ShapeMismatchError("cluster id out of range");
    }
    sizes_[static_cast<std::size_t>(c)] += 1;
    members_[static_cast<std::size_t>(c)].push_back(static_cast<std::int64_t>(w));
  }
  for (int c = 0; c < m; ++c) {
    if (sizes_[static_cast<std::size_t>(c)] == 0) {
      throw EmptyClusterError("cluster " + std::to_string(c) + " is empty");
    }
  }
}

std::string ClusterModel::to_json() const {
  nlohmann::json j;
  j["cluster_count"] = cluster_count();
  j["preprocessing"] =
      preprocessing_ == WindowPreprocessing::SortWithinWindow ? "sort" : "none";
  j["centers"] = centers_;
  j["assignment"] = assignment_;
  std::vector<std::vector<double>> cents;
  for (int m = 0; m < cluster_count(); ++m) {
    cents.emplace_back(centroids_.col(m).data(),
                       centroids_.col(m).data() + centroids_.rows());
  }
  j["centroids"] = cents;
  return j.dump(2);
}

ClusterModel ClusterModel::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  const int m = j.at("cluster_count").get<int>();
  const auto cents = j.at("centroids").get<std::vector<std::vector<double>>>();
  if (static_cast<int>(cents.size()) != m || cents.empty()) {
    throw ShapeMismatchError("centroid list does not match cluster count");
  }
  Eigen::MatrixXd centroids(cents.front().size(), m);
  for (int c = 0; c < m; ++c) {
    if (cents[static_cast<std::size_t>(c)].size() != cents.front().size()) {
      throw ShapeMismatchError("ragged centroid list");
    }
    for (std::size_t i = 0; i < cents.front().size(); ++i) {
      centroids(static_cast<Eigen::Index>(i), c) =
          cents[static_cast<std::size_t>(c)][i];
    }
  }
  const auto preprocessing =
      j.at("preprocessing").get<std::string>() == "sort"
          ? WindowPreprocessing::SortWithinWindow
          : WindowPreprocessing::None;
  return ClusterModel(std::move(centroids),
                      j.at("centers").get<std::vector<std::int64_t>>(),
                      j.at("assignment").get<std::vector<int>>(), preprocessing);
}

namespace {

int nearest_centroid(const Eigen::MatrixXd& centroids,
                     const Eigen::VectorXd& point) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int m = 0; m < centroids.cols(); ++m) {
    const double d = (point - centroids.col(m)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = m;
    }
  }
  return best;
}

}  // namespace

Eigen::MatrixXd kmeanspp_seed(const Eigen::MatrixXd& points, int cluster_count,
                              std::uint64_t seed) {
  const std::int64_t n = points.cols();
  if (cluster_count < 1 || cluster_count > n) {
    throw TooManyClustersError("cluster count must lie in [1, point count]");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd centroids(points.rows(), cluster_count);

  std::uniform_int_distribution<std::int64_t> first(0, n - 1);
  centroids.col(0) = points.col(first(rng));

  Eigen::VectorXd min_dist2(n);
  for (std::int64_t i = 0; i < n; ++i) {
    min_dist2(i) = (points.col(i) - centroids.col(0)).squaredNorm();
  }
  for (int m = 1; m < cluster_count; ++m) {
    const double total = min_dist2.sum();
    std::int64_t pick = 0;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double cum = 0.0;
      pick = n - 1;
      for (std::int64_t i = 0; i < n; ++i) {
        cum += min_dist2(i);
        if (target <= cum) {
          pick = i;
          break;
        }
      }
    } else {
      // Every remaining point coincides with a chosen centroid; fall back to
      // a uniform pick so degenerate inputs still seed.
      pick = first(rng);
    }
    centroids.col(m) = points.col(pick);
    for (std::int64_t i = 0; i < n; ++i) {
      min_dist2(i) = std::min(min_dist2(i),
                              (points.col(i) - centroids.col(m)).squaredNorm());
    }
  }
  return centroids;
}

ClusterModel kmeans_fit(const Eigen::MatrixXd& points,
                        std::vector<std::int64_t> centers, int cluster_count,
                        std::uint64_t seed, int max_iters, double tol,
                        WindowPreprocessing preprocessing,
                        std::vector<double>* objective_history) {
  const std::int64_t n = points.cols();
  if (static_cast<std::int64_t>(centers.size()) != n) {
    throw ShapeMismatchError("one center per point is required");
  }
  Eigen::MatrixXd centroids = kmeanspp_seed(points, cluster_count, seed);
  std::vector<int> assignment(static_cast<std::size_t>(n), 0);

  for (int iter = 0; iter < max_iters; ++iter) {
    for (std::int64_t i = 0; i < n; ++i) {
      assignment[static_cast<std::size_t>(i)] =
          nearest_centroid(centroids, points.col(i));
    }

    std::vector<std::int64_t> counts(static_cast<std::size_t>(cluster_count), 0);
    for (int c : assignment) {
      counts[static_cast<std::size_t>(c)] += 1;
    }
    // Repair empty clusters: hand each one the point currently farthest from
    // its centroid, taken from a cluster that can spare it.
    for (int m = 0; m < cluster_count; ++m) {
      if (counts[static_cast<std::size_t>(m)] > 0) continue;
      std::int64_t farthest = -1;
      double far_d = -1.0;
      for (std::int64_t i = 0; i < n; ++i) {
        const int c = assignment[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(c)] <= 1) continue;
        const double d = (points.col(i) - centroids.col(c)).squaredNorm();
        if (d > far_d) {
          far_d = d;
          farthest = i;
        }
      }
      if (farthest < 0) {
        throw TooManyClustersError("cannot repair empty cluster");
      }
      counts[static_cast<std::size_t>(assignment[static_cast<std::size_t>(farthest)])] -= 1;
      assignment[static_cast<std::size_t>(farthest)] = m;
      counts[static_cast<std::size_t>(m)] += 1;
      centroids.col(m) = points.col(farthest);
    }

    if (objective_history) {
      double wcss = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        wcss += (points.col(i) -
                 centroids.col(assignment[static_cast<std::size_t>(i)]))
                    .squaredNorm();
      }
      objective_history->push_back(wcss);
    }

    Eigen::MatrixXd updated = Eigen::MatrixXd::Zero(points.rows(), cluster_count);
    for (std::int64_t i = 0; i < n; ++i) {
      updated.col(assignment[static_cast<std::size_t>(i)]) += points.col(i);
    }
    double movement = 0.0;
    for (int m = 0; m < cluster_count; ++m) {
      updated.col(m) /= static_cast<double>(counts[static_cast<std::size_t>(m)]);
      movement = std::max(movement, (updated.col(m) - centroids.col(m)).norm());
    }
    centroids = std::move(updated);
    if (movement < tol) {
      break;
    }
  }

  for (std::int64_t i = 0; i < n; ++i) {
    assignment[static_cast<std::size_t>(i)] =
        nearest_centroid(centroids, points.col(i));
  }
  // The final assignment can re-empty a cluster; pin each empty one to its
  // farthest point as above so the model always partitions.
  std::vector<std::int64_t> counts(static_cast<std::size_t>(cluster_count), 0);
  for (int c : assignment) {
    counts[static_cast<std::size_t>(c)] += 1;
  }
  for (int m = 0; m < cluster_count; ++m) {
    if (counts[static_cast<std::size_t>(m)] > 0) continue;
    std::int64_t farthest = -1;
    double far_d = -1.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const int c = assignment[static_cast<std::size_t>(i)];
      if (counts[static_cast<std::size_t>(c)] <= 1) continue;
      const double d = (points.col(i) - centroids.col(c)).squaredNorm();
      if (d > far_d) {
        far_d = d;
        farthest = i;
      }
    }
    if (farthest < 0) {
      throw TooManyClustersError("cannot repair empty cluster");
    }
    counts[static_cast<std::size_t>(assignment[static_cast<std::size_t>(farthest)])] -= 1;
    assignment[static_cast<std::size_t>(farthest)] = m;
    counts[static_cast<std::size_t>(m)] += 1;
    centroids.col(m) = points.col(farthest);
  }

  return ClusterModel(std::move(centroids), std::move(centers),
                      std::move(assignment), preprocessing);
}

double within_cluster_sum_of_squares(const Eigen::MatrixXd& points,
                                     const ClusterModel& model) {
  double wcss = 0.0;
  for (std::int64_t i = 0; i < points.cols(); ++i) {
    wcss += (points.col(i) -
             model.centroids().col(model.assignment()[static_cast<std::size_t>(i)]))
                .squaredNorm();
  }
  return wcss;
}

ClusterModel cluster_series_windows(const ObservationSeries& y,
                                    const SubchainPartition& part,
                                    int cluster_count, std::uint64_t seed,
                                    WindowPreprocessing preprocessing,
                                    int restarts) {
  if (restarts < 1) {
    throw ShapeMismatchError("at least one clustering restart is required");
  }
  const Eigen::MatrixXd points = embed_all_windows(y, part, preprocessing);
  std::vector<std::int64_t> centers = part.centers();

  ClusterModel best = kmeans_fit(points, centers, cluster_count,
                                 derive_seed(seed, 0), 100, 1e-8, preprocessing);
  double best_wcss = within_cluster_sum_of_squares(points, best);
  for (int r = 1; r < restarts; ++r) {
    ClusterModel candidate =
        kmeans_fit(points, centers, cluster_count, derive_seed(seed, r), 100,
                   1e-8, preprocessing);
    const double wcss = within_cluster_sum_of_squares(points, candidate);
    if (wcss < best_wcss) {
      best_wcss = wcss;
      best = std::move(candidate);
    }
  }
  return best;
}

}  // namespace csghmm
